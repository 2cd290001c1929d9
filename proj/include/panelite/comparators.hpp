#ifndef PANELITE_COMPARATORS_HPP
#define PANELITE_COMPARATORS_HPP

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "panelite/errors.hpp"
#include "panelite/gmm.hpp"
#include "panelite/linalg.hpp"
#include "panelite/panel.hpp"

namespace panelite {

/*
 * comparators.hpp
 * ---------------
 * Two baselines sharing the exact same PanelDataset as the GMM estimator:
 *
 *  - An interactive fixed effects fit: alternate between least squares for
 *    the covariate coefficients and a truncated SVD of the residual matrix
 *    for factors/loadings on the control sample, then recover each treated
 *    unit's loadings from its pretreatment cells. Outcome cells are stacked
 *    period-major, so "time" for the factor model is the (period, outcome)
 *    cell index and the covariate coefficient vector is shared across cells.
 *
 *  - Synthetic control weights per treated unit: nonnegative weights summing
 *    to one that best reproduce the unit's stacked pretreatment cells from
 *    the control units, found by Frank-Wolfe with exact line search.
 */

struct IfeOptions {
  bool use_covariates = true;   // regress on X_it (shared coefficient vector)
  bool cell_intercept = false;  // absorb a per-cell mean before factoring
  double tol = 1e-8;
  int max_iter = 1000;
};

struct IfeFit {
  Eigen::VectorXd beta;        // r (empty when covariates are unused)
  Eigen::MatrixXd factors;     // (T*K) x f with F'F/(TK) = I
  Eigen::MatrixXd loadings;    // N x f; treated rows from pretreatment cells
  Eigen::VectorXd cell_means;  // T*K (zero unless cell_intercept)
  int n_factors = 0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> objective_path;  // control-sample MSE per iteration

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["n_factors"] = n_factors;
    j["converged"] = converged;
    j["iterations"] = iterations;
    j["beta"] = std::vector<double>(beta.begin(), beta.end());
    j["objective_path"] = objective_path;
    return j;
  }
};

namespace detail {

// Covariate value for a stacked cell column: X_{i, period(cell)}.
inline Eigen::MatrixXd cell_covariates(const PanelDataset& data, int i) {
  const int r = data.n_covariates();
  Eigen::MatrixXd x(data.cells(), r);
  for (int t = 1; t <= data.periods(); ++t) {
    for (int k = 1; k <= data.n_outcomes(); ++k) {
      for (int j = 1; j <= r; ++j) {
        x(data.cell_col(t, k), j - 1) = data.covariate(i, t, j);
      }
    }
  }
  return x;
}

// Best rank-f approximation W ~ loadings * factors' with factors'factors
// normalized to (cells) * I. Sign fixed so the first nonzero loading of each
// factor is positive.
inline void truncated_factor(const Eigen::MatrixXd& w, int f,
                             Eigen::MatrixXd& loadings,
                             Eigen::MatrixXd& factors) {
  const double cells = static_cast<double>(w.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinU |
                                               Eigen::ComputeThinV);
  loadings.resize(w.rows(), f);
  factors.resize(w.cols(), f);
  for (int j = 0; j < f; ++j) {
    loadings.col(j) =
        svd.matrixU().col(j) * svd.singularValues()(j) / std::sqrt(cells);
    factors.col(j) = svd.matrixV().col(j) * std::sqrt(cells);
    for (Eigen::Index i = 0; i < loadings.rows(); ++i) {
      const double v = loadings(i, j);
      if (std::abs(v) > 1e-14) {
        if (v < 0) {
          loadings.col(j) = -loadings.col(j);
          factors.col(j) = -factors.col(j);
        }
        break;
      }
    }
  }
}

}  // namespace detail

// f >= 0 factors fit on the control units' full series; treated loadings come
// from their pretreatment cells afterwards. Non-convergence returns the best
// iterate flagged converged = false.
inline IfeFit ife_fit(const PanelDataset& data, const TreatmentLayout& layout,
                      int f, const IfeOptions& opts = {}) {
  if (f < 0) throw ValidationError("factor count must be >= 0");
  const int cells = data.cells();
  const int n0 = layout.n0();
  const int pre_cells = layout.t0 * data.n_outcomes();
  if (f > 0 && pre_cells < f) {
    throw ValidationError(
        "not enough pretreatment cells to identify treated loadings (" +
        std::to_string(pre_cells) + " < f = " + std::to_string(f) + ")");
  }
  if (f > std::min(n0, cells)) {
    throw ValidationError("factor count exceeds the control matrix rank bound");
  }
  const int r = opts.use_covariates ? data.n_covariates() : 0;

  // Control outcome matrix (N0 x cells) and stacked covariate rows.
  Eigen::MatrixXd y0(n0, cells);
  for (int j = 0; j < n0; ++j) {
    y0.row(j) = data.outcome_matrix().row(layout.control_ids[static_cast<std::size_t>(j)]);
  }
  std::vector<Eigen::MatrixXd> x0;  // per control unit: cells x r
  if (r > 0) {
    x0.reserve(static_cast<std::size_t>(n0));
    for (int j = 0; j < n0; ++j) {
      x0.push_back(detail::cell_covariates(
          data, layout.control_ids[static_cast<std::size_t>(j)]));
    }
  }

  IfeFit fit;
  fit.n_factors = f;
  fit.beta = Eigen::VectorXd::Zero(r);
  fit.cell_means = Eigen::VectorXd::Zero(cells);
  Eigen::MatrixXd control_loadings = Eigen::MatrixXd::Zero(n0, std::max(f, 0));
  fit.factors = Eigen::MatrixXd::Zero(cells, std::max(f, 0));

  double prev_obj = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iter; ++it) {
    // (i) beta given factor part: pooled least squares over control cells.
    if (r > 0) {
      Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(r, r);
      Eigen::VectorXd xty = Eigen::VectorXd::Zero(r);
      for (int j = 0; j < n0; ++j) {
        Eigen::VectorXd resid = y0.row(j).transpose() - fit.cell_means;
        if (f > 0) resid -= fit.factors * control_loadings.row(j).transpose();
        xtx.noalias() += x0[static_cast<std::size_t>(j)].transpose() *
                         x0[static_cast<std::size_t>(j)];
        xty.noalias() +=
            x0[static_cast<std::size_t>(j)].transpose() * resid;
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
      if (ldlt.info() != Eigen::Success) {
        throw SingularityError("IFE covariate block singular", 0.0, 0.0);
      }
      fit.beta = ldlt.solve(xty);
    }

    // Residual matrix after the covariate part.
    Eigen::MatrixXd w = y0;
    if (r > 0) {
      for (int j = 0; j < n0; ++j) {
        w.row(j) -= (x0[static_cast<std::size_t>(j)] * fit.beta).transpose();
      }
    }
    // (ii) per-cell means given beta (when absorbed).
    if (opts.cell_intercept) {
      fit.cell_means = w.colwise().mean().transpose();
      w.rowwise() -= fit.cell_means.transpose();
    }
    // (iii) factors and control loadings: exact rank-f minimizer given beta.
    if (f > 0) {
      detail::truncated_factor(w, f, control_loadings, fit.factors);
      w -= control_loadings * fit.factors.transpose();
    }

    const double obj = w.squaredNorm() /
                       (static_cast<double>(n0) * static_cast<double>(cells));
    fit.objective_path.push_back(obj);
    fit.iterations = it + 1;
    if (prev_obj - obj < opts.tol) {
      fit.converged = true;
      break;
    }
    prev_obj = obj;
  }

  // Treated loadings: per-unit regression on pretreatment cells.
  fit.loadings = Eigen::MatrixXd::Zero(data.n(), std::max(f, 0));
  for (int j = 0; j < n0; ++j) {
    if (f > 0) {
      fit.loadings.row(layout.control_ids[static_cast<std::size_t>(j)]) =
          control_loadings.row(j);
    }
  }
  if (f > 0) {
    std::vector<int> pre_cols;
    for (int t = 1; t <= layout.t0; ++t) {
      for (int k = 1; k <= data.n_outcomes(); ++k) {
        pre_cols.push_back(data.cell_col(t, k));
      }
    }
    Eigen::MatrixXd f_pre(pre_cols.size(), f);
    for (std::size_t c = 0; c < pre_cols.size(); ++c) {
      f_pre.row(static_cast<Eigen::Index>(c)) =
          fit.factors.row(pre_cols[c]);
    }
    for (int i : layout.treated_ids) {
      Eigen::VectorXd resid(pre_cols.size());
      const Eigen::MatrixXd xi =
          r > 0 ? detail::cell_covariates(data, i) : Eigen::MatrixXd();
      for (std::size_t c = 0; c < pre_cols.size(); ++c) {
        double value = data.outcome_matrix()(i, pre_cols[c]) -
                       fit.cell_means(pre_cols[c]);
        if (r > 0) value -= xi.row(pre_cols[c]).dot(fit.beta);
        resid(static_cast<Eigen::Index>(c)) = value;
      }
      fit.loadings.row(i) =
          solve_least_squares(f_pre, resid, "treated loading regression")
              .coef.transpose();
    }
  }
  return fit;
}

// Counterfactual and treated-only effects at the target cell.
inline TreatedEffects ife_att(const IfeFit& fit, const PanelDataset& data,
                              const TreatmentLayout& layout,
                              CellIndex target) {
  if (target.period <= layout.t0) {
    throw ValidationError("ife_att needs a posttreatment target");
  }
  detail::check_cell_range(data, target);
  const int col = data.cell_col(target.period, target.outcome);
  TreatedEffects out;
  out.target = target;
  out.treated_ids = layout.treated_ids;
  out.itt.resize(layout.n1());
  const int r = static_cast<int>(fit.beta.size());
  for (int j = 0; j < layout.n1(); ++j) {
    const int i = layout.treated_ids[static_cast<std::size_t>(j)];
    double counterfactual = fit.cell_means(col);
    if (r > 0) {
      for (int q = 1; q <= r; ++q) {
        counterfactual +=
            data.covariate(i, target.period, q) * fit.beta(q - 1);
      }
    }
    if (fit.n_factors > 0) {
      counterfactual += fit.factors.row(col).dot(fit.loadings.row(i));
    }
    out.itt(j) = data.outcome_matrix()(i, col) - counterfactual;
  }
  out.att = out.itt.mean();
  return out;
}

inline TreatedEffects ife_att(const IfeFit& fit, const PanelDataset& data,
                              const TreatmentLayout& layout) {
  return ife_att(fit, data, layout,
                 CellIndex{layout.t0 + 1, data.n_outcomes()});
}

struct ScmOptions {
  int max_iter = 10000;
  double gap_tol = 1e-8;
};

struct ScmWeights {
  Eigen::VectorXd weights;  // over control units, simplex
  double objective = 0.0;   // squared pretreatment mismatch
  double gap = 0.0;         // Frank-Wolfe duality gap at exit
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_path;

  nlohmann::json to_json() const {
    return {{"weights", std::vector<double>(weights.begin(), weights.end())},
            {"objective", objective},
            {"gap", gap},
            {"iterations", iterations},
            {"converged", converged}};
  }
};

// min ||y - A w||^2 over the probability simplex. Pairwise Frank-Wolfe: the
// vertex linear-minimization oracle picks the target vertex, mass is moved
// from the worst vertex in the current support, with exact line search.
// Starts at the best single vertex; the Frank-Wolfe duality gap certifies
// the stop. Hitting the iteration cap returns the best feasible iterate
// flagged converged = false.
inline ScmWeights simplex_least_squares(const Eigen::MatrixXd& a,
                                        const Eigen::VectorXd& y,
                                        const ScmOptions& opts = {}) {
  const Eigen::Index n = a.cols();
  if (n == 0) throw ValidationError("no control units to weight");
  ScmWeights out;
  out.weights = Eigen::VectorXd::Zero(n);
  Eigen::Index start = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double obj = (a.col(j) - y).squaredNorm();
    if (obj < best) {
      best = obj;
      start = j;
    }
  }
  out.weights(start) = 1.0;
  Eigen::VectorXd fitted = a.col(start);

  for (int it = 0; it < opts.max_iter; ++it) {
    out.iterations = it + 1;
    out.objective_path.push_back((fitted - y).squaredNorm());
    const Eigen::VectorXd grad = 2.0 * (a.transpose() * (fitted - y));
    Eigen::Index target = 0;
    grad.minCoeff(&target);
    out.gap = grad.dot(out.weights) - grad(target);
    if (out.gap <= opts.gap_tol) {
      out.converged = true;
      break;
    }
    // Away vertex: worst gradient within the support.
    Eigen::Index away = target;
    double away_grad = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (out.weights(j) > 0.0 && grad(j) > away_grad) {
        away_grad = grad(j);
        away = j;
      }
    }
    if (away == target) break;  // support collapsed onto the target vertex
    const Eigen::VectorXd movement = a.col(target) - a.col(away);
    const double denom = movement.squaredNorm();
    if (denom <= 0.0) break;  // duplicate donors; nothing to gain
    double step = -movement.dot(fitted - y) / denom;
    step = std::clamp(step, 0.0, out.weights(away));
    if (step == 0.0) break;
    if (step == out.weights(away)) {
      out.weights(away) = 0.0;  // vertex leaves the support exactly
    } else {
      out.weights(away) -= step;
    }
    out.weights(target) += step;
    fitted += step * movement;
  }
  out.objective = (fitted - y).squaredNorm();
  return out;
}

// Synthetic control weights for one treated unit, matching on the stacked
// outcome cells listed in `stack`.
inline ScmWeights scm_fit(const PanelDataset& data,
                          const TreatmentLayout& layout, int treated_unit,
                          const std::vector<CellIndex>& stack,
                          const ScmOptions& opts = {}) {
  if (stack.empty()) {
    throw ValidationError("scm_fit needs at least one cell to match on");
  }
  for (const auto& c : stack) {
    detail::check_cell_range(data, c);
    if (c.period > layout.t0) {
      throw ValidationError("scm_fit matches pretreatment cells only; " +
                            to_string(c) + " is posttreatment");
    }
  }
  Eigen::MatrixXd a(stack.size(), layout.n0());
  Eigen::VectorXd y(stack.size());
  for (std::size_t s = 0; s < stack.size(); ++s) {
    const int col = data.cell_col(stack[s].period, stack[s].outcome);
    y(static_cast<Eigen::Index>(s)) =
        data.outcome_matrix()(treated_unit, col);
    for (int j = 0; j < layout.n0(); ++j) {
      a(static_cast<Eigen::Index>(s), j) = data.outcome_matrix()(
          layout.control_ids[static_cast<std::size_t>(j)], col);
    }
  }
  return simplex_least_squares(a, y, opts);
}

struct ScmAttResult {
  TreatedEffects effects;
  std::vector<ScmWeights> fits;  // aligned with treated_ids
};

// Per-treated-unit synthetic controls on all pretreatment cells, evaluated at
// the target cell.
inline ScmAttResult scm_att(const PanelDataset& data,
                            const TreatmentLayout& layout, CellIndex target,
                            const ScmOptions& opts = {}) {
  if (target.period <= layout.t0) {
    throw ValidationError("scm_att needs a posttreatment target");
  }
  std::vector<CellIndex> stack;
  for (int t = 1; t <= layout.t0; ++t) {
    for (int k = 1; k <= data.n_outcomes(); ++k) stack.push_back({t, k});
  }
  ScmAttResult out;
  out.effects.target = target;
  out.effects.treated_ids = layout.treated_ids;
  out.effects.itt.resize(layout.n1());
  const int col = data.cell_col(target.period, target.outcome);
  for (int j = 0; j < layout.n1(); ++j) {
    const int i = layout.treated_ids[static_cast<std::size_t>(j)];
    ScmWeights w = scm_fit(data, layout, i, stack, opts);
    double counterfactual = 0.0;
    for (int c = 0; c < layout.n0(); ++c) {
      counterfactual += w.weights(c) * data.outcome_matrix()(
          layout.control_ids[static_cast<std::size_t>(c)], col);
    }
    out.effects.itt(j) = data.outcome_matrix()(i, col) - counterfactual;
    out.fits.push_back(std::move(w));
  }
  out.effects.att = out.effects.itt.mean();
  return out;
}

}  // namespace panelite

#endif  // PANELITE_COMPARATORS_HPP
