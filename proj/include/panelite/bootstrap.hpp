#ifndef PANELITE_BOOTSTRAP_HPP
#define PANELITE_BOOTSTRAP_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "panelite/design.hpp"
#include "panelite/errors.hpp"
#include "panelite/gmm.hpp"
#include "panelite/panel.hpp"
#include "panelite/parallel.hpp"
#include "panelite/rng.hpp"
#include "panelite/select.hpp"
#include "panelite/stats.hpp"

namespace panelite {

/*
 * bootstrap.hpp
 * -------------
 * Parametric bootstrap: fit every outcome cell, stack fitted values and
 * residuals per individual, then rebuild synthetic panels by resampling whole
 * residual series within treatment groups (cross-cell dependence preserved)
 * and re-estimate the target effect with the original split fixed. Replicate
 * b draws from an independent stream derived from (seed, b), so results do
 * not depend on the worker count.
 */

using SplitPlan = std::map<CellIndex, SplitSpec>;

// Which sample fits pretreatment cells: everyone is untreated before T0+1,
// so pooling is the default; control_only keeps the counterfactual reading.
enum class PretreatFit { pooled, control_only };

struct BootstrapOptions {
  GmmStep step = GmmStep::two;
  PretreatFit pretreat_fit = PretreatFit::pooled;
  DesignOptions design;
  int threads = 1;
  double max_failure_rate = 0.05;
  std::optional<SplitPlan> plan;  // per-cell splits for fit_all_cells
};

namespace detail {

// Lexicographically first feasible regressor set of size p for the cell.
inline SplitSpec first_feasible_split(const PanelDataset& data,
                                      const TreatmentLayout& layout,
                                      CellIndex target, int p,
                                      const DesignOptions& opts) {
  SplitRng rng(0);  // unused: the exhaustive branch is deterministic
  auto splits = enumerate_splits(data, layout, target, p, 1, rng, opts);
  return splits.front();
}

}  // namespace detail

// Default plan: the supplied split for its own target cell, and for every
// other cell the lexicographically first feasible split of the same size.
inline SplitPlan default_plan(const PanelDataset& data,
                              const TreatmentLayout& layout,
                              const SplitSpec& target_split,
                              const DesignOptions& opts = {}) {
  SplitPlan plan;
  plan[target_split.target] = target_split;
  const int p = target_split.p();
  for (int t = 1; t <= data.periods(); ++t) {
    for (int k = 1; k <= data.n_outcomes(); ++k) {
      CellIndex cell{t, k};
      if (plan.count(cell)) continue;
      const int pool = layout.t0 * data.n_outcomes() -
                       (cell.period <= layout.t0 ? 1 : 0);
      const int p_cell = std::min(p, pool);
      if (p_cell < 1) {
        throw ValidationError("no pretreatment cells available to fit cell " +
                              to_string(cell));
      }
      try {
        plan[cell] =
            detail::first_feasible_split(data, layout, cell, p_cell, opts);
      } catch (const Error& e) {
        throw ValidationError("cell " + to_string(cell) +
                              " has no feasible split: " + e.what());
      }
    }
  }
  return plan;
}

// Plan via leave-one-out selection per cell (splits of size p).
inline SplitPlan selected_plan(const PanelDataset& data,
                               const TreatmentLayout& layout, int p,
                               GmmStep step, int subsample, int max_splits,
                               SplitRng& rng, const DesignOptions& opts = {},
                               LooScope scope = LooScope::both_groups) {
  SplitPlan plan;
  for (int t = 1; t <= data.periods(); ++t) {
    for (int k = 1; k <= data.n_outcomes(); ++k) {
      CellIndex cell{t, k};
      const int pool = layout.t0 * data.n_outcomes() -
                       (cell.period <= layout.t0 ? 1 : 0);
      const int p_cell = std::min(p, pool);
      SplitRng cell_rng = rng.split(
          static_cast<std::uint64_t>(data.cell_col(t, k)) + 1);
      try {
        auto report = select_model(data, layout, cell, p_cell, p_cell,
                                   max_splits, SelectionMode::best_set, step,
                                   subsample, cell_rng, opts, scope);
        plan[cell] = report.best_split;
      } catch (const Error& e) {
        throw ValidationError("cell " + to_string(cell) +
                              " has no feasible split: " + e.what());
      }
    }
  }
  return plan;
}

struct FittedPanel {
  Eigen::MatrixXd yhat;  // N x (T*K)
  Eigen::MatrixXd ehat;  // N x (T*K)
  SplitPlan plan;
};

// Fitted values and residuals for every (individual, cell). Posttreatment
// cells are fit per treatment group; pretreatment cells on the pooled sample
// (or controls only), predicting everyone.
inline FittedPanel fit_all_cells(const PanelDataset& data,
                                 const TreatmentLayout& layout,
                                 const SplitPlan& plan,
                                 GmmStep step = GmmStep::two,
                                 PretreatFit pretreat = PretreatFit::pooled,
                                 const DesignOptions& opts = {}) {
  FittedPanel out;
  out.plan = plan;
  out.yhat.resize(data.n(), data.cells());
  out.ehat.resize(data.n(), data.cells());

  std::vector<int> everyone(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) everyone[static_cast<std::size_t>(i)] = i;

  for (int t = 1; t <= data.periods(); ++t) {
    for (int k = 1; k <= data.n_outcomes(); ++k) {
      const CellIndex cell{t, k};
      const auto found = plan.find(cell);
      if (found == plan.end()) {
        throw ValidationError("split plan is missing cell " + to_string(cell));
      }
      const SplitSpec& split = found->second;
      if (split.target != cell) {
        throw ValidationError("split plan entry for cell " + to_string(cell) +
                              " targets " + to_string(split.target));
      }
      const int col = data.cell_col(t, k);
      try {
        if (t > layout.t0) {
          for (Group group : {Group::treated, Group::control}) {
            const DesignMatrices d = build_design(data, layout, split, group, opts);
            const GmmFit fit = fit_group(d, step, group);
            const Eigen::VectorXd fitted = d.z * fit.theta;
            for (std::size_t row = 0; row < d.rows.size(); ++row) {
              const int i = d.rows[row];
              out.yhat(i, col) = fitted(static_cast<Eigen::Index>(row));
              out.ehat(i, col) = d.y(static_cast<Eigen::Index>(row)) -
                                 fitted(static_cast<Eigen::Index>(row));
            }
          }
        } else {
          const auto& sample = pretreat == PretreatFit::pooled
                                   ? everyone
                                   : layout.control_ids;
          const DesignMatrices d =
              build_design_rows(data, layout, split, sample, opts);
          const GmmFit fit = fit_group(d, step, Group::control);
          const Eigen::MatrixXd z_all =
              build_regressor_rows(data, split, everyone);
          const Eigen::VectorXd fitted = z_all * fit.theta;
          for (int i = 0; i < data.n(); ++i) {
            out.yhat(i, col) = fitted(i);
            out.ehat(i, col) = data.outcome_matrix()(i, col) - fitted(i);
          }
        }
      } catch (const Error& e) {
        throw EstimationError("cell " + to_string(cell) + ": " + e.what());
      }
    }
  }
  return out;
}

enum class CiMode { percentile, normal_approx };
enum class Significance { negative, none, positive };

inline const char* to_string(Significance s) {
  switch (s) {
    case Significance::negative: return "negative";
    case Significance::positive: return "positive";
    default: return "none";
  }
}

struct BootstrapResult {
  int b_requested = 0;
  int b_completed = 0;
  Eigen::MatrixXd ite_draws;  // completed replicates x N
  Eigen::VectorXd ate_draws;
  Eigen::VectorXd ite;  // point estimates from the original sample
  double ate = 0.0;
  Eigen::VectorXd se_ite;
  double se_ate = 0.0;
  CiMode ci_mode = CiMode::percentile;
  double alpha = 0.05;
  Eigen::MatrixXd ci_ite;  // N x 2
  double ci_ate_lo = 0.0;
  double ci_ate_hi = 0.0;
  std::vector<Significance> significance;
};

namespace detail {

// 1-based ceiling order-statistic indices, clamped to [1, B].
inline std::pair<int, int> percentile_indices(int b, double alpha) {
  const int lo = std::clamp(
      static_cast<int>(std::ceil(alpha / 2.0 * static_cast<double>(b))), 1, b);
  const int hi = std::clamp(
      static_cast<int>(std::ceil((1.0 - alpha / 2.0) * static_cast<double>(b))),
      1, b);
  return {lo, hi};
}

inline std::pair<double, double> percentile_ci(std::vector<double> draws,
                                               double alpha) {
  std::sort(draws.begin(), draws.end());
  auto [lo, hi] = percentile_indices(static_cast<int>(draws.size()), alpha);
  return {draws[static_cast<std::size_t>(lo - 1)],
          draws[static_cast<std::size_t>(hi - 1)]};
}

inline double draw_sd(const Eigen::VectorXd& draws) {
  const double mean = draws.mean();
  return std::sqrt((draws.array() - mean).square().sum() /
                   static_cast<double>(draws.size()));
}

}  // namespace detail

inline std::vector<Significance> classify_from_cis(
    const Eigen::MatrixXd& ci_ite) {
  std::vector<Significance> out;
  out.reserve(static_cast<std::size_t>(ci_ite.rows()));
  for (Eigen::Index i = 0; i < ci_ite.rows(); ++i) {
    if (ci_ite(i, 1) < 0.0) out.push_back(Significance::negative);
    else if (ci_ite(i, 0) > 0.0) out.push_back(Significance::positive);
    else out.push_back(Significance::none);
  }
  return out;
}

// Relabels individuals from the stored draws at the requested level.
inline std::vector<Significance> classify_significance(
    const BootstrapResult& result, double alpha) {
  const Eigen::Index n = result.ite.size();
  Eigen::MatrixXd cis(n, 2);
  if (result.ci_mode == CiMode::percentile) {
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<double> draws(result.ite_draws.col(i).begin(),
                                result.ite_draws.col(i).end());
      auto [lo, hi] = detail::percentile_ci(std::move(draws), alpha);
      cis(i, 0) = lo;
      cis(i, 1) = hi;
    }
  } else {
    const double z = normal_quantile(1.0 - alpha / 2.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      cis(i, 0) = result.ite(i) - z * result.se_ite(i);
      cis(i, 1) = result.ite(i) + z * result.se_ite(i);
    }
  }
  return classify_from_cis(cis);
}

inline BootstrapResult bootstrap_effects(const PanelDataset& data,
                                         const TreatmentLayout& layout,
                                         CellIndex target,
                                         const SplitSpec& split, int b,
                                         CiMode ci_mode, double alpha,
                                         const SplitRng& rng,
                                         const BootstrapOptions& opts = {}) {
  if (alpha <= 0.0 || alpha >= 1.0) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  if (b < 1) throw ValidationError("bootstrap needs B >= 1 replicates");
  if (ci_mode == CiMode::percentile && b < 100) {
    throw ValidationError(
        "percentile intervals need B >= 100 for usable order statistics");
  }
  if (split.target != target) {
    throw ValidationError("split targets " + to_string(split.target) +
                          ", bootstrap target is " + to_string(target));
  }

  const SplitPlan plan =
      opts.plan ? *opts.plan : default_plan(data, layout, split, opts.design);
  const FittedPanel fitted = fit_all_cells(data, layout, plan, opts.step,
                                           opts.pretreat_fit, opts.design);

  BootstrapResult out;
  out.b_requested = b;
  out.ci_mode = ci_mode;
  out.alpha = alpha;
  {
    const EffectEstimates point =
        estimate_effects(data, layout, split, opts.step, opts.design);
    out.ite = point.ite;
    out.ate = point.ate;
  }

  const int n = data.n();
  Eigen::MatrixXd draws(b, n);
  Eigen::VectorXd ate_draws(b);
  std::vector<std::uint8_t> failed(static_cast<std::size_t>(b), 0);

  parallel_for(b, opts.threads, [&](int rep) {
    SplitRng stream = rng.split(static_cast<std::uint64_t>(rep) + 1);
    Eigen::MatrixXd y_new(n, data.cells());
    for (int i = 0; i < n; ++i) {
      const bool is_treated = data.treated_at(i, data.periods());
      const auto& pool = is_treated ? layout.treated_ids : layout.control_ids;
      const int donor = pool[static_cast<std::size_t>(
          stream.next_below(pool.size()))];
      y_new.row(i) = fitted.yhat.row(i) + fitted.ehat.row(donor);
    }
    try {
      const PanelDataset synthetic = data.with_outcomes(std::move(y_new));
      const EffectEstimates est =
          estimate_effects(synthetic, layout, split, opts.step, opts.design);
      draws.row(rep) = est.ite.transpose();
      ate_draws(rep) = est.ate;
    } catch (const EstimationError&) {
      failed[static_cast<std::size_t>(rep)] = 1;
    }
  });

  int n_failed = 0;
  for (auto f : failed) n_failed += f;
  if (static_cast<double>(n_failed) >
      opts.max_failure_rate * static_cast<double>(b)) {
    throw EstimationError(std::to_string(n_failed) + " of " +
                          std::to_string(b) + " bootstrap replicates failed");
  }
  out.b_completed = b - n_failed;
  out.ite_draws.resize(out.b_completed, n);
  out.ate_draws.resize(out.b_completed);
  int w = 0;
  for (int rep = 0; rep < b; ++rep) {
    if (failed[static_cast<std::size_t>(rep)]) continue;
    out.ite_draws.row(w) = draws.row(rep);
    out.ate_draws(w) = ate_draws(rep);
    ++w;
  }

  out.se_ite.resize(n);
  for (int i = 0; i < n; ++i) {
    out.se_ite(i) = detail::draw_sd(out.ite_draws.col(i));
  }
  out.se_ate = detail::draw_sd(out.ate_draws);

  out.ci_ite.resize(n, 2);
  if (ci_mode == CiMode::percentile) {
    for (int i = 0; i < n; ++i) {
      std::vector<double> column(out.ite_draws.col(i).begin(),
                                 out.ite_draws.col(i).end());
      auto [lo, hi] = detail::percentile_ci(std::move(column), alpha);
      out.ci_ite(i, 0) = lo;
      out.ci_ite(i, 1) = hi;
    }
    std::vector<double> ates(out.ate_draws.begin(), out.ate_draws.end());
    auto [lo, hi] = detail::percentile_ci(std::move(ates), alpha);
    out.ci_ate_lo = lo;
    out.ci_ate_hi = hi;
  } else {
    const double z = normal_quantile(1.0 - alpha / 2.0);
    for (int i = 0; i < n; ++i) {
      out.ci_ite(i, 0) = out.ite(i) - z * out.se_ite(i);
      out.ci_ite(i, 1) = out.ite(i) + z * out.se_ite(i);
    }
    out.ci_ate_lo = out.ate - z * out.se_ate;
    out.ci_ate_hi = out.ate + z * out.se_ate;
  }
  out.significance = classify_from_cis(out.ci_ite);
  return out;
}

inline void write_bootstrap_csv(const BootstrapResult& result,
                                const PanelDataset& data,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << "id,tau_hat,se,ci_lo,ci_hi,significance\n";
  for (int i = 0; i < data.n(); ++i) {
    out << csv_quote(data.id(i)) << ',' << format_double(result.ite(i)) << ','
        << format_double(result.se_ite(i)) << ','
        << format_double(result.ci_ite(i, 0)) << ','
        << format_double(result.ci_ite(i, 1)) << ','
        << to_string(result.significance[static_cast<std::size_t>(i)]) << '\n';
  }
}

inline nlohmann::json draws_to_json(const BootstrapResult& result) {
  nlohmann::json j;
  j["b_completed"] = result.b_completed;
  j["ate_draws"] =
      std::vector<double>(result.ate_draws.begin(), result.ate_draws.end());
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < result.ite_draws.rows(); ++r) {
    rows.push_back(std::vector<double>(result.ite_draws.row(r).begin(),
                                       result.ite_draws.row(r).end()));
  }
  j["ite_draws"] = std::move(rows);
  return j;
}

}  // namespace panelite

#endif  // PANELITE_BOOTSTRAP_HPP
