#ifndef PANELITE_GMM_HPP
#define PANELITE_GMM_HPP

#include <Eigen/Dense>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "panelite/csv.hpp"
#include "panelite/design.hpp"
#include "panelite/errors.hpp"
#include "panelite/linalg.hpp"
#include "panelite/panel.hpp"

namespace panelite {

/*
 * gmm.hpp
 * -------
 * Linear GMM for the reduced-form outcome equations, one coefficient vector
 * per treatment group, and the individual / average effect estimates built
 * from the group contrast. theta solves
 *   min_theta (R'(y - Z theta))' W (R'(y - Z theta))
 * computed through a Cholesky/SVD route rather than explicit inverses.
 */

enum class GmmStep { one, two };

struct GmmFit {
  Eigen::VectorXd theta;
  Eigen::MatrixXd weight;     // the R x R weight the final solve used
  Eigen::VectorXd residuals;  // y - Z theta over the fitted group
  GmmStep step = GmmStep::one;
  Group group = Group::control;
  // Smallest singular values of the matrices the estimator inverts: the
  // solve matrix Z'R W R'Z, and for two-step fits also R'U R.
  std::vector<double> condition_diag;
  bool weight_ridged = false;

  struct FirstStep {
    Eigen::VectorXd theta;
    Eigen::MatrixXd weight;
  };
  std::optional<FirstStep> first_step;  // retained by two-step fits

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["theta"] = std::vector<double>(theta.begin(), theta.end());
    j["step"] = step == GmmStep::one ? 1 : 2;
    j["group"] = to_string(group);
    j["condition_diag"] = condition_diag;
    j["weight_ridged"] = weight_ridged;
    return j;
  }
};

namespace detail {

inline GmmFit gmm_solve_factor(const DesignMatrices& design,
                               const Eigen::MatrixXd& weight_root,
                               Eigen::MatrixXd weight, double weight_smin,
                               bool ridged, Group group) {
  // B = L' R'Z, c = L' R'y with W = L L'; theta = argmin ||B theta - c||.
  const Eigen::MatrixXd a = design.r_mat.transpose() * design.z;
  const Eigen::VectorXd b = design.r_mat.transpose() * design.y;
  const Eigen::MatrixXd bmat = weight_root.transpose() * a;
  const Eigen::VectorXd c = weight_root.transpose() * b;
  auto solution = solve_least_squares(bmat, c, "Z'RWR'Z");

  GmmFit fit;
  fit.theta = std::move(solution.coef);
  fit.weight = std::move(weight);
  fit.residuals = design.y - design.z * fit.theta;
  fit.group = group;
  fit.condition_diag = {solution.smin * solution.smin};
  if (weight_smin >= 0.0) fit.condition_diag.push_back(weight_smin);
  fit.weight_ridged = ridged;
  return fit;
}

}  // namespace detail

// One GMM solve with a caller-supplied symmetric positive definite weight.
inline GmmFit gmm_step(const DesignMatrices& design,
                       const Eigen::MatrixXd& weight,
                       Group group = Group::control) {
  if (design.z.rows() < design.z_dim()) {
    throw ValidationError("fewer rows than regressors (" +
                          std::to_string(design.z.rows()) + " < " +
                          std::to_string(design.z_dim()) + ")");
  }
  if (weight.rows() != design.r_dim()) {
    throw ValidationError("weight matrix must be R x R");
  }
  const Eigen::MatrixXd root = spd_cholesky(weight, "gmm weight");
  GmmFit fit = detail::gmm_solve_factor(design, root, weight, -1.0, false,
                                        group);
  fit.step = GmmStep::one;
  return fit;
}

// Two-step efficient GMM: identity-weighted first step, then weight
// N_g (R'UR)^-1 with U = diag(first-step squared residuals). A degenerate
// R'UR is ridge-shifted by 1e-10 * trace/R (1e-10 when the trace vanishes)
// and the fit is flagged.
inline GmmFit gmm_two_step(const DesignMatrices& design,
                           Group group = Group::control) {
  const Eigen::Index r_dim = design.r_dim();
  GmmFit first = gmm_step(
      design, Eigen::MatrixXd::Identity(r_dim, r_dim), group);

  // R'UR = C'C with C = diag(|e|) R; full V so zero modes are representable.
  const Eigen::MatrixXd c_mat =
      first.residuals.cwiseAbs().asDiagonal() * design.r_mat;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c_mat, Eigen::ComputeFullV);
  Eigen::VectorXd sigma2 = Eigen::VectorXd::Zero(r_dim);
  const auto& sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); ++i) sigma2(i) = sv(i) * sv(i);

  const double smax2 = sigma2.size() ? sigma2(0) : 0.0;
  const double smin2 = sigma2.size() ? sigma2(sigma2.size() - 1) : 0.0;
  // Degenerate when R'UR cannot be inverted meaningfully: rank-deficient,
  // ill-conditioned, or first-step residuals at machine-noise level.
  const double y_scale = std::max(1.0, design.y.cwiseAbs().maxCoeff());
  const bool residuals_vanish =
      first.residuals.cwiseAbs().maxCoeff() <= 1e-12 * y_scale;
  const bool degenerate =
      c_mat.rows() < r_dim || residuals_vanish ||
      normal_matrix_singular(std::sqrt(smin2), std::sqrt(smax2), c_mat.rows(),
                             r_dim);
  double ridge = 0.0;
  if (degenerate) {
    const double trace = sigma2.sum();
    ridge = trace > 0.0 ? 1e-10 * trace / static_cast<double>(r_dim) : 1e-10;
  }

  const double n_g = static_cast<double>(design.z.rows());
  const Eigen::MatrixXd v = svd.matrixV();
  const Eigen::VectorXd inv_shifted =
      (sigma2.array() + ridge).inverse().matrix();
  const Eigen::MatrixXd weight =
      n_g * (v * inv_shifted.asDiagonal() * v.transpose());
  // Factor of the weight itself: W = L L' with L = sqrt(N_g) V D^{-1/2}.
  const Eigen::MatrixXd root =
      std::sqrt(n_g) * (v * inv_shifted.cwiseSqrt().asDiagonal());

  GmmFit fit = detail::gmm_solve_factor(design, root, weight, smin2,
                                        degenerate, group);
  fit.step = GmmStep::two;
  fit.first_step =
      GmmFit::FirstStep{first.theta, Eigen::MatrixXd::Identity(r_dim, r_dim)};
  return fit;
}

inline GmmFit fit_group(const DesignMatrices& design, GmmStep step,
                        Group group) {
  if (step == GmmStep::one) {
    return gmm_step(design,
                    Eigen::MatrixXd::Identity(design.r_dim(), design.r_dim()),
                    group);
  }
  return gmm_two_step(design, group);
}

struct EffectEstimates {
  Eigen::VectorXd ite;  // tau-hat for every individual, panel order
  double ate = 0.0;     // mean over all N
  double att = 0.0;     // mean over the treated
  CellIndex target;
  SplitSpec split;
  std::optional<GmmFit> fit_treated;
  std::optional<GmmFit> fit_control;
  // Model-averaged estimates keep the per-split effect vectors.
  std::vector<Eigen::VectorXd> per_split_ite;
  std::vector<SplitSpec> splits_used;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["target"] = {target.period, target.outcome};
    j["ate"] = ate;
    j["att"] = att;
    j["ite"] = std::vector<double>(ite.begin(), ite.end());
    j["split"] = split.to_json();
    if (fit_treated) j["fit_treated"] = fit_treated->to_json();
    if (fit_control) j["fit_control"] = fit_control->to_json();
    if (!splits_used.empty()) {
      nlohmann::json splits = nlohmann::json::array();
      for (const auto& s : splits_used) splits.push_back(s.to_json());
      j["splits_used"] = std::move(splits);
    }
    return j;
  }
};

// theta for each group on the shared design, then tau_i = Z_i'(theta1 -
// theta0) for every individual in the panel.
inline EffectEstimates estimate_effects(const PanelDataset& data,
                                        const TreatmentLayout& layout,
                                        const SplitSpec& split, GmmStep step,
                                        const DesignOptions& opts = {}) {
  if (split.target.period <= layout.t0) {
    throw ValidationError("estimate_effects needs a posttreatment target; " +
                          to_string(split.target) + " is pretreatment");
  }
  EffectEstimates out;
  out.target = split.target;
  out.split = split;
  try {
    out.fit_treated = fit_group(
        build_design(data, layout, split, Group::treated, opts), step,
        Group::treated);
  } catch (const Error& e) {
    throw EstimationError(std::string("treated group: ") + e.what());
  }
  try {
    out.fit_control = fit_group(
        build_design(data, layout, split, Group::control, opts), step,
        Group::control);
  } catch (const Error& e) {
    throw EstimationError(std::string("control group: ") + e.what());
  }

  std::vector<int> everyone(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) everyone[static_cast<std::size_t>(i)] = i;
  const Eigen::MatrixXd z_all = build_regressor_rows(data, split, everyone);
  out.ite = z_all * (out.fit_treated->theta - out.fit_control->theta);
  out.ate = out.ite.mean();
  double att_sum = 0.0;
  for (int i : layout.treated_ids) att_sum += out.ite(i);
  out.att = att_sum / static_cast<double>(layout.n1());
  return out;
}

// Effects for the treated only, as observed outcome minus counterfactual
// prediction from the control-group fit. Works when the treated group is too
// small to estimate its own coefficient vector.
struct TreatedEffects {
  Eigen::VectorXd itt;  // aligned with treated_ids
  double att = 0.0;
  CellIndex target;
  std::vector<int> treated_ids;
};

inline TreatedEffects estimate_att_counterfactual(const PanelDataset& data,
                                                  const TreatmentLayout& layout,
                                                  const SplitSpec& split,
                                                  GmmStep step,
                                                  const DesignOptions& opts = {}) {
  if (split.target.period <= layout.t0) {
    throw ValidationError("counterfactual effects need a posttreatment target");
  }
  GmmFit fit;
  try {
    fit = fit_group(build_design(data, layout, split, Group::control, opts),
                    step, Group::control);
  } catch (const Error& e) {
    throw EstimationError(std::string("control group: ") + e.what());
  }
  const Eigen::MatrixXd z_treated =
      build_regressor_rows(data, split, layout.treated_ids);
  TreatedEffects out;
  out.target = split.target;
  out.treated_ids = layout.treated_ids;
  out.itt.resize(layout.n1());
  for (int j = 0; j < layout.n1(); ++j) {
    const int i = layout.treated_ids[static_cast<std::size_t>(j)];
    const double counterfactual = z_treated.row(j).dot(fit.theta);
    out.itt(j) =
        data.outcome(i, split.target.period, split.target.outcome) -
        counterfactual;
  }
  out.att = out.itt.mean();
  return out;
}

inline void write_effects_csv(const EffectEstimates& effects,
                              const PanelDataset& data,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << "id,tau_hat\n";
  for (int i = 0; i < data.n(); ++i) {
    out << csv_quote(data.id(i)) << ',' << format_double(effects.ite(i))
        << '\n';
  }
}

}  // namespace panelite

#endif  // PANELITE_GMM_HPP
