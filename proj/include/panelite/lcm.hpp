#ifndef PANELITE_LCM_HPP
#define PANELITE_LCM_HPP

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "panelite/design.hpp"
#include "panelite/errors.hpp"
#include "panelite/linalg.hpp"
#include "panelite/panel.hpp"

namespace panelite {

/*
 * lcm.hpp
 * -------
 * OLS comparator under a linear conditional mean assumption: per-group least
 * squares of the target on the same regressor vector the GMM estimator uses
 * (instruments ignored). The contrast estimates conditional average rather
 * than individual treatment effects.
 */

struct LcmFit {
  Eigen::VectorXd theta_star_treated;
  Eigen::VectorXd theta_star_control;
  Eigen::VectorXd cate;  // per individual, panel order
  double ate = 0.0;
  double att = 0.0;
  CellIndex target;
  SplitSpec split;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["estimator"] = "lcm";
    j["target"] = {target.period, target.outcome};
    j["ate"] = ate;
    j["att"] = att;
    j["cate"] = std::vector<double>(cate.begin(), cate.end());
    j["split"] = split.to_json();
    return j;
  }
};

inline LcmFit estimate_lcm(const PanelDataset& data,
                           const TreatmentLayout& layout,
                           const SplitSpec& split,
                           const DesignOptions& opts = {}) {
  if (split.target.period <= layout.t0) {
    throw ValidationError("estimate_lcm needs a posttreatment target");
  }
  LcmFit out;
  out.target = split.target;
  out.split = split;

  auto ols_group = [&](Group group) {
    const DesignMatrices d = build_design(data, layout, split, group, opts);
    if (d.z.rows() < d.z_dim()) {
      throw ValidationError(std::string(to_string(group)) +
                            " group smaller than the regressor count");
    }
    return solve_least_squares(d.z, d.y,
                               std::string("Z'Z (") + to_string(group) + ")")
        .coef;
  };
  out.theta_star_treated = ols_group(Group::treated);
  out.theta_star_control = ols_group(Group::control);

  std::vector<int> everyone(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) everyone[static_cast<std::size_t>(i)] = i;
  const Eigen::MatrixXd z_all = build_regressor_rows(data, split, everyone);
  out.cate = z_all * (out.theta_star_treated - out.theta_star_control);
  out.ate = out.cate.mean();
  double att_sum = 0.0;
  for (int i : layout.treated_ids) att_sum += out.cate(i);
  out.att = att_sum / static_cast<double>(layout.n1());
  return out;
}

}  // namespace panelite

#endif  // PANELITE_LCM_HPP
