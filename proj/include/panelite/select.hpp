#ifndef PANELITE_SELECT_HPP
#define PANELITE_SELECT_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "panelite/design.hpp"
#include "panelite/errors.hpp"
#include "panelite/gmm.hpp"
#include "panelite/panel.hpp"
#include "panelite/rng.hpp"

namespace panelite {

/*
 * select.hpp
 * ----------
 * Chooses how many (and which) pretreatment cells serve as regressors, by
 * the mean squared leave-one-out prediction error. Each left-out individual
 * is predicted by the coefficient vector of its own treatment group refit
 * without it; errors from both groups pool into one criterion. Leave-one-out
 * sets are drawn once per selection run so every candidate split is scored
 * on the same individuals.
 */

enum class SelectionMode { best_set, averaging };

// Which groups contribute leave-one-out errors. control_only supports
// counterfactual (ATT) estimation with treated groups too small to refit.
enum class LooScope { both_groups, control_only };

namespace detail {

// Left-out panel indices per group. subsample == 0 means everyone.
inline std::vector<int> draw_loo_set(const std::vector<int>& group,
                                     int subsample, SplitRng& rng) {
  if (subsample == 0 || subsample >= static_cast<int>(group.size())) {
    return group;
  }
  if (subsample < 2) {
    throw ValidationError("LOO subsample must be >= 2 per group (or 0 for all)");
  }
  std::vector<int> pool = group;
  std::vector<int> out;
  for (int i = 0; i < subsample; ++i) {
    const auto j = static_cast<std::size_t>(rng.next_below(
        pool.size() - static_cast<std::size_t>(i))) + static_cast<std::size_t>(i);
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    out.push_back(pool[static_cast<std::size_t>(i)]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct LooPredictions {
  // Aligned vectors: panel index, observed target, predicted target.
  std::vector<int> individual;
  std::vector<double> observed;
  std::vector<double> predicted;
  int refits = 0;
};

// Refits the group's theta once per left-out member and predicts its target.
inline void loo_predict_group(const PanelDataset& data,
                              const TreatmentLayout& layout,
                              const SplitSpec& split, Group group,
                              GmmStep step, const std::vector<int>& left_out,
                              const DesignOptions& opts, LooPredictions& out) {
  const DesignMatrices full = build_design(data, layout, split, group, opts);
  const Eigen::Index n_rows = full.z.rows();
  if (n_rows - 1 < full.z_dim()) {
    throw ValidationError(std::string(to_string(group)) +
                          " group too small to drop one individual");
  }
  DesignMatrices reduced;
  reduced.z.resize(n_rows - 1, full.z.cols());
  reduced.r_mat.resize(n_rows - 1, full.r_mat.cols());
  reduced.y.resize(n_rows - 1);
  for (int target_row : left_out) {
    // Locate the left-out individual's row in the group design.
    const auto pos = std::find(full.rows.begin(), full.rows.end(), target_row);
    if (pos == full.rows.end()) continue;
    const Eigen::Index drop = pos - full.rows.begin();
    Eigen::Index w = 0;
    for (Eigen::Index row = 0; row < n_rows; ++row) {
      if (row == drop) continue;
      reduced.z.row(w) = full.z.row(row);
      reduced.r_mat.row(w) = full.r_mat.row(row);
      reduced.y(w) = full.y(row);
      ++w;
    }
    const GmmFit fit = fit_group(reduced, step, group);
    out.individual.push_back(target_row);
    out.observed.push_back(full.y(drop));
    out.predicted.push_back(full.z.row(drop).dot(fit.theta));
    ++out.refits;
  }
}

inline LooPredictions loo_predictions(const PanelDataset& data,
                                      const TreatmentLayout& layout,
                                      const SplitSpec& split, GmmStep step,
                                      const std::vector<int>& treated_left_out,
                                      const std::vector<int>& control_left_out,
                                      const DesignOptions& opts,
                                      LooScope scope) {
  LooPredictions preds;
  if (scope == LooScope::both_groups) {
    loo_predict_group(data, layout, split, Group::treated, step,
                      treated_left_out, opts, preds);
  }
  loo_predict_group(data, layout, split, Group::control, step,
                    control_left_out, opts, preds);
  if (preds.individual.empty()) {
    throw ValidationError("no leave-one-out predictions were produced");
  }
  return preds;
}

}  // namespace detail

struct LooResult {
  double mse = 0.0;
  int treated_refits = 0;
  int control_refits = 0;
};

inline LooResult loo_mse_detail(const PanelDataset& data,
                                const TreatmentLayout& layout,
                                const SplitSpec& split, GmmStep step,
                                int subsample, SplitRng& rng,
                                const DesignOptions& opts = {},
                                LooScope scope = LooScope::both_groups) {
  SplitRng treated_rng = rng.split(1);
  SplitRng control_rng = rng.split(2);
  const auto treated =
      detail::draw_loo_set(layout.treated_ids, subsample, treated_rng);
  const auto control =
      detail::draw_loo_set(layout.control_ids, subsample, control_rng);
  auto preds = detail::loo_predictions(data, layout, split, step, treated,
                                       control, opts, scope);
  LooResult out;
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.observed.size(); ++i) {
    const double err = preds.observed[i] - preds.predicted[i];
    sum += err * err;
  }
  out.mse = sum / static_cast<double>(preds.observed.size());
  const int n_treated = scope == LooScope::both_groups
                            ? static_cast<int>(treated.size())
                            : 0;
  out.treated_refits = n_treated;
  out.control_refits = preds.refits - n_treated;
  return out;
}

inline double loo_mse(const PanelDataset& data, const TreatmentLayout& layout,
                      const SplitSpec& split, GmmStep step, int subsample,
                      SplitRng& rng, const DesignOptions& opts = {},
                      LooScope scope = LooScope::both_groups) {
  return loo_mse_detail(data, layout, split, step, subsample, rng, opts, scope)
      .mse;
}

struct PerPReport {
  std::vector<SplitSpec> splits;
  std::vector<double> split_mse;
  double averaged_mse = std::numeric_limits<double>::quiet_NaN();
  int best_index = 0;  // split with the smallest individual MSE
};

struct SelectionReport {
  std::map<int, PerPReport> per_p;
  int best_p = 0;
  SplitSpec best_split;
  SelectionMode mode = SelectionMode::best_set;
  double best_criterion = std::numeric_limits<double>::infinity();
  int loo_treated = 0;
  int loo_control = 0;

  nlohmann::json to_json() const {
    nlohmann::json per;
    for (const auto& [p, rep] : per_p) {
      nlohmann::json splits = nlohmann::json::array();
      for (const auto& s : rep.splits) splits.push_back(s.to_json());
      per[std::to_string(p)] = {{"splits", std::move(splits)},
                                {"split_mse", rep.split_mse},
                                {"averaged_mse", rep.averaged_mse},
                                {"best_index", rep.best_index}};
    }
    return {{"per_p", std::move(per)},
            {"best_p", best_p},
            {"best_split", best_split.to_json()},
            {"mode", mode == SelectionMode::best_set ? "best-set" : "averaging"},
            {"best_criterion", best_criterion},
            {"loo_treated", loo_treated},
            {"loo_control", loo_control}};
  }
};

// Scans p over [p_min, p_max]; infeasible sizes are skipped. best-set picks
// the (p, split) with the smallest LOO MSE; averaging scores each p by the
// MSE of the across-split averaged prediction. default subsample: 100 per
// group (capped at the group size).
inline SelectionReport select_model(const PanelDataset& data,
                                    const TreatmentLayout& layout,
                                    CellIndex target, int p_min, int p_max,
                                    int max_splits, SelectionMode mode,
                                    GmmStep step, int subsample,
                                    SplitRng& rng,
                                    const DesignOptions& opts = {},
                                    LooScope scope = LooScope::both_groups) {
  if (p_min < 1 || p_max < p_min) {
    throw ValidationError("invalid p range [" + std::to_string(p_min) + ", " +
                          std::to_string(p_max) + "]");
  }
  SplitRng loo_rng = rng.split(0xA);
  SplitRng treated_rng = loo_rng.split(1);
  SplitRng control_rng = loo_rng.split(2);
  const auto treated =
      detail::draw_loo_set(layout.treated_ids, subsample, treated_rng);
  const auto control =
      detail::draw_loo_set(layout.control_ids, subsample, control_rng);

  SelectionReport report;
  report.mode = mode;
  report.loo_treated =
      scope == LooScope::both_groups ? static_cast<int>(treated.size()) : 0;
  report.loo_control = static_cast<int>(control.size());

  for (int p = p_min; p <= p_max; ++p) {
    std::vector<SplitSpec> splits;
    try {
      SplitRng enum_rng = rng.split(0x100 + static_cast<std::uint64_t>(p));
      splits = enumerate_splits(data, layout, target, p, max_splits, enum_rng,
                                opts);
    } catch (const ValidationError&) {
      continue;  // no feasible split at this size
    }

    PerPReport per;
    per.splits = splits;
    // predictions[s] aligned across splits: same left-out individuals.
    std::vector<detail::LooPredictions> predictions;
    predictions.reserve(splits.size());
    for (const auto& split : splits) {
      predictions.push_back(detail::loo_predictions(
          data, layout, split, step, treated, control, opts, scope));
    }
    double best_split_mse = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < splits.size(); ++s) {
      double sum = 0.0;
      const auto& pr = predictions[s];
      for (std::size_t i = 0; i < pr.observed.size(); ++i) {
        const double err = pr.observed[i] - pr.predicted[i];
        sum += err * err;
      }
      const double mse = sum / static_cast<double>(pr.observed.size());
      per.split_mse.push_back(mse);
      if (mse < best_split_mse) {
        best_split_mse = mse;
        per.best_index = static_cast<int>(s);
      }
    }
    // Averaged prediction across this p's splits, then one pooled MSE.
    {
      const auto& first = predictions.front();
      double sum = 0.0;
      for (std::size_t i = 0; i < first.observed.size(); ++i) {
        double avg = 0.0;
        for (const auto& pr : predictions) avg += pr.predicted[i];
        avg /= static_cast<double>(predictions.size());
        const double err = first.observed[i] - avg;
        sum += err * err;
      }
      per.averaged_mse = sum / static_cast<double>(first.observed.size());
    }

    const double criterion = mode == SelectionMode::best_set
                                 ? best_split_mse
                                 : per.averaged_mse;
    if (criterion < report.best_criterion) {
      report.best_criterion = criterion;
      report.best_p = p;
      report.best_split =
          per.splits[static_cast<std::size_t>(per.best_index)];
    }
    report.per_p.emplace(p, std::move(per));
  }

  if (report.per_p.empty()) {
    throw ValidationError("no feasible split for any p in [" +
                          std::to_string(p_min) + ", " +
                          std::to_string(p_max) + "]");
  }
  return report;
}

// Equal-weight model average over an explicit split list.
inline EffectEstimates estimate_averaged(const PanelDataset& data,
                                         const TreatmentLayout& layout,
                                         const std::vector<SplitSpec>& splits,
                                         GmmStep step,
                                         const DesignOptions& opts = {}) {
  if (splits.empty()) throw ValidationError("no splits to average over");
  EffectEstimates out;
  out.target = splits.front().target;
  out.split = splits.front();
  out.splits_used = splits;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(data.n());
  for (const auto& split : splits) {
    EffectEstimates one = estimate_effects(data, layout, split, step, opts);
    out.per_split_ite.push_back(one.ite);
    sum += one.ite;
  }
  out.ite = sum / static_cast<double>(splits.size());
  out.ate = out.ite.mean();
  double att_sum = 0.0;
  for (int i : layout.treated_ids) att_sum += out.ite(i);
  out.att = att_sum / static_cast<double>(layout.n1());
  return out;
}

// Average over all evaluated splits of size p for the target.
inline EffectEstimates estimate_averaged(const PanelDataset& data,
                                         const TreatmentLayout& layout,
                                         CellIndex target, int p,
                                         int max_splits, GmmStep step,
                                         SplitRng& rng,
                                         const DesignOptions& opts = {}) {
  SplitRng enum_rng = rng.split(0x100 + static_cast<std::uint64_t>(p));
  const auto splits =
      enumerate_splits(data, layout, target, p, max_splits, enum_rng, opts);
  return estimate_averaged(data, layout, splits, step, opts);
}

}  // namespace panelite

#endif  // PANELITE_SELECT_HPP
