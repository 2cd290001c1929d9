#ifndef PANELITE_DESIGN_HPP
#define PANELITE_DESIGN_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <compare>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "panelite/errors.hpp"
#include "panelite/panel.hpp"
#include "panelite/rng.hpp"

namespace panelite {

/*
 * design.hpp
 * ----------
 * Given a split of the pretreatment outcome cells into regressors and
 * instruments, builds for a target cell (t, k) the per-group regressor and
 * instrument matrices. Column convention (fixed so serialized fits are
 * reproducible): intercept, target-period covariates, pretreatment covariates
 * by ascending period (for periods touched by the split), then outcome cells
 * ascending by (period, outcome).
 */

struct CellIndex {
  int period = 0;   // 1-based
  int outcome = 0;  // 1-based
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

inline std::string to_string(const CellIndex& c) {
  return std::to_string(c.period) + ":" + std::to_string(c.outcome);
}

struct SplitSpec {
  std::vector<CellIndex> regressor_cells;  // sorted, unique, pretreatment
  CellIndex target;
  bool include_intercept = true;

  // Normalizes cell order; rejects a target that is also a regressor.
  static SplitSpec make(std::vector<CellIndex> cells, CellIndex target,
                        bool intercept = true) {
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    if (cells.empty()) throw ValidationError("P >= 1 required");
    for (const auto& c : cells) {
      if (c == target) {
        throw ValidationError("target cell " + to_string(target) +
                              " cannot be a regressor");
      }
    }
    SplitSpec s;
    s.regressor_cells = std::move(cells);
    s.target = target;
    s.include_intercept = intercept;
    return s;
  }

  int p() const { return static_cast<int>(regressor_cells.size()); }

  nlohmann::json to_json() const {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : regressor_cells) {
      cells.push_back({c.period, c.outcome});
    }
    return {{"regressor_cells", cells},
            {"target", {target.period, target.outcome}},
            {"intercept", include_intercept}};
  }

  static SplitSpec from_json(const nlohmann::json& j) {
    std::vector<CellIndex> cells;
    for (const auto& c : j.at("regressor_cells")) {
      cells.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    }
    CellIndex target{j.at("target").at(0).get<int>(),
                     j.at("target").at(1).get<int>()};
    bool intercept = j.value("intercept", true);
    return make(std::move(cells), target, intercept);
  }

  friend bool operator==(const SplitSpec& a, const SplitSpec& b) {
    return a.regressor_cells == b.regressor_cells && a.target == b.target &&
           a.include_intercept == b.include_intercept;
  }
};

struct DesignOptions {
  // Drop instrument cells sharing the target's period (same-period shocks may
  // be cross-outcome correlated).
  bool exclude_same_period_instruments = false;
};

enum class Group { treated, control };

inline const char* to_string(Group g) {
  return g == Group::treated ? "treated" : "control";
}

struct DesignMatrices {
  Eigen::MatrixXd z;      // rows x Z
  Eigen::MatrixXd r_mat;  // rows x R
  Eigen::VectorXd y;      // target outcomes
  std::vector<int> rows;  // panel indices backing each row

  Eigen::Index z_dim() const { return z.cols(); }
  Eigen::Index r_dim() const { return r_mat.cols(); }
};

namespace detail {

inline void check_cell_range(const PanelDataset& data, const CellIndex& c) {
  if (c.period < 1 || c.period > data.periods() || c.outcome < 1 ||
      c.outcome > data.n_outcomes()) {
    throw ValidationError("cell " + to_string(c) + " outside panel extents");
  }
}

inline void check_split(const PanelDataset& data, const TreatmentLayout& layout,
                        const SplitSpec& split) {
  check_cell_range(data, split.target);
  for (const auto& c : split.regressor_cells) {
    check_cell_range(data, c);
    if (c.period > layout.t0) {
      throw ValidationError("regressor cell " + to_string(c) +
                            " is not pretreatment (T0 = " +
                            std::to_string(layout.t0) + ")");
    }
  }
}

// Periods contributing covariate blocks: the target period plus each distinct
// pretreatment period appearing in the split (deduplicated: a pretreatment
// target shares its period with regressor cells).
inline std::vector<int> covariate_periods(const SplitSpec& split) {
  std::set<int> pre;
  for (const auto& c : split.regressor_cells) pre.insert(c.period);
  std::vector<int> periods{split.target.period};
  for (int s : pre) {
    if (s != split.target.period) periods.push_back(s);
  }
  return periods;
}

struct CovariateColumn {
  int period = 0;
  int index = 0;  // 1-based covariate index
};

// Covariate columns in convention order, with exact duplicates collapsed:
// a time-constant covariate contributes one column, not one per period
// (duplicates would make the design rank-deficient). Uniqueness is judged
// on the full panel so every caller sees the same layout.
inline std::vector<CovariateColumn> covariate_columns(
    const PanelDataset& data, const SplitSpec& split) {
  std::vector<CovariateColumn> kept;
  for (int period : covariate_periods(split)) {
    for (int j = 1; j <= data.n_covariates(); ++j) {
      bool duplicate = false;
      for (const auto& prior : kept) {
        if (prior.index != j) continue;
        bool equal = true;
        for (int i = 0; i < data.n() && equal; ++i) {
          equal = data.covariate(i, period, j) ==
                  data.covariate(i, prior.period, j);
        }
        if (equal) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) kept.push_back({period, j});
    }
  }
  return kept;
}

inline std::vector<CellIndex> instrument_cells(const PanelDataset& data,
                                               const SplitSpec& split,
                                               const DesignOptions& opts) {
  std::set<CellIndex> regressors(split.regressor_cells.begin(),
                                 split.regressor_cells.end());
  std::vector<CellIndex> out;
  for (int t = 1; t <= data.periods(); ++t) {
    for (int k = 1; k <= data.n_outcomes(); ++k) {
      CellIndex c{t, k};
      if (c == split.target || regressors.count(c)) continue;
      if (opts.exclude_same_period_instruments &&
          c.period == split.target.period) {
        continue;
      }
      out.push_back(c);
    }
  }
  return out;
}

inline Eigen::MatrixXd stack_columns(const PanelDataset& data,
                                     const std::vector<int>& rows,
                                     const std::vector<CovariateColumn>& covs,
                                     const std::vector<CellIndex>& cells,
                                     bool intercept) {
  const Eigen::Index width = (intercept ? 1 : 0) +
                             static_cast<Eigen::Index>(covs.size()) +
                             static_cast<Eigen::Index>(cells.size());
  Eigen::MatrixXd m(rows.size(), width);
  for (std::size_t out = 0; out < rows.size(); ++out) {
    const int i = rows[out];
    Eigen::Index col = 0;
    if (intercept) m(static_cast<Eigen::Index>(out), col++) = 1.0;
    for (const auto& cv : covs) {
      m(static_cast<Eigen::Index>(out), col++) =
          data.covariate(i, cv.period, cv.index);
    }
    for (const auto& c : cells) {
      m(static_cast<Eigen::Index>(out), col++) =
          data.outcome(i, c.period, c.outcome);
    }
  }
  return m;
}

}  // namespace detail

// Regressor rows Z for an arbitrary set of individuals (used to evaluate
// fitted effects for everyone, not just the estimation group).
inline Eigen::MatrixXd build_regressor_rows(const PanelDataset& data,
                                            const SplitSpec& split,
                                            const std::vector<int>& rows) {
  return detail::stack_columns(data, rows,
                               detail::covariate_columns(data, split),
                               split.regressor_cells, split.include_intercept);
}

inline DesignMatrices build_design_rows(const PanelDataset& data,
                                        const TreatmentLayout& layout,
                                        const SplitSpec& split,
                                        std::vector<int> rows,
                                        const DesignOptions& opts = {}) {
  detail::check_split(data, layout, split);
  if (rows.empty()) throw ValidationError("empty estimation group");
  const auto covs = detail::covariate_columns(data, split);
  const auto instruments = detail::instrument_cells(data, split, opts);

  DesignMatrices d;
  d.z = detail::stack_columns(data, rows, covs, split.regressor_cells,
                              split.include_intercept);
  d.r_mat = detail::stack_columns(data, rows, covs, instruments,
                                  split.include_intercept);
  if (d.r_dim() < d.z_dim()) {
    throw ValidationError(
        "under-identified: add instruments or drop regressor cells (R = " +
        std::to_string(d.r_dim()) + " < Z = " + std::to_string(d.z_dim()) +
        ")");
  }
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t out = 0; out < rows.size(); ++out) {
    d.y(static_cast<Eigen::Index>(out)) =
        data.outcome(rows[out], split.target.period, split.target.outcome);
  }
  d.rows = std::move(rows);
  return d;
}

inline DesignMatrices build_design(const PanelDataset& data,
                                   const TreatmentLayout& layout,
                                   const SplitSpec& split, Group group,
                                   const DesignOptions& opts = {}) {
  const auto& rows = group == Group::treated ? layout.treated_ids
                                             : layout.control_ids;
  return build_design_rows(data, layout, split, rows, opts);
}

namespace detail {

// Unranked k-subsets of {0..n-1} in lexicographic order.
inline std::vector<std::vector<int>> all_subsets(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (;;) {
    out.push_back(idx);
    int pos = k - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (int j = pos + 1; j < k; ++j) {
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return out;
}

inline double binomial_capped(int n, int k, double cap) {
  double v = 1.0;
  for (int i = 1; i <= k; ++i) {
    v *= static_cast<double>(n - k + i) / static_cast<double>(i);
    if (v > cap) return cap;
  }
  return v;
}

}  // namespace detail

// All (or max_splits uniformly sampled distinct) splits that place p
// pretreatment cells on the regressor side for the given target. Returned in
// lexicographic cell order so downstream reductions are deterministic.
inline std::vector<SplitSpec> enumerate_splits(const PanelDataset& data,
                                               const TreatmentLayout& layout,
                                               CellIndex target, int p,
                                               int max_splits, SplitRng& rng,
                                               const DesignOptions& opts = {},
                                               bool intercept = true) {
  detail::check_cell_range(data, target);
  std::vector<CellIndex> pool;
  for (int t = 1; t <= layout.t0; ++t) {
    for (int k = 1; k <= data.n_outcomes(); ++k) {
      CellIndex c{t, k};
      if (c != target) pool.push_back(c);
    }
  }
  const int n = static_cast<int>(pool.size());
  if (p < 1) throw ValidationError("P >= 1 required");
  if (p > n) {
    throw ValidationError("P = " + std::to_string(p) + " exceeds the " +
                          std::to_string(n) + " available pretreatment cells");
  }
  if (max_splits < 1) throw ValidationError("max_splits >= 1 required");

  const double total = detail::binomial_capped(n, p, 1e18);
  std::vector<std::vector<int>> chosen;
  constexpr double kEnumerationCap = 1 << 20;
  if (total <= kEnumerationCap) {
    auto all = detail::all_subsets(n, p);
    if (static_cast<int>(all.size()) <= max_splits) {
      chosen = std::move(all);
    } else {
      // Partial Fisher-Yates over the exhaustive list: exact uniform sampling
      // without replacement.
      for (int i = 0; i < max_splits; ++i) {
        const auto j = static_cast<std::size_t>(
            rng.next_below(all.size() - static_cast<std::size_t>(i))) +
            static_cast<std::size_t>(i);
        std::swap(all[static_cast<std::size_t>(i)], all[j]);
        chosen.push_back(all[static_cast<std::size_t>(i)]);
      }
    }
  } else {
    // Too many subsets to enumerate; rejection-sample distinct ones.
    std::set<std::vector<int>> seen;
    std::vector<int> scratch(static_cast<std::size_t>(n));
    while (static_cast<int>(seen.size()) < max_splits) {
      for (int i = 0; i < n; ++i) scratch[static_cast<std::size_t>(i)] = i;
      std::vector<int> pick;
      for (int i = 0; i < p; ++i) {
        const auto j = static_cast<std::size_t>(
            rng.next_below(static_cast<std::uint64_t>(n - i))) +
            static_cast<std::size_t>(i);
        std::swap(scratch[static_cast<std::size_t>(i)], scratch[j]);
        pick.push_back(scratch[static_cast<std::size_t>(i)]);
      }
      std::sort(pick.begin(), pick.end());
      seen.insert(std::move(pick));
    }
    chosen.assign(seen.begin(), seen.end());
  }
  std::sort(chosen.begin(), chosen.end());

  std::vector<SplitSpec> out;
  for (const auto& subset : chosen) {
    std::vector<CellIndex> cells;
    cells.reserve(subset.size());
    for (int idx : subset) cells.push_back(pool[static_cast<std::size_t>(idx)]);
    SplitSpec split = SplitSpec::make(std::move(cells), target, intercept);
    // Keep only splits meeting the order condition.
    const int n_instruments =
        static_cast<int>(detail::instrument_cells(data, split, opts).size());
    const int n_covs =
        static_cast<int>(detail::covariate_columns(data, split).size());
    const int z_dim = (intercept ? 1 : 0) + n_covs + split.p();
    const int r_dim = (intercept ? 1 : 0) + n_covs + n_instruments;
    if (r_dim >= z_dim) out.push_back(std::move(split));
  }
  if (out.empty()) {
    throw ValidationError("no split of size " + std::to_string(p) +
                          " satisfies the order condition R >= Z");
  }
  return out;
}

}  // namespace panelite

#endif  // PANELITE_DESIGN_HPP
