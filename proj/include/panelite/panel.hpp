#ifndef PANELITE_PANEL_HPP
#define PANELITE_PANEL_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "panelite/csv.hpp"
#include "panelite/errors.hpp"

namespace panelite {

/*
 * panel.hpp
 * ---------
 * Balanced panel of K related outcomes, r covariates and a binary absorbing
 * treatment, observed for N individuals over T periods. Loaded from long
 * format CSV through a column-role schema. Periods and outcomes are 1-based
 * in the public interface; internal storage is dense and 0-based.
 */

// Maps CSV column names onto roles.
struct Schema {
  std::string id;
  std::string period;
  std::string treatment;
  std::vector<std::string> outcomes;
  std::vector<std::string> covariates;

  static Schema from_json(const nlohmann::json& j) {
    Schema s;
    for (const char* role : {"id", "period", "treatment", "outcomes"}) {
      if (!j.contains(role)) {
        throw ValidationError(std::string("schema missing role '") + role +
                              "'");
      }
    }
    s.id = j.at("id").get<std::string>();
    s.period = j.at("period").get<std::string>();
    s.treatment = j.at("treatment").get<std::string>();
    s.outcomes = j.at("outcomes").get<std::vector<std::string>>();
    if (j.contains("covariates")) {
      s.covariates = j.at("covariates").get<std::vector<std::string>>();
    }
    if (s.outcomes.empty()) {
      throw ValidationError("schema must name at least one outcome column");
    }
    return s;
  }

  static Schema from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open schema file: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }

  nlohmann::json to_json() const {
    return {{"id", id},
            {"period", period},
            {"treatment", treatment},
            {"outcomes", outcomes},
            {"covariates", covariates}};
  }
};

class PanelDataset {
 public:
  // Tensors are row-per-individual with period-major columns:
  // outcomes N x (T*K), covariates N x (T*r), treatment N x T.
  PanelDataset(std::vector<std::string> ids, int n_periods, int n_outcomes,
               int n_covariates, Eigen::MatrixXd outcomes,
               Eigen::MatrixXd covariates,
               Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>
                   treatment)
      : ids_(std::move(ids)),
        t_(n_periods),
        k_(n_outcomes),
        r_(n_covariates),
        outcomes_(std::move(outcomes)),
        covariates_(std::move(covariates)),
        treatment_(std::move(treatment)) {
    validate();
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      index_by_id_[ids_[i]] = static_cast<int>(i);
    }
  }

  int n() const { return static_cast<int>(ids_.size()); }
  int periods() const { return t_; }
  int n_outcomes() const { return k_; }
  int n_covariates() const { return r_; }
  int cells() const { return t_ * k_; }

  // 1-based period/outcome/covariate indices.
  double outcome(int i, int t, int k) const {
    return outcomes_(i, cell_col(t, k));
  }
  double covariate(int i, int t, int j) const {
    return covariates_(i, (t - 1) * r_ + (j - 1));
  }
  bool treated_at(int i, int t) const { return treatment_(i, t - 1) != 0; }

  int cell_col(int t, int k) const { return (t - 1) * k_ + (k - 1); }

  const std::string& id(int i) const { return ids_[static_cast<std::size_t>(i)]; }
  const std::vector<std::string>& ids() const { return ids_; }
  int index_of(const std::string& id) const {
    auto it = index_by_id_.find(id);
    return it == index_by_id_.end() ? -1 : it->second;
  }

  const Eigen::MatrixXd& outcome_matrix() const { return outcomes_; }
  const Eigen::MatrixXd& covariate_matrix() const { return covariates_; }
  const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>&
  treatment_matrix() const {
    return treatment_;
  }

  // Same panel with outcomes replaced (bootstrap resamples).
  PanelDataset with_outcomes(Eigen::MatrixXd new_outcomes) const {
    return PanelDataset(ids_, t_, k_, r_, std::move(new_outcomes), covariates_,
                        treatment_);
  }

  // Sub-panel restricted to the given individual rows (order preserved).
  PanelDataset subset(const std::vector<int>& rows) const {
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    Eigen::MatrixXd y(rows.size(), outcomes_.cols());
    Eigen::MatrixXd x(rows.size(), covariates_.cols());
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> d(
        rows.size(), treatment_.cols());
    for (std::size_t out = 0; out < rows.size(); ++out) {
      ids.push_back(ids_[static_cast<std::size_t>(rows[out])]);
      y.row(static_cast<Eigen::Index>(out)) = outcomes_.row(rows[out]);
      x.row(static_cast<Eigen::Index>(out)) = covariates_.row(rows[out]);
      d.row(static_cast<Eigen::Index>(out)) = treatment_.row(rows[out]);
    }
    return PanelDataset(std::move(ids), t_, k_, r_, std::move(y), std::move(x),
                        std::move(d));
  }

 private:
  void validate() const {
    const Eigen::Index n = static_cast<Eigen::Index>(ids_.size());
    if (n == 0) throw ValidationError("panel has no individuals");
    if (t_ < 2) throw ValidationError("panel needs at least 2 periods");
    if (k_ < 1) throw ValidationError("panel needs at least 1 outcome");
    if (r_ < 0) throw ValidationError("negative covariate count");
    if (outcomes_.rows() != n || outcomes_.cols() != t_ * k_ ||
        covariates_.rows() != n ||
        covariates_.cols() != static_cast<Eigen::Index>(t_) * r_ ||
        treatment_.rows() != n || treatment_.cols() != t_) {
      throw ValidationError("tensor extents inconsistent with N, T, K, r");
    }
    if (!outcomes_.allFinite() || !covariates_.allFinite()) {
      throw ValidationError("panel contains non-finite values");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index t = 1; t < t_; ++t) {
        if (treatment_(i, t - 1) != 0 && treatment_(i, t) == 0) {
          throw ValidationError("non-absorbing treatment for id " +
                                ids_[static_cast<std::size_t>(i)]);
        }
      }
    }
  }

  std::vector<std::string> ids_;
  int t_;
  int k_;
  int r_;
  Eigen::MatrixXd outcomes_;
  Eigen::MatrixXd covariates_;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> treatment_;
  std::unordered_map<std::string, int> index_by_id_;
};

struct TreatmentLayout {
  int t0 = 0;                      // last period with everyone untreated
  std::vector<int> treated_ids;    // internal indices, ascending
  std::vector<int> control_ids;

  int n1() const { return static_cast<int>(treated_ids.size()); }
  int n0() const { return static_cast<int>(control_ids.size()); }
};

inline TreatmentLayout derive_layout(const PanelDataset& data) {
  TreatmentLayout layout;
  const int t_max = data.periods();
  for (int i = 0; i < data.n(); ++i) {
    if (data.treated_at(i, t_max)) {
      layout.treated_ids.push_back(i);
    } else {
      layout.control_ids.push_back(i);
    }
  }
  if (layout.treated_ids.empty()) {
    throw ValidationError("no treated individuals");
  }
  if (layout.control_ids.empty()) {
    throw ValidationError("no control individuals");
  }
  // Common adoption period: every treated individual switches at T0+1.
  int adoption = -1;
  for (int i : layout.treated_ids) {
    int first_treated = t_max;
    for (int t = 1; t <= t_max; ++t) {
      if (data.treated_at(i, t)) {
        first_treated = t;
        break;
      }
    }
    if (adoption == -1) {
      adoption = first_treated;
    } else if (adoption != first_treated) {
      throw ValidationError("staggered adoption unsupported");
    }
  }
  layout.t0 = adoption - 1;
  if (layout.t0 < 1) {
    throw ValidationError("no pretreatment period: treatment starts at period 1");
  }
  return layout;
}

namespace detail {

inline double parse_cell(const std::string& raw, const std::string& id,
                         const std::string& period,
                         const std::string& column) {
  double value = 0.0;
  if (!parse_double(raw, value)) {
    throw ValidationError("missing or non-numeric cell (id " + id +
                          ", period " + period + ", column " + column + ")");
  }
  return value;
}

}  // namespace detail

// Long-format CSV loader. Individuals are re-indexed contiguously in order of
// first appearance; periods are sorted ascending and relabelled 1..T.
inline PanelDataset load_panel(const std::string& path, const Schema& schema) {
  CsvTable table = read_csv(path);
  const int id_col = table.require_column(schema.id, path);
  const int period_col = table.require_column(schema.period, path);
  const int treat_col = table.require_column(schema.treatment, path);
  std::vector<int> outcome_cols, covariate_cols;
  for (const auto& name : schema.outcomes) {
    outcome_cols.push_back(table.require_column(name, path));
  }
  for (const auto& name : schema.covariates) {
    covariate_cols.push_back(table.require_column(name, path));
  }

  // Collect distinct ids (order of appearance) and periods (sorted).
  std::vector<std::string> ids;
  std::unordered_map<std::string, int> id_index;
  std::map<double, int> period_index;  // sorted by period value
  for (const auto& row : table.rows) {
    const std::string& id = row[static_cast<std::size_t>(id_col)];
    if (id_index.emplace(id, static_cast<int>(ids.size())).second) {
      ids.push_back(id);
    }
    double p = detail::parse_cell(row[static_cast<std::size_t>(period_col)],
                                  id, "?", schema.period);
    period_index.emplace(p, 0);
  }
  int next = 1;
  for (auto& [value, idx] : period_index) idx = next++;

  const int n = static_cast<int>(ids.size());
  const int t = static_cast<int>(period_index.size());
  const int k = static_cast<int>(outcome_cols.size());
  const int r = static_cast<int>(covariate_cols.size());
  if (t < 2) throw ValidationError("panel needs at least 2 periods: " + path);

  Eigen::MatrixXd outcomes(n, t * k);
  Eigen::MatrixXd covariates(n, t * r);
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> treatment(n, t);
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, t);

  for (const auto& row : table.rows) {
    const std::string& id = row[static_cast<std::size_t>(id_col)];
    const int i = id_index.at(id);
    double p_raw = detail::parse_cell(row[static_cast<std::size_t>(period_col)],
                                      id, "?", schema.period);
    const int t1 = period_index.at(p_raw);  // 1-based
    const std::string period_label =
        row[static_cast<std::size_t>(period_col)];
    if (seen(i, t1 - 1)) {
      throw ValidationError("duplicate row for id " + id + ", period " +
                            period_label);
    }
    seen(i, t1 - 1) = 1;
    double d = detail::parse_cell(row[static_cast<std::size_t>(treat_col)], id,
                                  period_label, schema.treatment);
    if (d != 0.0 && d != 1.0) {
      throw ValidationError("treatment must be 0 or 1 (id " + id +
                            ", period " + period_label + ")");
    }
    treatment(i, t1 - 1) = static_cast<std::uint8_t>(d);
    for (int q = 0; q < k; ++q) {
      outcomes(i, (t1 - 1) * k + q) = detail::parse_cell(
          row[static_cast<std::size_t>(outcome_cols[q])], id, period_label,
          schema.outcomes[static_cast<std::size_t>(q)]);
    }
    for (int j = 0; j < r; ++j) {
      covariates(i, (t1 - 1) * r + j) = detail::parse_cell(
          row[static_cast<std::size_t>(covariate_cols[j])], id, period_label,
          schema.covariates[static_cast<std::size_t>(j)]);
    }
  }

  for (int i = 0; i < n; ++i) {
    for (int t1 = 0; t1 < t; ++t1) {
      if (!seen(i, t1)) {
        throw ValidationError("ragged panel: id " + ids[static_cast<std::size_t>(i)]);
      }
    }
  }

  return PanelDataset(std::move(ids), t, k, r, std::move(outcomes),
                      std::move(covariates), std::move(treatment));
}

inline void write_panel(const PanelDataset& data, const std::string& path,
                        const Schema& schema) {
  if (static_cast<int>(schema.outcomes.size()) != data.n_outcomes() ||
      static_cast<int>(schema.covariates.size()) != data.n_covariates()) {
    throw ValidationError("schema shape does not match panel");
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << csv_quote(schema.id) << ',' << csv_quote(schema.period) << ','
      << csv_quote(schema.treatment);
  for (const auto& name : schema.outcomes) out << ',' << csv_quote(name);
  for (const auto& name : schema.covariates) out << ',' << csv_quote(name);
  out << '\n';
  for (int i = 0; i < data.n(); ++i) {
    for (int t = 1; t <= data.periods(); ++t) {
      out << csv_quote(data.id(i)) << ',' << t << ','
          << (data.treated_at(i, t) ? 1 : 0);
      for (int k = 1; k <= data.n_outcomes(); ++k) {
        out << ',' << format_double(data.outcome(i, t, k));
      }
      for (int j = 1; j <= data.n_covariates(); ++j) {
        out << ',' << format_double(data.covariate(i, t, j));
      }
      out << '\n';
    }
  }
}

}  // namespace panelite

#endif  // PANELITE_PANEL_HPP
