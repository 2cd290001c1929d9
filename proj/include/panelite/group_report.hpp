#ifndef PANELITE_GROUP_REPORT_HPP
#define PANELITE_GROUP_REPORT_HPP

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panelite/bootstrap.hpp"
#include "panelite/csv.hpp"
#include "panelite/errors.hpp"
#include "panelite/stats.hpp"

namespace panelite {

/*
 * group_report.hpp
 * ----------------
 * Partition individuals by the sign of their significant effects, then
 * compare characteristic means across groups: for each characteristic the
 * mean in the none / negative / positive groups, the differences against the
 * none group, and Welch two-sample t-test stars at the 10/5/1% levels.
 */

struct GroupColumn {
  double mean = 0.0;
  std::optional<double> difference;  // vs the none group
  std::string stars;
};

struct GroupReportRow {
  std::string characteristic;
  GroupColumn none;
  GroupColumn negative;
  GroupColumn positive;
};

struct GroupReport {
  std::size_t n_none = 0;
  std::size_t n_negative = 0;
  std::size_t n_positive = 0;
  std::vector<GroupReportRow> rows;

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << "characteristic,mean_none,mean_negative,diff_negative,"
           "stars_negative,mean_positive,diff_positive,stars_positive\n";
    auto opt = [](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string();
    };
    for (const auto& row : rows) {
      out << csv_quote(row.characteristic) << ','
          << format_double(row.none.mean) << ','
          << (n_negative ? format_double(row.negative.mean) : std::string())
          << ',' << opt(row.negative.difference) << ',' << row.negative.stars
          << ','
          << (n_positive ? format_double(row.positive.mean) : std::string())
          << ',' << opt(row.positive.difference) << ',' << row.positive.stars
          << '\n';
    }
    out << "N," << n_none << ',' << (n_negative ? std::to_string(n_negative) : "")
        << ",,," << (n_positive ? std::to_string(n_positive) : "") << ",,\n";
  }

  std::string to_markdown() const {
    auto num = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f", v);
      return std::string(buf);
    };
    std::string md =
        "| characteristic | same | fewer | difference | more | difference "
        "|\n|---|---|---|---|---|---|\n";
    for (const auto& row : rows) {
      md += "| " + row.characteristic + " | " + num(row.none.mean) + " | ";
      md += n_negative ? num(row.negative.mean) : std::string("-");
      md += " | ";
      md += row.negative.difference
                ? num(*row.negative.difference) + row.negative.stars
                : std::string("-");
      md += " | ";
      md += n_positive ? num(row.positive.mean) : std::string("-");
      md += " | ";
      md += row.positive.difference
                ? num(*row.positive.difference) + row.positive.stars
                : std::string("-");
      md += " |\n";
    }
    md += "| N | " + std::to_string(n_none) + " | " +
          (n_negative ? std::to_string(n_negative) : std::string("-")) +
          " |  | " +
          (n_positive ? std::to_string(n_positive) : std::string("-")) +
          " |  |\n";
    return md;
  }
};

struct EffectRecord {
  std::string id;
  Significance significance = Significance::none;
};

// Parses an effects CSV written by the bootstrap export (id + significance,
// or id + ci_lo/ci_hi from which labels are rebuilt at the given alpha-free
// rule CI-excludes-zero).
inline std::vector<EffectRecord> read_effect_records(const std::string& path) {
  CsvTable table = read_csv(path);
  const int id_col = table.require_column("id", path);
  const int sig_col = table.column("significance");
  const int lo_col = table.column("ci_lo");
  const int hi_col = table.column("ci_hi");
  if (sig_col < 0 && (lo_col < 0 || hi_col < 0)) {
    throw ValidationError(
        "effects file needs a significance column or ci_lo/ci_hi columns: " +
        path);
  }
  std::vector<EffectRecord> out;
  for (const auto& row : table.rows) {
    EffectRecord rec;
    rec.id = row[static_cast<std::size_t>(id_col)];
    if (sig_col >= 0) {
      const std::string& s = row[static_cast<std::size_t>(sig_col)];
      if (s == "negative") rec.significance = Significance::negative;
      else if (s == "positive") rec.significance = Significance::positive;
      else if (s == "none") rec.significance = Significance::none;
      else throw ValidationError("unknown significance label '" + s + "'");
    } else {
      double lo = 0.0, hi = 0.0;
      if (!parse_double(row[static_cast<std::size_t>(lo_col)], lo) ||
          !parse_double(row[static_cast<std::size_t>(hi_col)], hi)) {
        throw ValidationError("non-numeric interval for id " + rec.id);
      }
      if (hi < 0.0) rec.significance = Significance::negative;
      else if (lo > 0.0) rec.significance = Significance::positive;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

// Characteristics in wide CSV: one row per id, numeric columns.
inline GroupReport make_group_report(const std::vector<EffectRecord>& effects,
                                     const CsvTable& characteristics,
                                     const std::string& chars_path) {
  const int id_col = characteristics.require_column("id", chars_path);

  std::map<std::string, Significance> label_by_id;
  for (const auto& rec : effects) {
    if (!label_by_id.emplace(rec.id, rec.significance).second) {
      throw ValidationError("duplicate id in effects file: " + rec.id);
    }
  }

  // ids must match one-to-one.
  std::vector<std::string> orphans;
  std::map<std::string, const std::vector<std::string>*> row_by_id;
  for (const auto& row : characteristics.rows) {
    const std::string& id = row[static_cast<std::size_t>(id_col)];
    if (!label_by_id.count(id)) orphans.push_back(id);
    row_by_id[id] = &row;
  }
  for (const auto& [id, label] : label_by_id) {
    if (!row_by_id.count(id)) orphans.push_back(id);
  }
  if (!orphans.empty()) {
    std::string msg = "id mismatch between effects and characteristics:";
    for (std::size_t i = 0; i < orphans.size() && i < 20; ++i) {
      msg += " " + orphans[i];
    }
    if (orphans.size() > 20) msg += " ...";
    throw ValidationError(msg);
  }

  GroupReport report;
  std::vector<std::vector<double>> values_by_group[3];
  const std::size_t n_chars = characteristics.header.size() - 1;
  for (auto& group : values_by_group) group.resize(n_chars);

  for (const auto& [id, label] : label_by_id) {
    const auto& row = *row_by_id.at(id);
    const int group = label == Significance::none
                          ? 0
                          : (label == Significance::negative ? 1 : 2);
    std::size_t c = 0;
    for (std::size_t j = 0; j < characteristics.header.size(); ++j) {
      if (static_cast<int>(j) == id_col) continue;
      double v = 0.0;
      if (!parse_double(row[j], v)) {
        throw ValidationError("non-numeric characteristic '" +
                              characteristics.header[j] + "' for id " + id);
      }
      values_by_group[group][c].push_back(v);
      ++c;
    }
  }
  report.n_none = values_by_group[0].empty() ? 0 : values_by_group[0][0].size();
  report.n_negative =
      values_by_group[1].empty() ? 0 : values_by_group[1][0].size();
  report.n_positive =
      values_by_group[2].empty() ? 0 : values_by_group[2][0].size();

  std::size_t c = 0;
  for (std::size_t j = 0; j < characteristics.header.size(); ++j) {
    if (static_cast<int>(j) == id_col) continue;
    GroupReportRow row;
    row.characteristic = characteristics.header[j];
    const auto& none = values_by_group[0][c];
    row.none.mean = none.empty() ? 0.0 : mean_of(none);
    auto fill = [&](const std::vector<double>& group, GroupColumn& col) {
      if (group.empty()) return;
      col.mean = mean_of(group);
      if (!none.empty() && none.size() >= 2 && group.size() >= 2) {
        col.difference = col.mean - row.none.mean;
        const auto test =
            welch_t_test(col.mean, sample_variance(group), group.size(),
                         row.none.mean, sample_variance(none), none.size());
        col.stars = significance_stars(test.p_value);
      } else if (!none.empty()) {
        col.difference = col.mean - row.none.mean;
      }
    };
    fill(values_by_group[1][c], row.negative);
    fill(values_by_group[2][c], row.positive);
    report.rows.push_back(std::move(row));
    ++c;
  }
  return report;
}

}  // namespace panelite

#endif  // PANELITE_GROUP_REPORT_HPP
