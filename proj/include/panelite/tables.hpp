#ifndef PANELITE_TABLES_HPP
#define PANELITE_TABLES_HPP

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "panelite/csv.hpp"
#include "panelite/errors.hpp"
#include "panelite/simlab.hpp"

namespace panelite {

/*
 * tables.hpp
 * ----------
 * Desk-scale reproduction of the simulation study grids. Each named table
 * runs its settings at a replication fraction and renders our metrics next
 * to the benchmark reference values.
 */

struct TableLine {
  std::string panel;
  int n1 = 0, n0 = 0, t0 = 0;
  std::string estimator;
  std::optional<double> p_selected;
  MetricReport metrics;
  // Reference values in the same order: P (optional), ITE bias, ITE SD,
  // coverage (optional), ATE bias, ATE SD, coverage (optional).
  std::optional<double> ref_p;
  double ref_ite_bias = 0.0;
  double ref_ite_sd = 0.0;
  std::optional<double> ref_ite_cov;
  double ref_ate_bias = 0.0;
  double ref_ate_sd = 0.0;
  std::optional<double> ref_ate_cov;
};

struct TableResult {
  int table_id = 0;
  int inner_draws = 0;
  std::vector<TableLine> lines;

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << "table,panel,n1,n0,t0,estimator,p_selected,ite_bias,ite_sd,"
           "ite_coverage,ate_bias,ate_sd,ate_coverage,ref_p,ref_ite_bias,"
           "ref_ite_sd,ref_ite_coverage,ref_ate_bias,ref_ate_sd,"
           "ref_ate_coverage\n";
    auto opt = [](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string();
    };
    for (const auto& line : lines) {
      out << table_id << ',' << csv_quote(line.panel) << ',' << line.n1 << ','
          << line.n0 << ',' << line.t0 << ',' << line.estimator << ','
          << opt(line.p_selected) << ',' << format_double(line.metrics.ite_bias)
          << ',' << format_double(line.metrics.ite_sd) << ','
          << opt(line.metrics.coverage_ite) << ','
          << format_double(line.metrics.ate_bias) << ','
          << format_double(line.metrics.ate_sd) << ','
          << opt(line.metrics.coverage_ate) << ',' << opt(line.ref_p) << ','
          << format_double(line.ref_ite_bias) << ','
          << format_double(line.ref_ite_sd) << ',' << opt(line.ref_ite_cov)
          << ',' << format_double(line.ref_ate_bias) << ','
          << format_double(line.ref_ate_sd) << ',' << opt(line.ref_ate_cov)
          << '\n';
    }
  }

  std::string to_markdown() const {
    auto num = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.3f", v);
      return std::string(buf);
    };
    std::string md =
        "| panel | N1 | N0 | T0 | estimator | P | ITE bias | ITE SD | ATE "
        "bias | ATE SD | cov | ref ITE bias | ref ITE SD | ref ATE bias | "
        "ref ATE SD |\n|---|---|---|---|---|---|---|---|---|---|---|---|---|"
        "---|---|\n";
    for (const auto& line : lines) {
      md += "| " + line.panel + " | " + std::to_string(line.n1) + " | " +
            std::to_string(line.n0) + " | " + std::to_string(line.t0) +
            " | " + line.estimator + " | " +
            (line.p_selected ? num(*line.p_selected) : std::string("-")) +
            " | " + num(line.metrics.ite_bias) + " | " +
            num(line.metrics.ite_sd) + " | " + num(line.metrics.ate_bias) +
            " | " + num(line.metrics.ate_sd) + " | " +
            (line.metrics.coverage_ate ? num(*line.metrics.coverage_ate)
                                       : std::string("-")) +
            " | " + num(line.ref_ite_bias) + " | " + num(line.ref_ite_sd) +
            " | " + num(line.ref_ate_bias) + " | " + num(line.ref_ate_sd) +
            " |\n";
    }
    return md;
  }
};

namespace detail {

struct Setting {
  int n1, n0, t0;
};

inline DgpConfig table_config(int n1, int n0, int t0) {
  DgpConfig cfg;
  cfg.n1 = n1;
  cfg.n0 = n0;
  cfg.t0 = t0;
  return cfg;
}

inline int fixed_p(int t0) { return t0 == 1 ? 2 : 3; }

}  // namespace detail

// Runs the named simulation grid at inner draws = 1000 * scale (min 100).
inline TableResult reproduce_table(int table_id, double scale,
                                   std::uint64_t seed, int threads = 1) {
  if (table_id < 1 || table_id > 5) {
    throw ValidationError("table id must be 1..5");
  }
  TableResult result;
  result.table_id = table_id;
  const int inner = std::max(100, static_cast<int>(1000.0 * scale + 0.5));
  result.inner_draws = inner;

  auto base_options = [&](const DgpConfig& cfg) {
    ScenarioOptions opt;
    opt.inner_draws = inner;
    opt.threads = threads;
    opt.seed = seed;
    opt.p = detail::fixed_p(cfg.t0);
    return opt;
  };

  switch (table_id) {
    case 1: {
      const detail::Setting settings[] = {{50, 50, 1},   {100, 100, 1},
                                          {200, 200, 1}, {50, 50, 2},
                                          {100, 100, 2}, {200, 200, 2}};
      // Reference: P, ITE bias, ITE SD, ATE bias, ATE SD for best-set then
      // model averaging.
      const double refs[6][10] = {
          {2.2, 0.151, 1.225, 0.082, 0.384, 2.3, 0.231, 1.163, 0.120, 0.336},
          {2.2, 0.076, 0.764, 0.032, 0.212, 2.4, 0.065, 0.836, 0.024, 0.205},
          {2.1, 0.038, 0.476, 0.004, 0.127, 2.6, 0.046, 0.712, 0.011, 0.133},
          {2.6, 0.062, 0.875, 0.014, 0.253, 2.9, 0.150, 0.758, 0.040, 0.232},
          {2.7, 0.035, 0.685, 0.003, 0.165, 2.9, 0.073, 0.563, 0.014, 0.159},
          {3.2, 0.038, 0.729, 0.003, 0.137, 4.0, 0.031, 0.702, 0.003, 0.131}};
      for (int s = 0; s < 6; ++s) {
        DgpConfig cfg = detail::table_config(settings[s].n1, settings[s].n0,
                                             settings[s].t0);
        for (int mode = 0; mode < 2; ++mode) {
          ScenarioOptions opt = base_options(cfg);
          opt.selection = SimSelection::cv;
          opt.selection_mode =
              mode == 0 ? SelectionMode::best_set : SelectionMode::averaging;
          TableLine line;
          line.panel = mode == 0 ? "best-set" : "averaging";
          line.n1 = cfg.n1;
          line.n0 = cfg.n0;
          line.t0 = cfg.t0;
          line.estimator = "gmm2";
          line.metrics = run_scenario(cfg, opt);
          line.p_selected = line.metrics.p_selected;
          const double* r = refs[s] + (mode == 0 ? 0 : 5);
          line.ref_p = r[0];
          line.ref_ite_bias = r[1];
          line.ref_ite_sd = r[2];
          line.ref_ate_bias = r[3];
          line.ref_ate_sd = r[4];
          result.lines.push_back(std::move(line));
        }
      }
      break;
    }
    case 2: {
      const detail::Setting settings[] = {{50, 50, 1}, {100, 100, 1},
                                          {50, 50, 2}, {100, 100, 2}};
      const double refs[2][4][6] = {
          {{0.096, 1.422, 0.997, 0.040, 0.443, 0.995},
           {0.043, 0.856, 0.992, 0.005, 0.226, 0.984},
           {0.043, 1.163, 0.973, 0.011, 0.288, 0.959},
           {0.025, 0.900, 0.953, 0.005, 0.181, 0.956}},
          {{0.134, 1.419, 0.996, 0.045, 0.431, 0.993},
           {0.065, 0.851, 0.991, 0.018, 0.230, 0.982},
           {0.063, 1.162, 0.976, 0.008, 0.294, 0.961},
           {0.037, 0.906, 0.964, 0.009, 0.183, 0.967}}};
      for (int panel = 0; panel < 2; ++panel) {
        for (int s = 0; s < 4; ++s) {
          DgpConfig cfg = detail::table_config(settings[s].n1, settings[s].n0,
                                               settings[s].t0);
          cfg.error_structure =
              panel == 0 ? ErrorStructure::iid : ErrorStructure::correlated;
          ScenarioOptions opt = base_options(cfg);
          opt.with_coverage = true;
          opt.b = 600;
          TableLine line;
          line.panel = panel == 0 ? "A: iid errors" : "B: correlated errors";
          line.n1 = cfg.n1;
          line.n0 = cfg.n0;
          line.t0 = cfg.t0;
          line.estimator = "gmm2";
          line.metrics = run_scenario(cfg, opt);
          const double* r = refs[panel][s];
          line.ref_ite_bias = r[0];
          line.ref_ite_sd = r[1];
          line.ref_ite_cov = r[2];
          line.ref_ate_bias = r[3];
          line.ref_ate_sd = r[4];
          line.ref_ate_cov = r[5];
          result.lines.push_back(std::move(line));
        }
      }
      break;
    }
    case 3: {
      const detail::Setting settings[] = {{100, 100, 1}, {200, 200, 1},
                                          {100, 100, 2}, {200, 200, 2}};
      const double refs[2][4][8] = {
          {{0.099, 0.622, 0.041, 0.186, 0.113, 1.297, 0.086, 0.257},
           {0.059, 0.415, 0.015, 0.119, 0.011, 0.430, 0.003, 0.129},
           {0.046, 0.677, 0.012, 0.158, 0.026, 0.901, 0.003, 0.179},
           {0.064, 0.547, 0.012, 0.121, 0.028, 0.937, 0.003, 0.142}},
          {{0.097, 0.687, 0.057, 0.199, 0.025, 0.806, 0.011, 0.244},
           {0.140, 0.456, 0.040, 0.122, 0.016, 0.552, 0.003, 0.149},
           {0.077, 0.734, 0.015, 0.173, 0.115, 1.118, 0.007, 0.213},
           {0.093, 0.551, 0.004, 0.116, 0.025, 0.910, 0.003, 0.142}}};
      for (int panel = 0; panel < 2; ++panel) {
        for (int s = 0; s < 4; ++s) {
          DgpConfig cfg = detail::table_config(settings[s].n1, settings[s].n0,
                                               settings[s].t0);
          cfg.mu_dist = panel == 0 ? MuDist::normal : MuDist::uniform;
          const std::string panel_name =
              panel == 0 ? "A: linear conditional mean"
                         : "B: nonlinear conditional mean";
          for (int est = 0; est < 2; ++est) {
            ScenarioOptions opt = base_options(cfg);
            opt.estimator = est == 0 ? Estimator::lcm : Estimator::gmm2;
            TableLine line;
            line.panel = panel_name;
            line.n1 = cfg.n1;
            line.n0 = cfg.n0;
            line.t0 = cfg.t0;
            line.estimator = est == 0 ? "ols" : "gmm2";
            line.metrics = run_scenario(cfg, opt);
            const double* r = refs[panel][s] + (est == 0 ? 0 : 4);
            line.ref_ite_bias = r[0];
            line.ref_ite_sd = r[1];
            line.ref_ate_bias = r[2];
            line.ref_ate_sd = r[3];
            result.lines.push_back(std::move(line));
          }
        }
      }
      break;
    }
    case 4:
    case 5: {
      const detail::Setting settings[] = {
          {5, 100, 1}, {5, 200, 1}, {5, 100, 2}, {5, 200, 2}};
      // ITT bias, ITT SD, ATT bias, ATT SD for the comparator then GMM.
      const double refs4[2][4][8] = {
          {{1.203, 1.357, 0.657, 0.610, 0.047, 1.499, 0.016, 0.687},
           {1.264, 1.229, 0.492, 0.548, 0.089, 1.624, 0.023, 0.730},
           {0.922, 1.140, 0.263, 0.518, 0.034, 1.265, 0.015, 0.585},
           {0.982, 1.147, 0.378, 0.520, 0.040, 1.387, 0.018, 0.634}},
          {{1.289, 1.220, 0.773, 0.579, 0.029, 1.349, 0.016, 0.616},
           {1.681, 1.370, 0.836, 0.620, 0.034, 1.563, 0.020, 0.713},
           {0.930, 1.070, 0.440, 0.486, 0.026, 1.261, 0.017, 0.577},
           {1.417, 1.083, 1.015, 0.489, 0.031, 1.250, 0.011, 0.564}}};
      const double refs5[2][4][8] = {
          {{0.376, 1.247, 0.245, 0.577, 0.029, 1.349, 0.016, 0.617},
           {0.883, 1.376, 0.698, 0.628, 0.035, 1.563, 0.020, 0.713},
           {0.930, 1.191, 0.526, 0.547, 0.023, 1.243, 0.014, 0.565},
           {0.469, 1.186, 0.126, 0.531, 0.031, 1.250, 0.012, 0.564}},
          {{0.763, 1.253, 0.634, 0.605, 0.036, 1.368, 0.022, 0.658},
           {1.412, 1.413, 1.269, 0.656, 0.037, 1.573, 0.024, 0.735},
           {0.982, 1.204, 0.513, 0.558, 0.027, 1.249, 0.020, 0.578},
           {0.781, 1.203, 0.613, 0.551, 0.032, 1.256, 0.014, 0.577}}};
      for (int panel = 0; panel < 2; ++panel) {
        for (int s = 0; s < 4; ++s) {
          DgpConfig cfg = detail::table_config(settings[s].n1, settings[s].n0,
                                               settings[s].t0);
          std::string panel_name;
          if (table_id == 4) {
            if (panel == 0) {
              cfg.x_constant = true;
              panel_name = "A: time-constant X";
            } else {
              cfg.beta_constant = true;
              panel_name = "B: time-constant coefficients";
            }
          } else {
            cfg.mu_dist =
                panel == 0 ? MuDist::normal : MuDist::treated_shifted;
            panel_name = panel == 0 ? "A: shared latent distribution"
                                    : "B: shifted treated latents";
          }
          for (int est = 0; est < 2; ++est) {
            ScenarioOptions opt = base_options(cfg);
            if (est == 0) {
              opt.estimator =
                  table_id == 4 ? Estimator::ife : Estimator::scm;
            } else {
              opt.estimator = Estimator::gmm2;
              opt.att_mode = true;
            }
            TableLine line;
            line.panel = panel_name;
            line.n1 = cfg.n1;
            line.n0 = cfg.n0;
            line.t0 = cfg.t0;
            line.estimator = est == 0
                                 ? (table_id == 4 ? "ife" : "scm")
                                 : "gmm2-att";
            line.metrics = run_scenario(cfg, opt);
            const double* r = (table_id == 4 ? refs4 : refs5)[panel][s] +
                              (est == 0 ? 0 : 4);
            line.ref_ite_bias = r[0];
            line.ref_ite_sd = r[1];
            line.ref_ate_bias = r[2];
            line.ref_ate_sd = r[3];
            result.lines.push_back(std::move(line));
          }
        }
      }
      break;
    }
  }
  return result;
}

}  // namespace panelite

#endif  // PANELITE_TABLES_HPP
