#ifndef PANELITE_SIMLAB_HPP
#define PANELITE_SIMLAB_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "panelite/bootstrap.hpp"
#include "panelite/comparators.hpp"
#include "panelite/errors.hpp"
#include "panelite/gmm.hpp"
#include "panelite/lcm.hpp"
#include "panelite/panel.hpp"
#include "panelite/parallel.hpp"
#include "panelite/rng.hpp"
#include "panelite/select.hpp"

namespace panelite {

/*
 * simlab.hpp
 * ----------
 * Monte Carlo engine. Structural objects (covariate paths, latent
 * characteristics, coefficients, true effects) depend only on the outer
 * seed; idiosyncratic shocks only on the inner seed. Bias and SD metrics are
 * conditional: estimates are averaged over inner draws for fixed structure,
 * compared against that structure's true effects, then averaged over
 * individuals and outer draws.
 */

enum class MuDist { normal, uniform, treated_shifted };
enum class ErrorStructure { iid, correlated };

struct DgpConfig {
  int n1 = 100;
  int n0 = 100;
  int t0 = 1;
  int t1 = 1;  // posttreatment periods
  int k = 5;
  int r = 2;
  int f = 2;  // latent characteristics besides the constant
  double x_ar_coef = 0.9;
  MuDist mu_dist = MuDist::normal;
  double coef_mean_mean = 1.0;  // omega_k ~ N(coef_mean_mean, coef_mean_sd)
  double coef_mean_sd = 1.0;
  double coef_sd = 1.0;  // coefficients ~ N(omega_k, coef_sd)
  double effect_coef_mean = 0.5;
  double effect_coef_sd = 0.5;
  ErrorStructure error_structure = ErrorStructure::iid;
  double error_ar_coef = 0.1;
  double common_share = 0.5;  // variance share of the common component
  double noise_sd = 1.0;
  bool x_constant = false;     // covariates frozen at their period-1 values
  bool beta_constant = false;  // outcome coefficients shared across periods
  int outer_draws = 5;
  int inner_draws = 1000;

  int periods() const { return t0 + t1; }

  void validate() const {
    if (n1 < 1 || n0 < 1 || t0 < 1 || t1 < 1 || k < 1 || r < 0 || f < 0) {
      throw ValidationError("DGP counts must be positive");
    }
    if (std::abs(x_ar_coef) >= 1.0 || std::abs(error_ar_coef) >= 1.0) {
      throw ValidationError("AR coefficients must lie in (-1, 1)");
    }
    if (coef_mean_sd < 0 || coef_sd < 0 || effect_coef_sd < 0 ||
        noise_sd < 0) {
      throw ValidationError("scale parameters must be nonnegative");
    }
    if (common_share < 0.0 || common_share > 1.0) {
      throw ValidationError("common_share must lie in [0, 1]");
    }
    if (outer_draws < 1 || inner_draws < 1) {
      throw ValidationError("draw counts must be positive");
    }
  }

  nlohmann::json to_json() const {
    return {{"n1", n1},
            {"n0", n0},
            {"t0", t0},
            {"t1", t1},
            {"k", k},
            {"r", r},
            {"f", f},
            {"x_ar_coef", x_ar_coef},
            {"mu_dist", mu_dist == MuDist::normal
                            ? "normal"
                            : (mu_dist == MuDist::uniform ? "uniform"
                                                          : "treated-shifted")},
            {"coef_mean_mean", coef_mean_mean},
            {"coef_mean_sd", coef_mean_sd},
            {"coef_sd", coef_sd},
            {"effect_coef_mean", effect_coef_mean},
            {"effect_coef_sd", effect_coef_sd},
            {"error_structure",
             error_structure == ErrorStructure::iid ? "iid" : "correlated"},
            {"error_ar_coef", error_ar_coef},
            {"common_share", common_share},
            {"noise_sd", noise_sd},
            {"x_constant", x_constant},
            {"beta_constant", beta_constant},
            {"outer_draws", outer_draws},
            {"inner_draws", inner_draws}};
  }

  static DgpConfig from_json(const nlohmann::json& j) {
    DgpConfig c;
    c.n1 = j.value("n1", c.n1);
    c.n0 = j.value("n0", c.n0);
    c.t0 = j.value("t0", c.t0);
    c.t1 = j.value("t1", c.t1);
    c.k = j.value("k", c.k);
    c.r = j.value("r", c.r);
    c.f = j.value("f", c.f);
    c.x_ar_coef = j.value("x_ar_coef", c.x_ar_coef);
    if (j.contains("mu_dist")) {
      const std::string m = j.at("mu_dist").get<std::string>();
      if (m == "normal") c.mu_dist = MuDist::normal;
      else if (m == "uniform") c.mu_dist = MuDist::uniform;
      else if (m == "treated-shifted") c.mu_dist = MuDist::treated_shifted;
      else throw ValidationError("unknown mu_dist: " + m);
    }
    c.coef_mean_mean = j.value("coef_mean_mean", c.coef_mean_mean);
    c.coef_mean_sd = j.value("coef_mean_sd", c.coef_mean_sd);
    c.coef_sd = j.value("coef_sd", c.coef_sd);
    c.effect_coef_mean = j.value("effect_coef_mean", c.effect_coef_mean);
    c.effect_coef_sd = j.value("effect_coef_sd", c.effect_coef_sd);
    if (j.contains("error_structure")) {
      const std::string e = j.at("error_structure").get<std::string>();
      if (e == "iid") c.error_structure = ErrorStructure::iid;
      else if (e == "correlated") c.error_structure = ErrorStructure::correlated;
      else throw ValidationError("unknown error_structure: " + e);
    }
    c.error_ar_coef = j.value("error_ar_coef", c.error_ar_coef);
    c.common_share = j.value("common_share", c.common_share);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.x_constant = j.value("x_constant", c.x_constant);
    c.beta_constant = j.value("beta_constant", c.beta_constant);
    c.outer_draws = j.value("outer_draws", c.outer_draws);
    c.inner_draws = j.value("inner_draws", c.inner_draws);
    c.validate();
    return c;
  }
};

// Everything that is fixed across inner draws.
struct DgpStructure {
  Eigen::MatrixXd x;            // N x (T*r)
  Eigen::MatrixXd mu;           // N x (f+1); column 0 is the constant 1
  Eigen::MatrixXd beta;         // (T*K) x r
  Eigen::MatrixXd lambda;       // (T*K) x (f+1)
  Eigen::MatrixXd effect_coef;  // K x (r + f + 1)
  Eigen::MatrixXd truth_ite;    // N x K, effect at period t0+1
  Eigen::MatrixXd y0_mean;      // N x (T*K): X beta + mu lambda
};

inline DgpStructure draw_structure(const DgpConfig& cfg, SplitRng rng) {
  cfg.validate();
  const int n = cfg.n1 + cfg.n0;
  const int t = cfg.periods();
  const int cells = t * cfg.k;
  DgpStructure s;

  // Covariates: N(0,1) at period 1, AR(1) afterwards with stationary unit
  // variance (innovation sd sqrt(1 - rho^2)).
  s.x.resize(n, t * cfg.r);
  const double x_innov_sd = std::sqrt(1.0 - cfg.x_ar_coef * cfg.x_ar_coef);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < cfg.r; ++j) {
      s.x(i, j) = rng.next_normal();
      for (int tt = 1; tt < t; ++tt) {
        s.x(i, tt * cfg.r + j) =
            cfg.x_constant
                ? s.x(i, j)
                : cfg.x_ar_coef * s.x(i, (tt - 1) * cfg.r + j) +
                      x_innov_sd * rng.next_normal();
      }
    }
  }

  // Latent characteristics plus the constant element.
  s.mu.resize(n, cfg.f + 1);
  s.mu.col(0).setOnes();
  const double u_half = std::sqrt(3.0);  // Uniform(-sqrt 3, sqrt 3): mean 0, var 1
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j <= cfg.f; ++j) {
      switch (cfg.mu_dist) {
        case MuDist::normal:
          s.mu(i, j) = rng.next_normal();
          break;
        case MuDist::uniform:
          s.mu(i, j) = (2.0 * rng.next_unit() - 1.0) * u_half;
          break;
        case MuDist::treated_shifted:
          s.mu(i, j) = rng.next_normal() + (i < cfg.n1 ? 1.0 : 0.0);
          break;
      }
    }
  }

  // Per-outcome coefficient means, then cell coefficients.
  Eigen::VectorXd omega(cfg.k);
  for (int k = 0; k < cfg.k; ++k) {
    omega(k) = cfg.coef_mean_mean + cfg.coef_mean_sd * rng.next_normal();
  }
  s.beta.resize(cells, cfg.r);
  s.lambda.resize(cells, cfg.f + 1);
  for (int tt = 1; tt <= t; ++tt) {
    for (int k = 0; k < cfg.k; ++k) {
      const int cell = (tt - 1) * cfg.k + k;
      if (cfg.beta_constant && tt > 1) {
        s.beta.row(cell) = s.beta.row(k);
      } else {
        for (int j = 0; j < cfg.r; ++j) {
          s.beta(cell, j) = omega(k) + cfg.coef_sd * rng.next_normal();
        }
      }
      for (int j = 0; j <= cfg.f; ++j) {
        s.lambda(cell, j) = omega(k) + cfg.coef_sd * rng.next_normal();
      }
    }
  }

  // True effects: linear in [X_{i,t0+1}, mu_i] per outcome.
  const int h_dim = cfg.r + cfg.f + 1;
  s.effect_coef.resize(cfg.k, h_dim);
  for (int k = 0; k < cfg.k; ++k) {
    for (int j = 0; j < h_dim; ++j) {
      s.effect_coef(k, j) =
          cfg.effect_coef_mean + cfg.effect_coef_sd * rng.next_normal();
    }
  }
  s.truth_ite.resize(n, cfg.k);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd h(h_dim);
    for (int j = 0; j < cfg.r; ++j) h(j) = s.x(i, cfg.t0 * cfg.r + j);
    for (int j = 0; j <= cfg.f; ++j) h(cfg.r + j) = s.mu(i, j);
    s.truth_ite.row(i) = (s.effect_coef * h).transpose();
  }

  s.y0_mean.resize(n, cells);
  for (int i = 0; i < n; ++i) {
    for (int tt = 1; tt <= t; ++tt) {
      for (int k = 0; k < cfg.k; ++k) {
        const int cell = (tt - 1) * cfg.k + k;
        double value = s.mu.row(i).dot(s.lambda.row(cell));
        for (int j = 0; j < cfg.r; ++j) {
          value += s.x(i, (tt - 1) * cfg.r + j) * s.beta(cell, j);
        }
        s.y0_mean(i, cell) = value;
      }
    }
  }
  return s;
}

struct GeneratedPanel {
  PanelDataset data;
  TreatmentLayout layout;
  Eigen::MatrixXd truth_ite;  // N x K at period t0+1
  Eigen::MatrixXd mu;         // N x (f+1)
};

namespace detail {

// Unit-variance shocks: iid, or AR(1) over periods with a common component
// shared across outcomes within a period (lag-1 autocorrelation error_ar_coef,
// same-period cross-outcome correlation common_share).
inline Eigen::MatrixXd draw_shocks(const DgpConfig& cfg, int n, SplitRng& rng) {
  const int t = cfg.periods();
  Eigen::MatrixXd eps(n, t * cfg.k);
  if (cfg.error_structure == ErrorStructure::iid) {
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < t * cfg.k; ++c) {
        eps(i, c) = cfg.noise_sd * rng.next_normal();
      }
    }
    return eps;
  }
  const double rho = cfg.error_ar_coef;
  const double share = cfg.common_share;
  const double common_sd = std::sqrt(share);
  const double idio_sd = std::sqrt(1.0 - share);
  const double innov = std::sqrt(1.0 - rho * rho);
  for (int i = 0; i < n; ++i) {
    double common = common_sd * rng.next_normal();
    std::vector<double> idio(static_cast<std::size_t>(cfg.k));
    for (int k = 0; k < cfg.k; ++k) {
      idio[static_cast<std::size_t>(k)] = idio_sd * rng.next_normal();
    }
    for (int tt = 0; tt < t; ++tt) {
      if (tt > 0) {
        common = rho * common + common_sd * innov * rng.next_normal();
        for (int k = 0; k < cfg.k; ++k) {
          idio[static_cast<std::size_t>(k)] =
              rho * idio[static_cast<std::size_t>(k)] +
              idio_sd * innov * rng.next_normal();
        }
      }
      for (int k = 0; k < cfg.k; ++k) {
        eps(i, tt * cfg.k + k) =
            cfg.noise_sd * (common + idio[static_cast<std::size_t>(k)]);
      }
    }
  }
  return eps;
}

}  // namespace detail

// Assembles the observed panel for one shock draw. Treated posttreatment
// cells observe Y0 - eps0 + effect + eps1.
inline GeneratedPanel draw_panel(const DgpConfig& cfg,
                                 const DgpStructure& s, SplitRng rng) {
  const int n = cfg.n1 + cfg.n0;
  const int t = cfg.periods();

  SplitRng rng0 = rng.split(1);
  SplitRng rng1 = rng.split(2);
  const Eigen::MatrixXd eps0 = detail::draw_shocks(cfg, n, rng0);
  const Eigen::MatrixXd eps1 = detail::draw_shocks(cfg, cfg.n1, rng1);

  Eigen::MatrixXd y = s.y0_mean + eps0;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> treatment =
      Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, t);
  for (int i = 0; i < cfg.n1; ++i) {
    for (int tt = cfg.t0 + 1; tt <= t; ++tt) {
      treatment(i, tt - 1) = 1;
      for (int k = 0; k < cfg.k; ++k) {
        const int cell = (tt - 1) * cfg.k + k;
        y(i, cell) = s.y0_mean(i, cell) + s.truth_ite(i, k) + eps1(i, cell);
      }
    }
  }

  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < cfg.n1; ++i) ids.push_back("t" + std::to_string(i + 1));
  for (int i = 0; i < cfg.n0; ++i) ids.push_back("c" + std::to_string(i + 1));

  Eigen::MatrixXd x = s.x;
  PanelDataset data(std::move(ids), t, cfg.k, cfg.r, std::move(y),
                    std::move(x), std::move(treatment));
  TreatmentLayout layout = derive_layout(data);
  return GeneratedPanel{std::move(data), std::move(layout), s.truth_ite, s.mu};
}

inline GeneratedPanel generate(const DgpConfig& cfg, std::uint64_t outer_seed,
                               std::uint64_t inner_seed) {
  const DgpStructure s = draw_structure(cfg, SplitRng(outer_seed));
  return draw_panel(cfg, s, SplitRng(inner_seed));
}

enum class Estimator { gmm, gmm2, lcm, ife, scm };

inline const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::gmm: return "gmm";
    case Estimator::gmm2: return "gmm2";
    case Estimator::lcm: return "lcm";
    case Estimator::ife: return "ife";
    default: return "scm";
  }
}

enum class SimSelection { fixed_split, cv };

struct ScenarioOptions {
  Estimator estimator = Estimator::gmm2;
  SimSelection selection = SimSelection::fixed_split;
  SelectionMode selection_mode = SelectionMode::best_set;
  int p = 2;                  // regressor cells (fixed-split mode, and cv floor)
  int p_min = 1;              // cv scan range
  int p_max = -1;             // -1: up to the feasibility bound
  int max_splits = 50;
  int loo_subsample = 100;
  bool att_mode = false;      // treated-only counterfactual comparison
  int inner_draws = -1;       // -1: take from the DgpConfig
  bool with_coverage = false;
  int b = 600;
  double alpha = 0.05;
  CiMode ci_mode = CiMode::percentile;
  int ife_factors = -1;  // -1: latent count, plus r when covariates drop out
  int threads = 1;
  std::uint64_t seed = 1;
  bool keep_draws = false;
};

struct MetricReport {
  double ite_bias = 0.0;
  double ite_sd = 0.0;
  double ate_bias = 0.0;
  double ate_sd = 0.0;
  std::optional<double> coverage_ite;
  std::optional<double> coverage_ate;
  std::optional<double> p_selected;
  int failures = 0;
  int draws_used = 0;
  // Populated when keep_draws: one entry per outer draw.
  std::vector<Eigen::MatrixXd> stored_ite_draws;  // inner x N_eff
  std::vector<Eigen::VectorXd> stored_ate_draws;
  std::vector<Eigen::VectorXd> stored_truth;      // N_eff

  nlohmann::json to_json() const {
    nlohmann::json j{{"ite_bias", ite_bias},
                     {"ite_sd", ite_sd},
                     {"ate_bias", ate_bias},
                     {"ate_sd", ate_sd},
                     {"failures", failures},
                     {"draws_used", draws_used}};
    if (coverage_ite) j["coverage_ite"] = *coverage_ite;
    if (coverage_ate) j["coverage_ate"] = *coverage_ate;
    if (p_selected) j["p_selected"] = *p_selected;
    return j;
  }
};

namespace detail {

struct SimDraw {
  Eigen::VectorXd effects;  // over the effective individual set
  double average = 0.0;
  int selected_p = 0;
  bool failed = false;
  bool ci_done = false;
  double ci_lo = 0.0, ci_hi = 0.0;        // ATE interval
  Eigen::MatrixXd ite_ci;                 // N_eff x 2
};

inline int ife_factor_count(const DgpConfig& cfg, const ScenarioOptions& opt) {
  if (opt.ife_factors >= 0) return opt.ife_factors;
  // Time-constant covariates drop out of the fit and behave like further
  // latent characteristics; the constant element is absorbed per cell.
  return cfg.x_constant ? cfg.f + cfg.r : cfg.f;
}

}  // namespace detail

// Runs one scenario: outer draws x inner draws of the chosen estimator over
// the target cell (t0+1, K), aggregated into conditional bias / SD metrics.
inline MetricReport run_scenario(const DgpConfig& cfg,
                                 const ScenarioOptions& opt) {
  cfg.validate();
  const int inner = opt.inner_draws > 0 ? opt.inner_draws : cfg.inner_draws;
  const SplitRng root(opt.seed);
  const CellIndex target{cfg.t0 + 1, cfg.k};
  const bool treated_only =
      opt.att_mode || opt.estimator == Estimator::ife ||
      opt.estimator == Estimator::scm;
  const GmmStep step =
      opt.estimator == Estimator::gmm ? GmmStep::one : GmmStep::two;
  const LooScope scope = (opt.att_mode || cfg.n1 <= 8)
                             ? LooScope::control_only
                             : LooScope::both_groups;
  if (opt.with_coverage && treated_only) {
    throw ValidationError("coverage runs are defined for full-sample estimators");
  }

  MetricReport report;
  double bias_ite_sum = 0.0, sd_ite_sum = 0.0;
  double bias_ate_sum = 0.0, sd_ate_sum = 0.0;
  double covered_ate = 0.0, covered_ite = 0.0;
  int coverage_draws = 0;
  double p_sum = 0.0;
  int p_count = 0;
  int total_failures = 0;
  int total_used = 0;

  for (int d = 0; d < cfg.outer_draws; ++d) {
    const DgpStructure structure =
        draw_structure(cfg, root.split(0xD00 + static_cast<std::uint64_t>(d)));
    const SplitRng inner_root =
        root.split(0xE00 + static_cast<std::uint64_t>(d));
    const GeneratedPanel first =
        draw_panel(cfg, structure, inner_root.split(0));
    const TreatmentLayout& layout = first.layout;
    const int n_eff = treated_only ? layout.n1() : first.data.n();

    Eigen::VectorXd truth(n_eff);
    if (treated_only) {
      for (int j = 0; j < n_eff; ++j) {
        truth(j) = structure.truth_ite(
            layout.treated_ids[static_cast<std::size_t>(j)], cfg.k - 1);
      }
    } else {
      truth = structure.truth_ite.col(cfg.k - 1);
    }

    // Fixed-split selection on this outer draw's first panel.
    std::optional<SplitSpec> fixed_split;
    std::vector<SplitSpec> fixed_average_splits;
    if (opt.estimator != Estimator::ife && opt.estimator != Estimator::scm &&
        opt.selection == SimSelection::fixed_split) {
      SplitRng select_rng = root.split(0x5E1 + static_cast<std::uint64_t>(d));
      auto sel = select_model(first.data, layout, target, opt.p, opt.p,
                              opt.max_splits, opt.selection_mode, step,
                              opt.loo_subsample, select_rng, {}, scope);
      fixed_split = sel.best_split;
      if (opt.selection_mode == SelectionMode::averaging) {
        fixed_average_splits = sel.per_p.at(sel.best_p).splits;
      }
    }

    // Bootstrap plan reused across this outer draw's replications.
    std::optional<SplitPlan> plan;
    if (opt.with_coverage) {
      if (!fixed_split) {
        throw ValidationError("coverage runs need a GMM estimator with a split");
      }
      plan = default_plan(first.data, layout, *fixed_split);
    }

    std::vector<detail::SimDraw> draws(static_cast<std::size_t>(inner));
    parallel_for(inner, opt.threads, [&](int sim) {
      detail::SimDraw& slot = draws[static_cast<std::size_t>(sim)];
      const GeneratedPanel panel =
          sim == 0 ? draw_panel(cfg, structure, inner_root.split(0))
                   : draw_panel(cfg, structure,
                                inner_root.split(static_cast<std::uint64_t>(sim)));
      try {
        SplitSpec split = fixed_split ? *fixed_split
                                      : SplitSpec::make({{1, 1}}, target);
        std::vector<SplitSpec> average_splits = fixed_average_splits;
        if (opt.selection == SimSelection::cv &&
            opt.estimator != Estimator::ife &&
            opt.estimator != Estimator::scm) {
          const int pool = layout.t0 * cfg.k - (target.period <= layout.t0);
          const int p_hi = opt.p_max > 0
                               ? opt.p_max
                               : std::min(pool, (cfg.periods() * cfg.k - 1) / 2);
          SplitRng select_rng =
              root.split(0xCE1 + static_cast<std::uint64_t>(d))
                  .split(static_cast<std::uint64_t>(sim));
          auto sel = select_model(panel.data, layout, target, opt.p_min, p_hi,
                                  opt.max_splits, opt.selection_mode, step,
                                  opt.loo_subsample, select_rng, {}, scope);
          split = sel.best_split;
          slot.selected_p = sel.best_p;
          if (opt.selection_mode == SelectionMode::averaging) {
            average_splits = sel.per_p.at(sel.best_p).splits;
          }
        }

        switch (opt.estimator) {
          case Estimator::gmm:
          case Estimator::gmm2: {
            if (opt.att_mode) {
              auto est = estimate_att_counterfactual(panel.data, layout, split,
                                                     step);
              slot.effects = est.itt;
              slot.average = est.att;
            } else if (opt.selection_mode == SelectionMode::averaging &&
                       !average_splits.empty()) {
              auto est = estimate_averaged(panel.data, layout, average_splits,
                                           step);
              slot.effects = est.ite;
              slot.average = est.ate;
            } else {
              auto est = estimate_effects(panel.data, layout, split, step);
              slot.effects = est.ite;
              slot.average = est.ate;
            }
            break;
          }
          case Estimator::lcm: {
            auto est = estimate_lcm(panel.data, layout, split);
            if (treated_only) {
              slot.effects.resize(layout.n1());
              for (int j = 0; j < layout.n1(); ++j) {
                slot.effects(j) =
                    est.cate(layout.treated_ids[static_cast<std::size_t>(j)]);
              }
              slot.average = est.att;
            } else {
              slot.effects = est.cate;
              slot.average = est.ate;
            }
            break;
          }
          case Estimator::ife: {
            IfeOptions ife_opts;
            ife_opts.use_covariates = !cfg.x_constant;
            auto fit = ife_fit(panel.data, layout,
                               detail::ife_factor_count(cfg, opt), ife_opts);
            auto est = ife_att(fit, panel.data, layout, target);
            slot.effects = est.itt;
            slot.average = est.att;
            break;
          }
          case Estimator::scm: {
            auto est = scm_att(panel.data, layout, target);
            slot.effects = est.effects.itt;
            slot.average = est.effects.att;
            break;
          }
        }

        if (opt.with_coverage) {
          BootstrapOptions bopts;
          bopts.step = step;
          bopts.plan = plan;
          bopts.threads = 1;  // outer loop already parallel
          const SplitRng boot_rng =
              root.split(0xF00 + static_cast<std::uint64_t>(d))
                  .split(static_cast<std::uint64_t>(sim));
          auto boot = bootstrap_effects(panel.data, layout, target, split,
                                        opt.b, opt.ci_mode, opt.alpha,
                                        boot_rng, bopts);
          slot.ci_done = true;
          slot.ci_lo = boot.ci_ate_lo;
          slot.ci_hi = boot.ci_ate_hi;
          slot.ite_ci = boot.ci_ite;
        }
      } catch (const EstimationError&) {
        slot.failed = true;
      }
    });

    // Deterministic sequential reduction.
    int used = 0;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_eff);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(n_eff);
    double ate_sum = 0.0, ate_sumsq = 0.0;
    for (const auto& slot : draws) {
      if (slot.failed) {
        ++total_failures;
        continue;
      }
      ++used;
      sum += slot.effects;
      sumsq += slot.effects.cwiseProduct(slot.effects);
      ate_sum += slot.average;
      ate_sumsq += slot.average * slot.average;
      if (slot.selected_p > 0) {
        p_sum += slot.selected_p;
        ++p_count;
      }
      if (slot.ci_done) {
        const double truth_ate = truth.mean();
        covered_ate +=
            (slot.ci_lo <= truth_ate && truth_ate <= slot.ci_hi) ? 1.0 : 0.0;
        double hit = 0.0;
        for (int i = 0; i < n_eff; ++i) {
          hit += (slot.ite_ci(i, 0) <= truth(i) &&
                  truth(i) <= slot.ite_ci(i, 1))
                     ? 1.0
                     : 0.0;
        }
        covered_ite += hit / static_cast<double>(n_eff);
        ++coverage_draws;
      }
    }
    if (used == 0 ||
        static_cast<double>(inner - used) > 0.05 * static_cast<double>(inner)) {
      throw EstimationError("estimator failure rate above 5% in outer draw " +
                            std::to_string(d) + " (" +
                            std::to_string(inner - used) + "/" +
                            std::to_string(inner) + ")");
    }
    total_used += used;

    const double inv = 1.0 / static_cast<double>(used);
    for (int i = 0; i < n_eff; ++i) {
      const double mean = sum(i) * inv;
      const double var = std::max(0.0, sumsq(i) * inv - mean * mean);
      bias_ite_sum += std::abs(mean - truth(i));
      sd_ite_sum += std::sqrt(var);
    }
    const double ate_mean = ate_sum * inv;
    const double ate_var =
        std::max(0.0, ate_sumsq * inv - ate_mean * ate_mean);
    bias_ate_sum += std::abs(ate_mean - truth.mean());
    sd_ate_sum += std::sqrt(ate_var);

    if (opt.keep_draws) {
      Eigen::MatrixXd stored(used, n_eff);
      Eigen::VectorXd stored_ate(used);
      int w = 0;
      for (const auto& slot : draws) {
        if (slot.failed) continue;
        stored.row(w) = slot.effects.transpose();
        stored_ate(w) = slot.average;
        ++w;
      }
      report.stored_ite_draws.push_back(std::move(stored));
      report.stored_ate_draws.push_back(std::move(stored_ate));
      report.stored_truth.push_back(truth);
    }
  }

  const double n_eff_total =
      static_cast<double>(treated_only ? cfg.n1 : cfg.n1 + cfg.n0);
  report.ite_bias =
      bias_ite_sum / (n_eff_total * static_cast<double>(cfg.outer_draws));
  report.ite_sd =
      sd_ite_sum / (n_eff_total * static_cast<double>(cfg.outer_draws));
  report.ate_bias = bias_ate_sum / static_cast<double>(cfg.outer_draws);
  report.ate_sd = sd_ate_sum / static_cast<double>(cfg.outer_draws);
  report.failures = total_failures;
  report.draws_used = total_used;
  if (coverage_draws > 0) {
    report.coverage_ate = covered_ate / static_cast<double>(coverage_draws);
    report.coverage_ite = covered_ite / static_cast<double>(coverage_draws);
  }
  if (p_count > 0) {
    report.p_selected = p_sum / static_cast<double>(p_count);
  }
  return report;
}

}  // namespace panelite

#endif  // PANELITE_SIMLAB_HPP
