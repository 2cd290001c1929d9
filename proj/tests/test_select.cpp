#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "helpers.hpp"
#include "panelite/select.hpp"
#include "panelite/simlab.hpp"

using namespace panelite;

namespace {

// Panel where every outcome cell is an exact linear function of the latent
// factors: leave-one-out predictions are perfect.
PanelDataset exact_panel(int n, SplitRng& rng) {
  return test_helpers::factor_panel(n, 2, 5, 2, n / 2, 0.8, rng);
}

}  // namespace

TEST_CASE("noise-free model has zero leave-one-out error") {
  SplitRng rng(41);
  const PanelDataset data = exact_panel(30, rng);
  const TreatmentLayout layout = derive_layout(data);
  const SplitSpec split = SplitSpec::make({{1, 1}, {1, 2}}, {2, 5});
  SplitRng loo_rng(7);
  const double mse =
      loo_mse(data, layout, split, GmmStep::two, 0, loo_rng);
  REQUIRE(mse < 1e-12);
}

TEST_CASE("subsample zero refits every group member exactly once") {
  SplitRng rng(42);
  const PanelDataset data =
      test_helpers::factor_panel(22, 2, 5, 2, 12, 0.5, rng);  // 10 controls
  const TreatmentLayout layout = derive_layout(data);
  REQUIRE(layout.n0() == 10);
  const SplitSpec split = SplitSpec::make({{1, 1}, {1, 3}}, {2, 5});
  SplitRng loo_rng(8);
  const auto detail =
      loo_mse_detail(data, layout, split, GmmStep::two, 0, loo_rng);
  REQUIRE(detail.control_refits == 10);
  REQUIRE(detail.treated_refits == 12);
}

TEST_CASE("subsampled LOO uses the requested count per group") {
  SplitRng rng(43);
  const PanelDataset data = exact_panel(40, rng);
  const TreatmentLayout layout = derive_layout(data);
  const SplitSpec split = SplitSpec::make({{1, 2}, {1, 4}}, {2, 5});
  SplitRng loo_rng(9);
  const auto detail =
      loo_mse_detail(data, layout, split, GmmStep::two, 6, loo_rng);
  REQUIRE(detail.control_refits == 6);
  REQUIRE(detail.treated_refits == 6);
}

TEST_CASE("informative regressor beats a pure-noise regressor") {
  // Cell (1,1) loads on the latent factor driving the target; cell (1,2) is
  // independent noise. The informative split must win almost always.
  int informative_wins = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    SplitRng rng(1000 + static_cast<std::uint64_t>(rep));
    const int n = 60, t = 2, k = 3;
    Eigen::MatrixXd y(n, t * k);
    Eigen::MatrixXd x(n, 0);
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> d =
        Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, t);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
      ids.push_back("u" + std::to_string(i));
      const double m = rng.next_normal();
      const bool treated = i < n / 2;
      if (treated) d(i, 1) = 1;
      y(i, 0) = m + 0.3 * rng.next_normal();        // (1,1) informative
      y(i, 1) = rng.next_normal();                  // (1,2) pure noise
      y(i, 2) = 0.8 * m + 0.3 * rng.next_normal();  // (1,3) informative
      y(i, 3) = 1.5 * m + 0.5 * rng.next_normal();  // (2,1) target
      y(i, 4) = -0.7 * m + 0.3 * rng.next_normal();
      y(i, 5) = 0.6 * m + 0.3 * rng.next_normal();
      if (treated) y(i, 3) += 1.0;
    }
    const PanelDataset data(ids, t, k, 0, y, x, d);
    const TreatmentLayout layout = derive_layout(data);
    const SplitSpec informative = SplitSpec::make({{1, 1}}, {2, 1});
    const SplitSpec noise = SplitSpec::make({{1, 2}}, {2, 1});
    SplitRng loo_a(50), loo_b(50);
    const double mse_informative =
        loo_mse(data, layout, informative, GmmStep::one, 0, loo_a);
    const double mse_noise =
        loo_mse(data, layout, noise, GmmStep::one, 0, loo_b);
    if (mse_informative < mse_noise) ++informative_wins;
  }
  REQUIRE(informative_wins >= 190);  // 95% of 200
}

TEST_CASE("single feasible p and split is reported as such") {
  SplitRng rng(44);
  // T = 4 with T0 = 1: the only p = 2 split uses both pretreatment cells.
  const PanelDataset data =
      test_helpers::factor_panel(24, 4, 2, 2, 12, 0.5, rng, nullptr, 1);
  const TreatmentLayout layout = derive_layout(data);
  SplitRng sel_rng(10);
  const auto report =
      select_model(data, layout, {2, 1}, 2, 2, 50, SelectionMode::best_set,
                   GmmStep::two, 0, sel_rng);
  REQUIRE(report.per_p.size() == 1);
  REQUIRE(report.best_p == 2);
  REQUIRE(report.per_p.at(2).splits.size() == 1);
  REQUIRE(report.best_split == report.per_p.at(2).splits[0]);
}

TEST_CASE("averaged criterion of a single split equals its own MSE") {
  SplitRng rng(45);
  const PanelDataset data =
      test_helpers::factor_panel(24, 4, 2, 2, 12, 0.5, rng, nullptr, 1);
  const TreatmentLayout layout = derive_layout(data);
  SplitRng sel_rng(11);
  const auto report =
      select_model(data, layout, {2, 1}, 2, 2, 50, SelectionMode::averaging,
                   GmmStep::two, 0, sel_rng);
  const auto& per = report.per_p.at(2);
  REQUIRE(per.averaged_mse == per.split_mse[0]);
}

TEST_CASE("best-set criterion is the minimum over recorded split MSEs") {
  DgpConfig cfg;
  cfg.n1 = 25;
  cfg.n0 = 25;
  const auto panel = generate(cfg, 3, 4);
  SplitRng sel_rng(12);
  const auto report = select_model(panel.data, panel.layout, {2, 5}, 1, 3, 50,
                                   SelectionMode::best_set, GmmStep::two, 0,
                                   sel_rng);
  const auto& best = report.per_p.at(report.best_p);
  for (double mse : best.split_mse) {
    REQUIRE(report.best_criterion <= mse);
  }
  for (const auto& [p, per] : report.per_p) {
    for (double mse : per.split_mse) REQUIRE(report.best_criterion <= mse);
  }
}

TEST_CASE("selection is deterministic in the seed") {
  DgpConfig cfg;
  cfg.n1 = 20;
  cfg.n0 = 20;
  const auto panel = generate(cfg, 9, 10);
  SplitRng a(77), b(77);
  const auto r1 = select_model(panel.data, panel.layout, {2, 5}, 1, 2, 5,
                               SelectionMode::best_set, GmmStep::two, 10, a);
  const auto r2 = select_model(panel.data, panel.layout, {2, 5}, 1, 2, 5,
                               SelectionMode::best_set, GmmStep::two, 10, b);
  REQUIRE(r1.to_json() == r2.to_json());
}

TEST_CASE("averaging one split reproduces the plain estimate") {
  DgpConfig cfg;
  cfg.n1 = 25;
  cfg.n0 = 25;
  const auto panel = generate(cfg, 13, 14);
  const SplitSpec split = SplitSpec::make({{1, 2}, {1, 3}}, {2, 5});
  const auto single =
      estimate_effects(panel.data, panel.layout, split, GmmStep::two);
  const auto averaged =
      estimate_averaged(panel.data, panel.layout, {split}, GmmStep::two);
  REQUIRE((averaged.ite - single.ite).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(averaged.ate == single.ate);
}

TEST_CASE("averaging two splits takes the exact mean") {
  DgpConfig cfg;
  cfg.n1 = 25;
  cfg.n0 = 25;
  const auto panel = generate(cfg, 15, 16);
  const SplitSpec a = SplitSpec::make({{1, 1}, {1, 2}}, {2, 5});
  const SplitSpec b = SplitSpec::make({{1, 3}, {1, 4}}, {2, 5});
  const auto ea = estimate_effects(panel.data, panel.layout, a, GmmStep::two);
  const auto eb = estimate_effects(panel.data, panel.layout, b, GmmStep::two);
  const auto averaged =
      estimate_averaged(panel.data, panel.layout, {a, b}, GmmStep::two);
  const Eigen::VectorXd expected = 0.5 * (ea.ite + eb.ite);
  REQUIRE((averaged.ite - expected).cwiseAbs().maxCoeff() < 1e-15);
  REQUIRE(averaged.per_split_ite.size() == 2);
  // Stored per-split vectors average back to the reported vector exactly.
  const Eigen::VectorXd stored_mean =
      0.5 * (averaged.per_split_ite[0] + averaged.per_split_ite[1]);
  REQUIRE((averaged.ite - stored_mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("duplicated splits leave the average unchanged") {
  DgpConfig cfg;
  cfg.n1 = 20;
  cfg.n0 = 20;
  const auto panel = generate(cfg, 17, 18);
  const SplitSpec s = SplitSpec::make({{1, 1}, {1, 5}}, {2, 5});
  const auto single =
      estimate_effects(panel.data, panel.layout, s, GmmStep::two);
  const auto doubled =
      estimate_averaged(panel.data, panel.layout, {s, s}, GmmStep::two);
  REQUIRE((doubled.ite - single.ite).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("a group too small to refit is rejected") {
  SplitRng rng(46);
  const PanelDataset data =
      test_helpers::factor_panel(12, 2, 5, 2, 3, 0.5, rng);  // 3 treated
  const TreatmentLayout layout = derive_layout(data);
  const SplitSpec split = SplitSpec::make({{1, 1}, {1, 2}}, {2, 5});
  SplitRng loo_rng(20);
  REQUIRE_THROWS_WITH(
      loo_mse(data, layout, split, GmmStep::two, 0, loo_rng),
      Catch::Matchers::ContainsSubstring("too small to drop one"));
  // Scoring controls only sidesteps the tiny treated group.
  SplitRng loo_rng2(20);
  const double mse = loo_mse(data, layout, split, GmmStep::two, 0, loo_rng2,
                             {}, LooScope::control_only);
  REQUIRE(mse >= 0.0);
}
