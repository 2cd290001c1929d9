#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <set>

#include "helpers.hpp"
#include "panelite/design.hpp"
#include "panelite/errors.hpp"

using namespace panelite;
using test_helpers::coded_panel;

TEST_CASE("columns follow the fixed convention") {
  // r=1, K=2, T=2, T0=1; regressors {(1,1)}, target (2,1), intercept on.
  const PanelDataset data = coded_panel(4, 2, 2, 1, 2);
  const TreatmentLayout layout = derive_layout(data);
  const SplitSpec split = SplitSpec::make({{1, 1}}, {2, 1});
  const DesignMatrices d = build_design(data, layout, split, Group::control);

  REQUIRE(d.z_dim() == 4);
  REQUIRE(d.r_dim() == 5);
  const int i = layout.control_ids[0];
  // Z = [1, X_{i2}, X_{i1}, Y_{i1,1}]
  REQUIRE(d.z(0, 0) == 1.0);
  REQUIRE(d.z(0, 1) == data.covariate(i, 2, 1));
  REQUIRE(d.z(0, 2) == data.covariate(i, 1, 1));
  REQUIRE(d.z(0, 3) == data.outcome(i, 1, 1));
  // R = [1, X_{i2}, X_{i1}, Y_{i1,2}, Y_{i2,2}]
  REQUIRE(d.r_mat(0, 0) == 1.0);
  REQUIRE(d.r_mat(0, 1) == data.covariate(i, 2, 1));
  REQUIRE(d.r_mat(0, 2) == data.covariate(i, 1, 1));
  REQUIRE(d.r_mat(0, 3) == data.outcome(i, 1, 2));
  REQUIRE(d.r_mat(0, 4) == data.outcome(i, 2, 2));
  REQUIRE(d.y(0) == data.outcome(i, 2, 1));
}

TEST_CASE("dimension arithmetic with two pretreatment periods") {
  // r=2, K=5, T0=2, P=3 over both periods: Z = 1 + 2*(2+1) + 3 = 10.
  const PanelDataset data = coded_panel(6, 3, 5, 2, 3);
  const TreatmentLayout layout = derive_layout(data);
  const SplitSpec split = SplitSpec::make({{1, 1}, {2, 2}, {2, 4}}, {3, 5});
  const DesignMatrices d = build_design(data, layout, split, Group::treated);
  REQUIRE(d.z_dim() == 10);
}

TEST_CASE("no leftover cells means under-identified") {
  // K=1, T=2, T0=1: instrument cells = KT - P - 1 = 0.
  const PanelDataset data = coded_panel(4, 2, 1, 0, 2);
  const TreatmentLayout layout = derive_layout(data);
  const SplitSpec split = SplitSpec::make({{1, 1}}, {2, 1});
  REQUIRE_THROWS_WITH(
      build_design(data, layout, split, Group::control),
      Catch::Matchers::ContainsSubstring("under-identified"));
}

TEST_CASE("regressor cells must be pretreatment") {
  const PanelDataset data = coded_panel(4, 3, 2, 0, 2);
  const TreatmentLayout layout = derive_layout(data);  // T0 = 2
  const SplitSpec split = SplitSpec::make({{3, 2}}, {3, 1});
  REQUIRE_THROWS_WITH(
      build_design(data, layout, split, Group::control),
      Catch::Matchers::ContainsSubstring("not pretreatment"));
}

TEST_CASE("no outcome cell lands on both sides and the target on neither") {
  const PanelDataset data = coded_panel(3, 3, 4, 1, 1);
  const TreatmentLayout layout = derive_layout(data);
  SplitRng rng(17);
  const CellIndex target{3, 2};
  for (const auto& split :
       enumerate_splits(data, layout, target, 3, 1000, rng)) {
    const DesignMatrices d = build_design(data, layout, split, Group::control);
    REQUIRE(d.r_dim() >= d.z_dim());
    // Coded values make cell identity readable from any row.
    std::set<double> z_cells(d.z.row(0).begin(), d.z.row(0).end());
    std::set<double> r_cells(d.r_mat.row(0).begin(), d.r_mat.row(0).end());
    const double target_code =
        data.outcome(layout.control_ids[0], target.period, target.outcome);
    REQUIRE_FALSE(z_cells.count(target_code));
    REQUIRE_FALSE(r_cells.count(target_code));
    for (const auto& cell : split.regressor_cells) {
      const double code =
          data.outcome(layout.control_ids[0], cell.period, cell.outcome);
      REQUIRE(z_cells.count(code));
      REQUIRE_FALSE(r_cells.count(code));
    }
  }
}

TEST_CASE("same-period instrument exclusion flag") {
  const PanelDataset data = coded_panel(3, 2, 3, 0, 1);
  const TreatmentLayout layout = derive_layout(data);
  const SplitSpec split = SplitSpec::make({{1, 1}}, {2, 1});
  DesignOptions opts;
  opts.exclude_same_period_instruments = true;
  const DesignMatrices d =
      build_design(data, layout, split, Group::control, opts);
  // Instruments shrink to the pretreatment leftovers {(1,2),(1,3)}.
  REQUIRE(d.r_dim() == 3);
  const int i = layout.control_ids[0];
  REQUIRE(d.r_mat(0, 1) == data.outcome(i, 1, 2));
  REQUIRE(d.r_mat(0, 2) == data.outcome(i, 1, 3));
}

TEST_CASE("split normalization makes cell order irrelevant") {
  const SplitSpec a = SplitSpec::make({{1, 3}, {1, 1}}, {2, 1});
  const SplitSpec b = SplitSpec::make({{1, 1}, {1, 3}}, {2, 1});
  REQUIRE(a == b);
  REQUIRE_THROWS_AS(SplitSpec::make({{2, 1}}, {2, 1}), ValidationError);
}

TEST_CASE("split JSON round trip") {
  const SplitSpec split = SplitSpec::make({{1, 2}, {1, 4}}, {2, 5}, false);
  const SplitSpec back = SplitSpec::from_json(split.to_json());
  REQUIRE(back == split);
}

TEST_CASE("exhaustive enumeration below the cap") {
  const PanelDataset data = coded_panel(4, 2, 5, 0, 2);
  const TreatmentLayout layout = derive_layout(data);
  SplitRng rng(1);
  const auto splits = enumerate_splits(data, layout, {2, 1}, 2, 100, rng);
  REQUIRE(splits.size() == 10);  // C(5,2)
  std::set<std::vector<CellIndex>> unique;
  for (const auto& s : splits) unique.insert(s.regressor_cells);
  REQUIRE(unique.size() == splits.size());
}

TEST_CASE("sampling distinct subsets when the pool is large") {
  const PanelDataset data = coded_panel(4, 3, 5, 0, 2);  // T0=2: 10 cells
  const TreatmentLayout layout = derive_layout(data);
  SplitRng rng(2);
  const auto splits = enumerate_splits(data, layout, {3, 1}, 3, 20, rng);
  REQUIRE(splits.size() == 20);  // of C(10,3) = 120
  std::set<std::vector<CellIndex>> unique;
  for (const auto& s : splits) {
    REQUIRE(s.p() == 3);
    unique.insert(s.regressor_cells);
  }
  REQUIRE(unique.size() == 20);
  REQUIRE(std::is_sorted(splits.begin(), splits.end(),
                         [](const SplitSpec& a, const SplitSpec& b) {
                           return a.regressor_cells < b.regressor_cells;
                         }));
}

TEST_CASE("p = 0 is rejected") {
  const PanelDataset data = coded_panel(4, 2, 5, 0, 2);
  const TreatmentLayout layout = derive_layout(data);
  SplitRng rng(3);
  REQUIRE_THROWS_WITH(enumerate_splits(data, layout, {2, 1}, 0, 10, rng),
                      Catch::Matchers::ContainsSubstring("P >= 1"));
}

TEST_CASE("enumeration drops under-identified splits or errors out") {
  // K=2, T=2, T0=1: p=2 leaves KT-p-1 = 1 instrument cell < Z growth.
  const PanelDataset data = coded_panel(4, 2, 2, 0, 2);
  const TreatmentLayout layout = derive_layout(data);
  SplitRng rng(4);
  REQUIRE_THROWS_WITH(enumerate_splits(data, layout, {2, 1}, 2, 10, rng),
                      Catch::Matchers::ContainsSubstring("order condition"));
}

TEST_CASE("time-constant covariates contribute a single column") {
  // Covariate 1 frozen across periods, covariate 2 varying: the duplicate
  // block would make the design rank-deficient, so it is collapsed.
  const int n = 6, t = 2, k = 2, r = 2;
  Eigen::MatrixXd y(n, t * k), x(n, t * r);
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> d =
      Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, t);
  std::vector<std::string> ids;
  SplitRng rng(19);
  for (int i = 0; i < n; ++i) {
    ids.push_back("u" + std::to_string(i));
    const double frozen = rng.next_normal();
    x(i, 0) = frozen;
    x(i, 2) = frozen;             // covariate 1, both periods
    x(i, 1) = rng.next_normal();  // covariate 2 varies
    x(i, 3) = rng.next_normal();
    for (int c = 0; c < t * k; ++c) y(i, c) = rng.next_normal();
    if (i < 3) d(i, 1) = 1;
  }
  const PanelDataset data(ids, t, k, r, y, x, d);
  const TreatmentLayout layout = derive_layout(data);
  const SplitSpec split = SplitSpec::make({{1, 1}}, {2, 1});
  const DesignMatrices dm = build_design(data, layout, split, Group::control);
  // Z = [1, X1 (once), X2 at t=2, X2 at t=1, Y(1,1)]
  REQUIRE(dm.z_dim() == 5);
  const int i = layout.control_ids[0];
  REQUIRE(dm.z(0, 1) == data.covariate(i, 2, 1));
  REQUIRE(dm.z(0, 2) == data.covariate(i, 2, 2));
  REQUIRE(dm.z(0, 3) == data.covariate(i, 1, 2));
  REQUIRE(dm.z(0, 4) == data.outcome(i, 1, 1));
}
