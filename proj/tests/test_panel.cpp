#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "panelite/panel.hpp"
#include "panelite/rng.hpp"

using namespace panelite;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("panelite_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name, const std::string& content) {
    const auto p = path / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
};

Schema basic_schema(int k = 1, int r = 0) {
  Schema s;
  s.id = "id";
  s.period = "period";
  s.treatment = "d";
  for (int i = 1; i <= k; ++i) s.outcomes.push_back("y" + std::to_string(i));
  for (int j = 1; j <= r; ++j) s.covariates.push_back("x" + std::to_string(j));
  return s;
}

}  // namespace

TEST_CASE("minimal well-formed file loads") {
  TempDir dir;
  const auto path = dir.file("panel.csv",
                             "id,period,d,y1\n"
                             "a,1,0,1.5\n"
                             "a,2,1,2.5\n"
                             "b,1,0,0.5\n"
                             "b,2,0,1.0\n");
  const PanelDataset data = load_panel(path, basic_schema());
  REQUIRE(data.n() == 2);
  REQUIRE(data.periods() == 2);
  REQUIRE(data.n_outcomes() == 1);
  REQUIRE(data.outcome(0, 2, 1) == 2.5);
  REQUIRE(data.treated_at(0, 2));
  REQUIRE_FALSE(data.treated_at(1, 2));
}

TEST_CASE("non-absorbing treatment is rejected") {
  TempDir dir;
  const auto path = dir.file("panel.csv",
                             "id,period,d,y1\n"
                             "1,1,1,1.5\n"
                             "1,2,0,2.5\n"
                             "2,1,0,0.5\n"
                             "2,2,0,1.0\n");
  REQUIRE_THROWS_WITH(load_panel(path, basic_schema()),
                      Catch::Matchers::ContainsSubstring(
                          "non-absorbing treatment for id 1"));
}

TEST_CASE("ragged panel is rejected with the offending id") {
  TempDir dir;
  const auto path = dir.file("panel.csv",
                             "id,period,d,y1\n"
                             "7,1,0,1.5\n"
                             "8,1,0,0.5\n"
                             "8,2,0,1.0\n");
  REQUIRE_THROWS_WITH(load_panel(path, basic_schema()),
                      Catch::Matchers::ContainsSubstring("ragged panel: id 7"));
}

TEST_CASE("missing cell names id, period and column") {
  TempDir dir;
  const auto path = dir.file("panel.csv",
                             "id,period,d,y1\n"
                             "a,1,0,\n"
                             "a,2,0,2.5\n");
  REQUIRE_THROWS_WITH(
      load_panel(path, basic_schema()),
      Catch::Matchers::ContainsSubstring("id a, period 1, column y1"));
}

TEST_CASE("write then load round-trips bit-identically") {
  TempDir dir;
  SplitRng rng(99);
  const int n = 7, t = 3, k = 2, r = 2;
  Eigen::MatrixXd y(n, t * k), x(n, t * r);
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> d =
      Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, t);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < t * k; ++c) y(i, c) = rng.next_normal() * 1e3;
    for (int c = 0; c < t * r; ++c) x(i, c) = rng.next_normal() / 7.0;
    if (i < 3) d(i, 2) = 1;
  }
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("unit-" + std::to_string(i));
  const PanelDataset original(ids, t, k, r, y, x, d);

  const Schema schema = basic_schema(k, r);
  const auto path = (dir.path / "roundtrip.csv").string();
  write_panel(original, path, schema);
  const PanelDataset back = load_panel(path, schema);

  REQUIRE(back.n() == original.n());
  REQUIRE(back.outcome_matrix() == original.outcome_matrix());
  REQUIRE(back.covariate_matrix() == original.covariate_matrix());
  REQUIRE(back.treatment_matrix() == original.treatment_matrix());
  REQUIRE(back.ids() == original.ids());

  // And the file itself is reproduced byte for byte on a second write.
  const auto path2 = (dir.path / "roundtrip2.csv").string();
  write_panel(back, path2, schema);
  std::ifstream f1(path), f2(path2);
  std::string s1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  REQUIRE(s1 == s2);
}

TEST_CASE("layout from a simple treatment pattern") {
  TempDir dir;
  const auto path = dir.file("panel.csv",
                             "id,period,d,y1\n"
                             "a,1,0,1\n"
                             "a,2,1,1\n"
                             "b,1,0,1\n"
                             "b,2,0,1\n");
  const PanelDataset data = load_panel(path, basic_schema());
  const TreatmentLayout layout = derive_layout(data);
  REQUIRE(layout.t0 == 1);
  REQUIRE(layout.treated_ids == std::vector<int>{0});
  REQUIRE(layout.control_ids == std::vector<int>{1});
}

TEST_CASE("no treated individuals is an error") {
  TempDir dir;
  const auto path = dir.file("panel.csv",
                             "id,period,d,y1\n"
                             "a,1,0,1\na,2,0,1\nb,1,0,1\nb,2,0,1\n");
  const PanelDataset data = load_panel(path, basic_schema());
  REQUIRE_THROWS_WITH(derive_layout(data), Catch::Matchers::ContainsSubstring(
                                               "no treated individuals"));
}

TEST_CASE("staggered adoption is an error") {
  TempDir dir;
  const auto path = dir.file("panel.csv",
                             "id,period,d,y1\n"
                             "a,1,0,1\na,2,1,1\na,3,1,1\n"
                             "b,1,0,1\nb,2,0,1\nb,3,1,1\n"
                             "c,1,0,1\nc,2,0,1\nc,3,0,1\n");
  const PanelDataset data = load_panel(path, basic_schema());
  REQUIRE_THROWS_WITH(
      derive_layout(data),
      Catch::Matchers::ContainsSubstring("staggered adoption unsupported"));
}

TEST_CASE("layout is permutation covariant") {
  SplitRng rng(4);
  const int n = 10, t = 2;
  Eigen::MatrixXd y(n, t), x(n, 0);
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> d =
      Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, t);
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    y(i, 0) = rng.next_normal();
    y(i, 1) = rng.next_normal();
    if (i % 3 == 0) d(i, 1) = 1;
    ids.push_back("u" + std::to_string(i));
  }
  const PanelDataset data(ids, t, 1, 0, y, x, d);
  const TreatmentLayout layout = derive_layout(data);

  // Reverse the individual order.
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = n - 1 - i;
  const PanelDataset reversed = data.subset(perm);
  const TreatmentLayout layout2 = derive_layout(reversed);
  REQUIRE(layout2.t0 == layout.t0);
  for (int i : layout.treated_ids) {
    const int mapped = n - 1 - i;
    REQUIRE(std::find(layout2.treated_ids.begin(), layout2.treated_ids.end(),
                      mapped) != layout2.treated_ids.end());
  }
  REQUIRE(layout2.n1() == layout.n1());
}
