#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "panelite/group_report.hpp"
#include "panelite/rng.hpp"
#include "panelite/stats.hpp"

using namespace panelite;
namespace fs = std::filesystem;

namespace {

CsvTable table_from_string(const std::string& content) {
  const auto path = fs::temp_directory_path() / "panelite_report_test.csv";
  std::ofstream out(path);
  out << content;
  out.close();
  return read_csv(path.string());
}

std::vector<EffectRecord> records(
    const std::vector<std::pair<std::string, Significance>>& items) {
  std::vector<EffectRecord> out;
  for (const auto& [id, sig] : items) out.push_back({id, sig});
  return out;
}

}  // namespace

TEST_CASE("all intervals straddling zero yields a single-group table") {
  const auto effects = records({{"a", Significance::none},
                                {"b", Significance::none},
                                {"c", Significance::none}});
  const auto chars = table_from_string("id,age\na,30\nb,40\nc,50\n");
  const auto report = make_group_report(effects, chars, "chars");
  REQUIRE(report.n_none == 3);
  REQUIRE(report.n_negative == 0);
  REQUIRE(report.n_positive == 0);
  REQUIRE(report.rows.size() == 1);
  REQUIRE_FALSE(report.rows[0].negative.difference.has_value());
  REQUIRE_FALSE(report.rows[0].positive.difference.has_value());
  REQUIRE(std::abs(report.rows[0].none.mean - 40.0) < 1e-12);
}

TEST_CASE("separated groups earn three stars") {
  // Positives have characteristic mean 1, the none group 0, sd 0.1,
  // n = 200 each: the Welch t statistic is about 100.
  std::vector<std::pair<std::string, Significance>> items;
  std::ostringstream chars;
  chars << "id,z\n";
  SplitRng rng(301);
  for (int i = 0; i < 200; ++i) {
    const std::string id = "n" + std::to_string(i);
    items.push_back({id, Significance::none});
    chars << id << ',' << 0.0 + 0.1 * rng.next_normal() << '\n';
  }
  for (int i = 0; i < 200; ++i) {
    const std::string id = "p" + std::to_string(i);
    items.push_back({id, Significance::positive});
    chars << id << ',' << 1.0 + 0.1 * rng.next_normal() << '\n';
  }
  const auto table = table_from_string(chars.str());
  const auto report = make_group_report(records(items), table, "chars");
  REQUIRE(report.n_positive == 200);
  const auto& row = report.rows[0];
  REQUIRE(row.positive.difference.has_value());
  REQUIRE(std::abs(*row.positive.difference - 1.0) < 0.05);
  REQUIRE(row.positive.stars == "***");
  // The t statistic computed directly.
  const double t = *row.positive.difference /
                   std::sqrt(0.01 / 200 + 0.01 / 200);
  REQUIRE(t > 50.0);
}

TEST_CASE("three groups fill the five-column layout") {
  const auto effects = records({{"a", Significance::none},
                                {"b", Significance::none},
                                {"c", Significance::negative},
                                {"d", Significance::negative},
                                {"e", Significance::positive},
                                {"f", Significance::positive}});
  const auto chars =
      table_from_string("id,x,y\na,1,2\nb,2,1\nc,5,0\nd,7,1\ne,0,9\nf,1,8\n");
  const auto report = make_group_report(effects, chars, "chars");
  REQUIRE(report.rows.size() == 2);
  for (const auto& row : report.rows) {
    REQUIRE(row.negative.difference.has_value());
    REQUIRE(row.positive.difference.has_value());
  }
  REQUIRE(std::abs(report.rows[0].negative.mean - 6.0) < 1e-12);
  REQUIRE(std::abs(*report.rows[0].negative.difference - 4.5) < 1e-12);
  // CSV and markdown render without throwing and carry the group sizes.
  const auto md = report.to_markdown();
  REQUIRE(md.find("| N | 2 | 2 |") != std::string::npos);
}

TEST_CASE("id mismatches are reported with the orphans") {
  const auto effects = records({{"a", Significance::none},
                                {"zz", Significance::positive}});
  const auto chars = table_from_string("id,x\na,1\nqq,2\n");
  REQUIRE_THROWS_WITH(make_group_report(effects, chars, "chars"),
                      Catch::Matchers::ContainsSubstring("qq") &&
                          Catch::Matchers::ContainsSubstring("zz"));
}

TEST_CASE("effect records parse from significance labels or intervals") {
  const auto dir = fs::temp_directory_path();
  {
    std::ofstream out(dir / "eff1.csv");
    out << "id,tau_hat,significance\na,0.5,positive\nb,-0.2,none\n";
  }
  auto recs = read_effect_records((dir / "eff1.csv").string());
  REQUIRE(recs[0].significance == Significance::positive);
  REQUIRE(recs[1].significance == Significance::none);
  {
    std::ofstream out(dir / "eff2.csv");
    out << "id,tau_hat,ci_lo,ci_hi\na,0.5,0.1,0.9\nb,-0.2,-0.5,0.1\n";
  }
  recs = read_effect_records((dir / "eff2.csv").string());
  REQUIRE(recs[0].significance == Significance::positive);
  REQUIRE(recs[1].significance == Significance::none);
}

TEST_CASE("welch test matches a hand-computed example") {
  // Two groups with known moments; verify the statistic and the
  // Welch-Satterthwaite degrees of freedom formula directly.
  const double m1 = 1.2, v1 = 0.5, m2 = 0.7, v2 = 1.5;
  const std::size_t n1 = 20, n2 = 30;
  const auto res = welch_t_test(m1, v1, n1, m2, v2, n2);
  const double a = v1 / n1, b = v2 / n2;
  REQUIRE(std::abs(res.t - (m1 - m2) / std::sqrt(a + b)) < 1e-12);
  const double df_expected =
      (a + b) * (a + b) / (a * a / (n1 - 1) + b * b / (n2 - 1));
  REQUIRE(std::abs(res.df - df_expected) < 1e-12);
  REQUIRE(res.p_value > 0.0);
  REQUIRE(res.p_value < 1.0);
}
