#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "panelite/csv.hpp"
#include "panelite/tables.hpp"

using namespace panelite;
namespace fs = std::filesystem;

TEST_CASE("table 5 grid preserves the bias ordering in every row") {
  const TableResult result = reproduce_table(5, 0.1, 424242, 2);
  REQUIRE(result.lines.size() == 16);  // 2 panels x 4 settings x 2 estimators
  for (std::size_t i = 0; i + 1 < result.lines.size(); i += 2) {
    const auto& scm = result.lines[i];
    const auto& gmm = result.lines[i + 1];
    REQUIRE(scm.estimator == "scm");
    REQUIRE(gmm.estimator == "gmm2-att");
    REQUIRE(scm.metrics.ate_bias > gmm.metrics.ate_bias);
    REQUIRE(scm.metrics.ite_bias > gmm.metrics.ite_bias);
  }
  const auto path =
      (fs::temp_directory_path() / "panelite_table5.csv").string();
  result.write_csv(path);
  const CsvTable back = read_csv(path);
  REQUIRE(back.rows.size() == 16);
  REQUIRE(back.column("ate_bias") >= 0);
  REQUIRE(back.column("ref_ate_bias") >= 0);
  REQUIRE_FALSE(result.to_markdown().empty());
  fs::remove(path);
}
