// Command line front-end: ingestion, model selection, effect estimation,
// bootstrap inference, Monte Carlo scenarios and significance-group reports.
//
// Exit codes: 0 success, 1 estimation failure, 2 configuration/input error.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "panelite/panelite.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace panelite;

constexpr const char* kVersion = "0.1.0";

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

struct Manifest {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  json inputs = json::object();
  std::vector<std::string> outputs;

  void add_input(const std::string& path) {
    inputs[path] = hex64(fnv1a64_file(path));
  }
  void write(const fs::path& dir) const {
    json j{{"command", command}, {"config", config},
           {"seed", seed},       {"inputs", inputs},
           {"outputs", outputs}, {"version", kVersion},
           {"config_hash", hex64(std::hash<std::string>{}(config.dump()))}};
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2) << '\n';
  }
};

CellIndex parse_target(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ValidationError("target must be 'period:outcome', got '" + text +
                          "'");
  }
  try {
    return CellIndex{std::stoi(text.substr(0, colon)),
                     std::stoi(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ValidationError("target must be 'period:outcome', got '" + text +
                          "'");
  }
}

SplitSpec read_split_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open split file: " + path);
  json j;
  in >> j;
  return SplitSpec::from_json(j);
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

// Shared flags for commands that read a panel.
struct DataArgs {
  std::string data_path;
  std::string schema_path;
  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data_path, "panel CSV (long format)")
        ->required();
    cmd->add_option("--schema", schema_path,
                    "JSON column-role schema for the panel")
        ->required();
  }
  PanelDataset load() const {
    return load_panel(data_path, Schema::from_file(schema_path));
  }
};

GmmStep parse_step(int step) {
  if (step == 1) return GmmStep::one;
  if (step == 2) return GmmStep::two;
  throw ValidationError("--step must be 1 or 2");
}

CiMode parse_ci(const std::string& mode) {
  if (mode == "percentile") return CiMode::percentile;
  if (mode == "normal") return CiMode::normal_approx;
  throw ValidationError("--ci must be 'percentile' or 'normal'");
}

int run_estimate(const DataArgs& data_args, const std::string& target_text,
                 const std::string& split_path, int p, int p_max,
                 const std::string& mode, int step_flag, int b, double alpha,
                 const std::string& ci, std::uint64_t seed, int subsample,
                 int max_splits, bool holdout, bool keep_draws,
                 const std::string& pretreat, int threads,
                 const std::string& out) {
  const fs::path dir = prepare_out_dir(out);
  Manifest manifest;
  manifest.command = "estimate";
  manifest.seed = seed;
  manifest.add_input(data_args.data_path);
  manifest.add_input(data_args.schema_path);
  manifest.config = {{"target", target_text}, {"p", p},
                     {"mode", mode},          {"step", step_flag},
                     {"b", b},                {"alpha", alpha},
                     {"ci", ci},              {"subsample", subsample},
                     {"max_splits", max_splits}, {"holdout", holdout},
                     {"pretreat_fit", pretreat}, {"threads", threads}};

  PanelDataset data = data_args.load();
  TreatmentLayout layout = derive_layout(data);
  const CellIndex target = parse_target(target_text);
  const GmmStep step = parse_step(step_flag);
  SplitRng rng(seed);

  // Optional holdout: select on one random half, estimate on the other.
  std::optional<PanelDataset> estimation_data;
  std::optional<PanelDataset> selection_data;
  if (holdout) {
    SplitRng half_rng = rng.split(0x4A1F);
    auto halve = [&](const std::vector<int>& group, std::vector<int>& a,
                     std::vector<int>& b_out) {
      std::vector<int> pool = group;
      for (std::size_t i = 0; i + 1 < pool.size(); ++i) {
        const auto j = static_cast<std::size_t>(half_rng.next_below(
            pool.size() - i)) + i;
        std::swap(pool[i], pool[j]);
      }
      for (std::size_t i = 0; i < pool.size(); ++i) {
        (i % 2 == 0 ? a : b_out).push_back(pool[i]);
      }
    };
    std::vector<int> sel_rows, est_rows;
    halve(layout.treated_ids, sel_rows, est_rows);
    halve(layout.control_ids, sel_rows, est_rows);
    std::sort(sel_rows.begin(), sel_rows.end());
    std::sort(est_rows.begin(), est_rows.end());
    selection_data = data.subset(sel_rows);
    estimation_data = data.subset(est_rows);
  }

  const PanelDataset& est_data = estimation_data ? *estimation_data : data;
  const TreatmentLayout est_layout = derive_layout(est_data);

  // Split: explicit file beats selection.
  std::optional<SelectionReport> selection;
  SplitSpec split = SplitSpec::make({{1, 1}}, target);
  std::vector<SplitSpec> averaged_splits;
  if (!split_path.empty()) {
    split = read_split_file(split_path);
    manifest.add_input(split_path);
    if (split.target != target) {
      throw ValidationError("split file targets " + to_string(split.target) +
                            " but --target is " + to_string(target));
    }
  } else {
    const PanelDataset& sel_data = selection_data ? *selection_data : data;
    const TreatmentLayout sel_layout = derive_layout(sel_data);
    SplitRng sel_rng = rng.split(0x5E1);
    const int hi = p_max > 0 ? p_max : p;
    const SelectionMode sel_mode = mode == "avg" ? SelectionMode::averaging
                                                 : SelectionMode::best_set;
    selection = select_model(sel_data, sel_layout, target, p, hi, max_splits,
                             sel_mode, step, subsample, sel_rng);
    split = selection->best_split;
    if (sel_mode == SelectionMode::averaging) {
      averaged_splits = selection->per_p.at(selection->best_p).splits;
    }
    std::ofstream sel_out(dir / "selection.json");
    sel_out << selection->to_json().dump(2) << '\n';
    manifest.outputs.push_back("selection.json");
  }

  {
    std::ofstream split_out(dir / "split.json");
    split_out << split.to_json().dump(2) << '\n';
    manifest.outputs.push_back("split.json");
  }

  if (b > 0) {
    if (mode == "avg") {
      throw ValidationError(
          "bootstrap intervals are supported for best-set estimates");
    }
    BootstrapOptions opts;
    opts.step = step;
    opts.threads = threads;
    opts.pretreat_fit = pretreat == "control"
                            ? PretreatFit::control_only
                            : PretreatFit::pooled;
    auto boot = bootstrap_effects(est_data, est_layout, target, split, b,
                                  parse_ci(ci), alpha, rng.split(0xB007),
                                  opts);
    write_bootstrap_csv(boot, est_data, (dir / "effects.csv").string());
    manifest.outputs.push_back("effects.csv");
    if (keep_draws) {
      std::ofstream draws_out(dir / "draws.json");
      draws_out << draws_to_json(boot).dump() << '\n';
      manifest.outputs.push_back("draws.json");
    }
    json summary{{"ate", boot.ate},
                 {"se_ate", boot.se_ate},
                 {"ci_ate", {boot.ci_ate_lo, boot.ci_ate_hi}},
                 {"b_completed", boot.b_completed}};
    std::ofstream sum_out(dir / "summary.json");
    sum_out << summary.dump(2) << '\n';
    manifest.outputs.push_back("summary.json");
  } else {
    EffectEstimates effects =
        mode == "avg"
            ? estimate_averaged(est_data, est_layout, averaged_splits, step)
            : estimate_effects(est_data, est_layout, split, step);
    write_effects_csv(effects, est_data, (dir / "effects.csv").string());
    manifest.outputs.push_back("effects.csv");
    std::ofstream sum_out(dir / "summary.json");
    sum_out << effects.to_json().dump(2) << '\n';
    manifest.outputs.push_back("summary.json");
  }
  manifest.write(dir);
  std::cout << "wrote " << (dir / "effects.csv").string() << '\n';
  return 0;
}

int run_select(const DataArgs& data_args, const std::string& target_text,
               int p_min, int p_max, const std::string& mode, int step_flag,
               int subsample, int max_splits, std::uint64_t seed,
               const std::string& out) {
  const fs::path dir = prepare_out_dir(out);
  Manifest manifest;
  manifest.command = "select";
  manifest.seed = seed;
  manifest.add_input(data_args.data_path);
  manifest.add_input(data_args.schema_path);
  manifest.config = {{"target", target_text}, {"p_min", p_min},
                     {"p_max", p_max},        {"mode", mode},
                     {"step", step_flag},     {"subsample", subsample},
                     {"max_splits", max_splits}};

  PanelDataset data = data_args.load();
  TreatmentLayout layout = derive_layout(data);
  SplitRng rng(seed);
  SplitRng sel_rng = rng.split(0x5E1);
  auto report = select_model(
      data, layout, parse_target(target_text), p_min, p_max, max_splits,
      mode == "avg" ? SelectionMode::averaging : SelectionMode::best_set,
      parse_step(step_flag), subsample, sel_rng);

  std::ofstream sel_out(dir / "selection.json");
  sel_out << report.to_json().dump(2) << '\n';
  manifest.outputs.push_back("selection.json");

  // Summary: one line per candidate p.
  std::ofstream csv(dir / "selection.csv");
  csv << "p,n_splits,best_split_mse,averaged_mse\n";
  std::cout << "p  splits  best MSE   averaged MSE\n";
  for (const auto& [p, per] : report.per_p) {
    const double best =
        per.split_mse[static_cast<std::size_t>(per.best_index)];
    csv << p << ',' << per.splits.size() << ',' << format_double(best) << ','
        << format_double(per.averaged_mse) << '\n';
    std::printf("%-2d %-7zu %-10.4f %-10.4f\n", p, per.splits.size(), best,
                per.averaged_mse);
  }
  manifest.outputs.push_back("selection.csv");
  std::cout << "best p = " << report.best_p << '\n';
  manifest.write(dir);
  return 0;
}

int run_bootstrap(const DataArgs& data_args, const std::string& target_text,
                  const std::string& split_path, int b, double alpha,
                  const std::string& ci, std::uint64_t seed, bool keep_draws,
                  const std::string& pretreat, int threads,
                  const std::string& out) {
  const fs::path dir = prepare_out_dir(out);
  Manifest manifest;
  manifest.command = "bootstrap";
  manifest.seed = seed;
  manifest.add_input(data_args.data_path);
  manifest.add_input(data_args.schema_path);
  manifest.add_input(split_path);
  manifest.config = {{"target", target_text}, {"b", b},
                     {"alpha", alpha},        {"ci", ci},
                     {"keep_draws", keep_draws}, {"pretreat_fit", pretreat},
                     {"threads", threads}};

  PanelDataset data = data_args.load();
  TreatmentLayout layout = derive_layout(data);
  const SplitSpec split = read_split_file(split_path);
  BootstrapOptions opts;
  opts.threads = threads;
  opts.pretreat_fit = pretreat == "control" ? PretreatFit::control_only
                                            : PretreatFit::pooled;
  auto boot =
      bootstrap_effects(data, layout, parse_target(target_text), split, b,
                        parse_ci(ci), alpha, SplitRng(seed).split(0xB007),
                        opts);
  write_bootstrap_csv(boot, data, (dir / "effects.csv").string());
  manifest.outputs.push_back("effects.csv");
  if (keep_draws) {
    std::ofstream draws_out(dir / "draws.json");
    draws_out << draws_to_json(boot).dump() << '\n';
    manifest.outputs.push_back("draws.json");
  }
  manifest.write(dir);
  std::cout << "ate " << boot.ate << "  se " << boot.se_ate << "  ci ["
            << boot.ci_ate_lo << ", " << boot.ci_ate_hi << "]\n";
  return 0;
}

ScenarioOptions scenario_from_json(const json& j) {
  ScenarioOptions opt;
  if (j.contains("estimator")) {
    const std::string e = j.at("estimator").get<std::string>();
    if (e == "gmm") opt.estimator = Estimator::gmm;
    else if (e == "gmm2") opt.estimator = Estimator::gmm2;
    else if (e == "lcm" || e == "ols") opt.estimator = Estimator::lcm;
    else if (e == "ife") opt.estimator = Estimator::ife;
    else if (e == "scm") opt.estimator = Estimator::scm;
    else throw ValidationError("unknown estimator: " + e);
  }
  if (j.contains("selection")) {
    const std::string s = j.at("selection").get<std::string>();
    if (s == "fixed-split") opt.selection = SimSelection::fixed_split;
    else if (s == "cv") opt.selection = SimSelection::cv;
    else throw ValidationError("unknown selection mode: " + s);
  }
  if (j.contains("selection_mode")) {
    const std::string s = j.at("selection_mode").get<std::string>();
    opt.selection_mode = s == "averaging" ? SelectionMode::averaging
                                          : SelectionMode::best_set;
  }
  opt.p = j.value("p", opt.p);
  opt.p_min = j.value("p_min", opt.p_min);
  opt.p_max = j.value("p_max", opt.p_max);
  opt.max_splits = j.value("max_splits", opt.max_splits);
  opt.loo_subsample = j.value("loo_subsample", opt.loo_subsample);
  opt.att_mode = j.value("att_mode", opt.att_mode);
  opt.inner_draws = j.value("inner_draws", opt.inner_draws);
  opt.with_coverage = j.value("with_coverage", opt.with_coverage);
  opt.b = j.value("b", opt.b);
  opt.alpha = j.value("alpha", opt.alpha);
  opt.ife_factors = j.value("ife_factors", opt.ife_factors);
  return opt;
}

int run_simulate(const std::string& config_path, std::uint64_t seed,
                 int threads, const std::string& out) {
  const fs::path dir = prepare_out_dir(out);
  Manifest manifest;
  manifest.command = "simulate";
  manifest.seed = seed;
  manifest.add_input(config_path);

  std::ifstream in(config_path);
  if (!in) throw ValidationError("cannot open config: " + config_path);
  json j;
  in >> j;
  const DgpConfig cfg = DgpConfig::from_json(j.value("dgp", json::object()));
  ScenarioOptions opt = scenario_from_json(j);
  opt.seed = seed;
  opt.threads = threads;
  manifest.config = {{"dgp", cfg.to_json()}, {"scenario", j}};

  const MetricReport report = run_scenario(cfg, opt);
  std::ofstream metrics_out(dir / "metrics.json");
  metrics_out << report.to_json().dump(2) << '\n';
  manifest.outputs.push_back("metrics.json");
  {
    std::ofstream csv(dir / "metrics.csv");
    csv << "ite_bias,ite_sd,ate_bias,ate_sd,coverage_ite,coverage_ate,"
           "p_selected,failures\n";
    auto opt_str = [](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string();
    };
    csv << format_double(report.ite_bias) << ',' << format_double(report.ite_sd)
        << ',' << format_double(report.ate_bias) << ','
        << format_double(report.ate_sd) << ',' << opt_str(report.coverage_ite)
        << ',' << opt_str(report.coverage_ate) << ','
        << opt_str(report.p_selected) << ',' << report.failures << '\n';
    manifest.outputs.push_back("metrics.csv");
  }
  manifest.write(dir);
  std::cout << "ITE bias " << report.ite_bias << "  ITE SD " << report.ite_sd
            << "  ATE bias " << report.ate_bias << "  ATE SD "
            << report.ate_sd;
  if (report.coverage_ate) std::cout << "  ATE coverage " << *report.coverage_ate;
  if (report.p_selected) std::cout << "  mean P " << *report.p_selected;
  std::cout << '\n';
  return 0;
}

int run_reproduce(int table, double scale, std::uint64_t seed, int threads,
                  const std::string& out) {
  const fs::path dir = prepare_out_dir(out);
  Manifest manifest;
  manifest.command = "reproduce";
  manifest.seed = seed;
  manifest.config = {{"table", table}, {"scale", scale}, {"threads", threads}};

  const TableResult result = reproduce_table(table, scale, seed, threads);
  const std::string csv_name = "table" + std::to_string(table) + ".csv";
  const std::string md_name = "table" + std::to_string(table) + ".md";
  result.write_csv((dir / csv_name).string());
  std::ofstream md(dir / md_name);
  md << result.to_markdown();
  manifest.outputs.push_back(csv_name);
  manifest.outputs.push_back(md_name);
  manifest.write(dir);
  std::cout << result.to_markdown();
  return 0;
}

int run_report(const std::string& effects_path, const std::string& chars_path,
               double alpha, const std::string& out) {
  const fs::path dir = prepare_out_dir(out);
  Manifest manifest;
  manifest.command = "report";
  manifest.add_input(effects_path);
  manifest.add_input(chars_path);
  manifest.config = {{"alpha", alpha}};

  const auto effects = read_effect_records(effects_path);
  const CsvTable chars = read_csv(chars_path);
  const GroupReport report = make_group_report(effects, chars, chars_path);
  report.write_csv((dir / "groups.csv").string());
  std::ofstream md(dir / "groups.md");
  md << report.to_markdown();
  manifest.outputs.push_back("groups.csv");
  manifest.outputs.push_back("groups.md");
  manifest.write(dir);
  std::cout << report.to_markdown();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Treatment effect estimation for short panels with multiple "
               "related outcomes"};
  app.require_subcommand(1);

  // estimate
  auto* estimate = app.add_subcommand(
      "estimate", "Select a split (unless given) and estimate effects");
  DataArgs est_data;
  est_data.attach(estimate);
  std::string est_target, est_split, est_mode = "best", est_ci = "percentile";
  std::string est_pretreat = "pooled", est_out = "out";
  int est_p = 2, est_p_max = -1, est_step = 2, est_b = 0;
  int est_subsample = 100, est_max_splits = 50, est_threads = 1;
  double est_alpha = 0.05;
  std::uint64_t est_seed = 0;
  bool est_holdout = false, est_keep_draws = false;
  estimate->add_option("--target", est_target, "target cell 'period:outcome'")
      ->required();
  estimate->add_option("--split", est_split, "split JSON file (skips selection)");
  estimate->add_option("--p", est_p, "regressor cells per split");
  estimate->add_option("--p-max", est_p_max, "scan p up to this value");
  estimate->add_option("--mode", est_mode, "best | avg")
      ->check(CLI::IsMember({"best", "avg"}));
  estimate->add_option("--step", est_step, "GMM steps (1 or 2)");
  estimate->add_option("--b", est_b, "bootstrap replicates (0 = none)");
  estimate->add_option("--alpha", est_alpha, "CI level");
  estimate->add_option("--ci", est_ci, "percentile | normal");
  estimate->add_option("--seed", est_seed, "RNG seed")
      ->envname("PANELITE_SEED");
  estimate->add_option("--subsample", est_subsample,
                       "leave-one-out individuals per group");
  estimate->add_option("--max-splits", est_max_splits, "splits per p");
  estimate->add_flag("--selection-holdout", est_holdout,
                     "select on a random half, estimate on the other");
  estimate->add_flag("--keep-draws", est_keep_draws, "write draws.json");
  estimate->add_option("--pretreat-fit", est_pretreat, "pooled | control")
      ->check(CLI::IsMember({"pooled", "control"}));
  estimate->add_option("--threads", est_threads, "worker threads")
      ->envname("PANELITE_THREADS");
  estimate->add_option("--out", est_out, "output directory")->required();

  // select
  auto* select_cmd = app.add_subcommand(
      "select", "Leave-one-out selection of the regressor cells");
  DataArgs sel_data;
  sel_data.attach(select_cmd);
  std::string sel_target, sel_mode = "best", sel_out = "out";
  int sel_p_min = 1, sel_p_max = 3, sel_step = 2;
  int sel_subsample = 100, sel_max_splits = 50;
  std::uint64_t sel_seed = 0;
  select_cmd->add_option("--target", sel_target, "target cell 'period:outcome'")
      ->required();
  select_cmd->add_option("--p-min", sel_p_min, "smallest p");
  select_cmd->add_option("--p-max", sel_p_max, "largest p");
  select_cmd->add_option("--mode", sel_mode, "best | avg")
      ->check(CLI::IsMember({"best", "avg"}));
  select_cmd->add_option("--step", sel_step, "GMM steps (1 or 2)");
  select_cmd->add_option("--subsample", sel_subsample,
                         "leave-one-out individuals per group");
  select_cmd->add_option("--max-splits", sel_max_splits, "splits per p");
  select_cmd->add_option("--seed", sel_seed, "RNG seed")
      ->envname("PANELITE_SEED");
  select_cmd->add_option("--out", sel_out, "output directory")->required();

  // bootstrap
  auto* boot = app.add_subcommand("bootstrap",
                                  "Parametric bootstrap for a fixed split");
  DataArgs boot_data;
  boot_data.attach(boot);
  std::string boot_target, boot_split, boot_ci = "percentile";
  std::string boot_pretreat = "pooled", boot_out = "out";
  int boot_b = 600, boot_threads = 1;
  double boot_alpha = 0.05;
  std::uint64_t boot_seed = 0;
  bool boot_keep = false;
  bool boot_seed_set = false;
  boot->add_option("--target", boot_target, "target cell 'period:outcome'")
      ->required();
  boot->add_option("--split", boot_split, "split JSON file")->required();
  boot->add_option("--b", boot_b, "bootstrap replicates")->required();
  boot->add_option("--alpha", boot_alpha, "CI level");
  boot->add_option("--ci", boot_ci, "percentile | normal");
  boot->add_option_function<std::uint64_t>(
          "--seed",
          [&](const std::uint64_t& v) {
            boot_seed = v;
            boot_seed_set = true;
          },
          "RNG seed (required)")
      ->envname("PANELITE_SEED");
  boot->add_flag("--keep-draws", boot_keep, "write draws.json");
  boot->add_option("--pretreat-fit", boot_pretreat, "pooled | control")
      ->check(CLI::IsMember({"pooled", "control"}));
  boot->add_option("--threads", boot_threads, "worker threads")
      ->envname("PANELITE_THREADS");
  boot->add_option("--out", boot_out, "output directory")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run one Monte Carlo scenario");
  std::string sim_config, sim_out = "out";
  int sim_threads = 1;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  sim->add_option("--config", sim_config, "scenario JSON")->required();
  sim->add_option_function<std::uint64_t>(
         "--seed",
         [&](const std::uint64_t& v) {
           sim_seed = v;
           sim_seed_set = true;
         },
         "RNG seed (required)")
      ->envname("PANELITE_SEED");
  sim->add_option("--threads", sim_threads, "worker threads")
      ->envname("PANELITE_THREADS");
  sim->add_option("--out", sim_out, "output directory")->required();

  // reproduce
  auto* rep = app.add_subcommand("reproduce",
                                 "Reproduce a simulation table at scale");
  int rep_table = 2;
  double rep_scale = 0.1;
  int rep_threads = 1;
  std::uint64_t rep_seed = 0;
  bool rep_seed_set = false;
  std::string rep_out = "out";
  rep->add_option("--table", rep_table, "table id (1-5)")->required();
  rep->add_option("--scale", rep_scale, "replication fraction of 1000 draws");
  rep->add_option_function<std::uint64_t>(
         "--seed",
         [&](const std::uint64_t& v) {
           rep_seed = v;
           rep_seed_set = true;
         },
         "RNG seed (required)")
      ->envname("PANELITE_SEED");
  rep->add_option("--threads", rep_threads, "worker threads")
      ->envname("PANELITE_THREADS");
  rep->add_option("--out", rep_out, "output directory")->required();

  // report
  auto* grp = app.add_subcommand(
      "report", "Significance-group characteristic comparison");
  std::string grp_effects, grp_chars, grp_out = "out";
  double grp_alpha = 0.10;
  grp->add_option("--effects", grp_effects, "effects CSV with significance")
      ->required();
  grp->add_option("--characteristics", grp_chars, "characteristics CSV")
      ->required();
  grp->add_option("--alpha", grp_alpha, "significance level of the labels");
  grp->add_option("--out", grp_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (estimate->parsed()) {
      if (est_b > 0 && estimate->count("--seed") == 0) {
        throw ValidationError("--seed is required when bootstrapping");
      }
      return run_estimate(est_data, est_target, est_split, est_p, est_p_max,
                          est_mode, est_step, est_b, est_alpha, est_ci,
                          est_seed, est_subsample, est_max_splits, est_holdout,
                          est_keep_draws, est_pretreat, est_threads, est_out);
    }
    if (select_cmd->parsed()) {
      return run_select(sel_data, sel_target, sel_p_min, sel_p_max, sel_mode,
                        sel_step, sel_subsample, sel_max_splits, sel_seed,
                        sel_out);
    }
    if (boot->parsed()) {
      if (!boot_seed_set) {
        throw ValidationError("--seed is required for bootstrap");
      }
      return run_bootstrap(boot_data, boot_target, boot_split, boot_b,
                           boot_alpha, boot_ci, boot_seed, boot_keep,
                           boot_pretreat, boot_threads, boot_out);
    }
    if (sim->parsed()) {
      if (!sim_seed_set) {
        throw ValidationError("--seed is required for simulate");
      }
      return run_simulate(sim_config, sim_seed, sim_threads, sim_out);
    }
    if (rep->parsed()) {
      if (!rep_seed_set) {
        throw ValidationError("--seed is required for reproduce");
      }
      return run_reproduce(rep_table, rep_scale, rep_seed, rep_threads,
                           rep_out);
    }
    if (grp->parsed()) {
      return run_report(grp_effects, grp_chars, grp_alpha, grp_out);
    }
  } catch (const ValidationError& e) {
    std::cerr << nlohmann::json{{"error", "validation"},
                                {"message", e.what()}}
                     .dump()
              << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << nlohmann::json{{"error", "estimation"},
                                {"message", e.what()}}
                     .dump()
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}
                     .dump()
              << '\n';
    return 1;
  }
  return 0;
}
