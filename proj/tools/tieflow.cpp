// Command-line front end: run a scheduler, map the expected cost, compare runs.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tieflow/tieflow.hpp"

namespace fs = std::filesystem;
using tieflow::report::Json;

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kCaseError = 2,
  kInfeasible = 3,
  kMaxCycles = 4,
  kEstimation = 5,
  kIo = 6,
};

struct CommonArgs {
  std::string case_path;
  std::string out = ".";
  std::uint64_t seed = 1;
  std::size_t samples = 0;  // 0: case default, else 1000
  unsigned threads = 0;
};

struct RunArgs {
  std::string mode = "sibis";
  double epsilon = -1.0;
  double bisection_tol = -1.0;
  std::size_t horizon = 20;
  std::size_t max_cycles = 0;
  std::string q0;
};

struct OracleArgs {
  double grid_step = 1.0;
  std::string center;
  double radius = 0.0;
};

struct CompareArgs {
  std::vector<std::string> summaries;
  std::uint64_t oos_seed = 0x5eed0f5;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

tieflow::SchedulerConfig make_config(const tieflow::CaseSystem& sys, const CommonArgs& common,
                                     const RunArgs& run) {
  tieflow::SchedulerConfig cfg;
  const auto& d = sys.defaults;
  if (d.q0) cfg.q0 = *d.q0;
  if (d.epsilon) cfg.epsilon = *d.epsilon;
  if (d.bisection_tol) cfg.bisection_tol = *d.bisection_tol;
  if (d.samples) cfg.samples = *d.samples;
  if (d.max_cycles) cfg.max_cycles = *d.max_cycles;
  if (common.samples > 0) cfg.samples = common.samples;
  if (run.epsilon >= 0.0) cfg.epsilon = run.epsilon;
  if (run.bisection_tol > 0.0) cfg.bisection_tol = run.bisection_tol;
  if (run.max_cycles > 0) cfg.max_cycles = run.max_cycles;
  if (!run.q0.empty()) cfg.q0 = parse_list(run.q0);
  cfg.seed = common.seed;
  cfg.horizon = run.horizon;
  cfg.eval.threads = common.threads;
  if (run.mode == "sibis")
    cfg.mode = tieflow::Mode::sibis;
  else if (run.mode == "aibis")
    cfg.mode = tieflow::Mode::aibis;
  else if (run.mode == "ce")
    cfg.mode = tieflow::Mode::ce;
  else
    throw std::invalid_argument("unknown mode '" + run.mode + "'");
  return cfg;
}

int cmd_run(const CommonArgs& common, const RunArgs& args) {
  const auto sys = tieflow::load_case(common.case_path);
  const auto cfg = make_config(sys, common, args);
  const tieflow::DispatchSystem dispatch(sys);

  const auto start = std::chrono::steady_clock::now();
  tieflow::ScheduleTrace trace;
  switch (cfg.mode) {
    case tieflow::Mode::sibis: trace = tieflow::run_sibis(dispatch, sys.net_load, cfg); break;
    case tieflow::Mode::ce: trace = tieflow::run_ce(dispatch, sys.net_load, cfg); break;
    case tieflow::Mode::aibis: {
      std::vector<tieflow::NetLoadModel> models = sys.net_load_series;
      if (models.empty()) models.push_back(sys.net_load);
      trace = tieflow::run_aibis(dispatch, models, cfg);
      break;
    }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  fs::create_directories(common.out);
  std::ostringstream csv;
  tieflow::report::write_trace_csv(csv, sys, trace);
  write_text(fs::path(common.out) / "trace.csv", csv.str());
  const tieflow::report::RunProvenance prov{common.case_path, cfg.samples, cfg.seed};
  write_text(fs::path(common.out) / "summary.json",
             dump(tieflow::report::summary_json(sys, trace, cfg, prov)));
  write_text(fs::path(common.out) / "timing.json",
             dump(Json{{"wall_time_s", seconds}, {"threads", cfg.eval.threads}}));

  const auto& q = trace.final_q();
  std::cout << to_string(trace.mode) << " " << to_string(trace.status) << " after "
            << trace.steps.size() << " updates; q =";
  for (Eigen::Index i = 0; i < q.size(); ++i) std::cout << " " << tieflow::report::fmt9(q[i]);
  std::cout << "; expected cost " << tieflow::report::fmt9(trace.final_cost()) << "\n";
  return trace.status == tieflow::TraceStatus::max_cycles ? kMaxCycles : kOk;
}

int cmd_oracle(const CommonArgs& common, const OracleArgs& args) {
  const auto sys = tieflow::load_case(common.case_path);
  const tieflow::DispatchSystem dispatch(sys);
  const std::size_t samples =
      common.samples > 0 ? common.samples : sys.defaults.samples.value_or(1000);
  const auto scenarios = tieflow::sample_scenarios(sys.net_load, samples, common.seed);

  std::vector<tieflow::GridAxis> axes;
  if (!args.center.empty()) {
    const auto c = parse_list(args.center);
    if (c.size() != sys.interface_count())
      throw std::invalid_argument("--center needs one value per interface");
    if (!(args.radius > 0.0)) throw std::invalid_argument("--radius must be positive with --center");
    axes = tieflow::window_grid(sys, Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())),
                                args.radius, args.grid_step);
  } else {
    if (sys.interface_count() > 2)
      throw std::invalid_argument("full grids need at most 2 interfaces; use --center/--radius");
    axes = tieflow::bounds_grid(sys, args.grid_step);
  }
  tieflow::EvalOptions opts;
  opts.threads = common.threads;
  const auto map = tieflow::grid_search(dispatch, scenarios, axes, opts);

  fs::create_directories(common.out);
  std::ostringstream csv;
  tieflow::report::write_costmap_csv(csv, sys, map);
  write_text(fs::path(common.out) / "costmap.csv", csv.str());
  const tieflow::report::RunProvenance prov{common.case_path, samples, common.seed};
  write_text(fs::path(common.out) / "costmap.json", dump(tieflow::report::costmap_json(sys, map, prov)));
  std::cout << "argmin";
  for (Eigen::Index i = 0; i < map.argmin.size(); ++i)
    std::cout << " " << tieflow::report::fmt9(map.argmin[i]);
  std::cout << " expected cost " << tieflow::report::fmt9(map.min_cost) << "\n";
  return kOk;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open summary '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw tieflow::CaseError("summary '" + path + "': " + e.what());
  }
}

int cmd_compare(const CommonArgs& common, const CompareArgs& args) {
  if (args.summaries.size() < 2) throw std::invalid_argument("compare needs at least two --summary files");
  const auto sys = tieflow::load_case(common.case_path);
  const tieflow::DispatchSystem dispatch(sys);
  const std::size_t samples = common.samples > 0 ? common.samples : 10000;
  const auto fresh = tieflow::sample_scenarios(sys.net_load, samples, args.oos_seed);
  tieflow::EvalOptions opts;
  opts.threads = common.threads;

  std::vector<Json> rows;
  for (const auto& path : args.summaries) {
    const auto s = read_json(path);
    if (s.value("case_hash", std::string()) != sys.source_hash)
      throw tieflow::CaseError("summary '" + path + "' was produced from a different case");
    const auto qv = s.at("q").get<std::vector<double>>();
    if (qv.size() != sys.interface_count())
      throw tieflow::CaseError("summary '" + path + "' has the wrong number of interfaces");
    const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(qv.data(), static_cast<Eigen::Index>(qv.size()));
    const auto oos = tieflow::expected_cost(dispatch, q, fresh, opts);
    const auto oos_prices = tieflow::expected_prices(dispatch, q, fresh, opts);
    Json row;
    row["summary"] = path;
    row["method"] = s.at("mode");
    row["seed"] = s.at("seed");
    row["q"] = tieflow::report::vec9(q);
    row["prices_in_sample"] = s.value("prices", Json::object());
    row["expected_cost_in_sample"] = s.value("expected_cost", Json());
    row["prices_out_of_sample"] = tieflow::report::prices_json(sys, oos_prices);
    row["expected_cost_out_of_sample"] = tieflow::report::num9(oos.mean);
    row["cost_stderr_out_of_sample"] = tieflow::report::num9(oos.stderr_);
    rows.push_back(std::move(row));
  }

  // Deltas relative to the first summary.
  const auto& base = rows.front();
  const auto base_q = base.at("q").get<std::vector<double>>();
  for (auto& row : rows) {
    const auto q = row.at("q").get<std::vector<double>>();
    Json dq = Json::array();
    for (std::size_t i = 0; i < q.size(); ++i) dq.push_back(tieflow::report::num9(q[i] - base_q[i]));
    Json delta;
    delta["q"] = dq;
    delta["expected_cost_out_of_sample"] = tieflow::report::num9(
        row.at("expected_cost_out_of_sample").get<double>() - base.at("expected_cost_out_of_sample").get<double>());
    if (row.at("expected_cost_in_sample").is_number() && base.at("expected_cost_in_sample").is_number())
      delta["expected_cost_in_sample"] = tieflow::report::num9(
          row.at("expected_cost_in_sample").get<double>() - base.at("expected_cost_in_sample").get<double>());
    row["delta_vs_first"] = delta;
  }

  Json out;
  out["case"] = sys.name;
  out["case_hash"] = sys.source_hash;
  out["out_of_sample_seed"] = args.oos_seed;
  out["out_of_sample_samples"] = samples;
  out["methods"] = rows;
  fs::create_directories(common.out);
  write_text(fs::path(common.out) / "compare.json", dump(out));
  for (const auto& row : rows)
    std::cout << row.at("method").get<std::string>() << ": out-of-sample expected cost "
              << tieflow::report::fmt9(row.at("expected_cost_out_of_sample").get<double>()) << "\n";
  return kOk;
}

void add_common(CLI::App* sub, CommonArgs& common) {
  sub->add_option("--case", common.case_path, "Case file")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", common.out, "Output directory");
  sub->add_option("--seed", common.seed, "Scenario seed");
  sub->add_option("--samples", common.samples, "Scenario count M");
  sub->add_option("--threads", common.threads, "Worker threads (default: TIEFLOW_THREADS or 1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tieflow: multi-area interchange scheduling under net-load uncertainty"};
  app.require_subcommand(1);

  CommonArgs common;
  RunArgs run;
  OracleArgs oracle;
  CompareArgs compare;

  auto* run_cmd = app.add_subcommand("run", "Schedule interchange with sibis, aibis or ce");
  add_common(run_cmd, common);
  run_cmd->add_option("--mode", run.mode, "sibis | aibis | ce")
      ->check(CLI::IsMember({"sibis", "aibis", "ce"}));
  run_cmd->add_option("--epsilon", run.epsilon, "Cycle termination tolerance (MW)");
  run_cmd->add_option("--bisection-tol", run.bisection_tol, "Interface search tolerance (MW)");
  run_cmd->add_option("--horizon", run.horizon, "AIBIS time steps");
  run_cmd->add_option("--max-cycles", run.max_cycles, "Cycle limit for sibis/ce");
  run_cmd->add_option("--q0", run.q0, "Initial interchange, comma separated");

  auto* oracle_cmd = app.add_subcommand("oracle", "Grid-search the expected cost map");
  add_common(oracle_cmd, common);
  oracle_cmd->add_option("--grid-step", oracle.grid_step, "Grid step (MW)");
  oracle_cmd->add_option("--center", oracle.center, "Window center, comma separated");
  oracle_cmd->add_option("--radius", oracle.radius, "Window half-width (MW)");

  auto* compare_cmd = app.add_subcommand("compare", "Compare run summaries out of sample");
  add_common(compare_cmd, common);
  compare_cmd->add_option("--summary", compare.summaries, "summary.json files")->required();
  compare_cmd->add_option("--oos-seed", compare.oos_seed, "Seed of the fresh evaluation set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(common, run);
    if (*oracle_cmd) return cmd_oracle(common, oracle);
    if (*compare_cmd) return cmd_compare(common, compare);
  } catch (const tieflow::CaseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCaseError;
  } catch (const tieflow::NetworkError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCaseError;
  } catch (const tieflow::InfeasibleDispatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const tieflow::EstimationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kEstimation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
