// Command-line front end: run, batch, report, calibrate, validate.
//
// Exit codes: 0 success, 1 invalid input (scenario, log, calibration data,
// usage), 2 file I/O failure.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coopmod/coopmod.hpp"

namespace fs = std::filesystem;
using namespace coopmod;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitIo = 2;

int verbosity = 0;

void note(const std::string& text) {
  if (verbosity > 0) std::cerr << text << '\n';
}

fs::path scenario_dir_default() {
  if (const char* env = std::getenv("COOPMOD_SCENARIO_DIR")) return env;
  return "scenarios";
}

/// Bare names that do not exist locally are looked up in the scenario dir.
fs::path resolve_scenario(const fs::path& p) {
  if (fs::exists(p) || p.is_absolute()) return p;
  const fs::path alt = scenario_dir_default() / p;
  return fs::exists(alt) ? alt : p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw sim::IoError("cannot write " + p.string());
  return out;
}

/// Maps exceptions to exit codes; user errors never escape as crashes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const sim::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

void write_log(const sim::EventLog& log, const fs::path& out) {
  auto file = open_out(out);
  log.write_jsonl(file);
  if (!file) throw sim::IoError("failed writing " + out.string());
}

int cmd_run(const fs::path& scenario_path, std::optional<std::uint64_t> seed, const std::string& out,
            const std::string& series) {
  const auto sc = sim::load_scenario(resolve_scenario(scenario_path));
  sim::RunOptions opts;
  opts.seed = seed;
  opts.collect_series = !series.empty();
  const auto result = sim::run(sc, opts);
  if (out.empty() || out == "-") {
    result.log.write_jsonl(std::cout);
  } else {
    write_log(result.log, out);
    note("wrote " + std::to_string(result.log.records.size()) + " records to " + out);
  }
  if (!series.empty()) {
    auto file = open_out(series);
    sim::write_series_csv(file, result.series);
  }
  return kExitOk;
}

int cmd_batch(const fs::path& dir, const fs::path& out_dir, unsigned jobs, std::optional<std::uint64_t> seed) {
  if (!fs::is_directory(dir)) throw sim::IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  fs::create_directories(out_dir);

  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  int worst = kExitOk;
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      const auto& f = files[i];
      const fs::path out = out_dir / (f.stem().string() + ".jsonl");
      std::string message;
      const int code = [&] {
        try {
          const auto sc = sim::load_scenario(f);
          sim::RunOptions opts;
          opts.seed = seed;
          write_log(sim::run(sc, opts).log, out);
          message = f.string() + " -> " + out.string();
          return kExitOk;
        } catch (const sim::IoError& e) {
          message = f.string() + ": " + e.what();
          return kExitIo;
        } catch (const std::exception& e) {
          message = f.string() + ": " + e.what();
          return kExitInvalid;
        }
      }();
      std::lock_guard lock(report_mutex);
      if (code != kExitOk) {
        std::cerr << "error: " << message << '\n';
      } else {
        note(message);
      }
      worst = std::max(worst, code);
    }
  };
  jobs = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(files.size(), 1))));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return worst;
}

int cmd_report(const fs::path& log_path, std::optional<std::uint32_t> subject, std::optional<std::uint32_t> robot,
               const std::string& format) {
  std::ifstream in(log_path);
  if (!in) throw sim::IoError("cannot open log " + log_path.string());
  const auto log = sim::EventLog::read_jsonl(in);
  kpi::Subjects who;
  who.vehicle_id = subject;
  who.robot_id = robot;
  const auto rep = kpi::compute(log, who);
  if (format == "json") {
    std::cout << kpi::to_json(rep).dump(2) << '\n';
  } else {
    std::cout << kpi::to_csv(rep);
  }
  return kExitOk;
}

int cmd_calibrate(const fs::path& input, int order) {
  const auto set = calib::load_calibration_csv(input.string());
  const auto model = calib::fit(set, order);
  nlohmann::json out = {{"order", model.order()}, {"weights", model.weights()}, {"points", set.size()}};
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int cmd_validate(const fs::path& path) {
  const auto sc = sim::load_scenario(resolve_scenario(path));
  std::cout << path.string() << ": ok (" << sc.entities.size() << " entities, " << sc.duration_s << " s)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coopmod simulator"};
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", verbosity, "Progress messages on stderr");

  auto* run = app.add_subcommand("run", "Run one scenario and write its event log");
  std::string run_scenario;
  std::optional<std::uint64_t> run_seed;
  std::string run_out;
  std::string run_series;
  run->add_option("--scenario", run_scenario, "Scenario JSON")->required();
  run->add_option("--seed", run_seed, "Override the scenario seed");
  run->add_option("--out", run_out, "Event log path (stdout when omitted)");
  run->add_option("--series", run_series, "Also write a CSV time series for plotting");

  auto* batch = app.add_subcommand("batch", "Run every *.json scenario in a directory");
  std::string batch_dir = scenario_dir_default().string();
  std::string batch_out = "logs";
  unsigned batch_jobs = std::max(1U, std::thread::hardware_concurrency());
  std::optional<std::uint64_t> batch_seed;
  batch->add_option("--dir", batch_dir, "Scenario directory (default: $COOPMOD_SCENARIO_DIR or ./scenarios)");
  batch->add_option("--out-dir", batch_out, "Directory for the logs");
  batch->add_option("--jobs", batch_jobs, "Parallel workers")->check(CLI::PositiveNumber);
  batch->add_option("--seed", batch_seed, "Override every scenario seed");

  auto* report = app.add_subcommand("report", "Compute KPIs from an event log");
  std::string report_log;
  std::optional<std::uint32_t> report_subject;
  std::optional<std::uint32_t> report_robot;
  std::string report_format = "csv";
  report->add_option("--log", report_log, "Event log (JSON lines)")->required();
  report->add_option("--subject", report_subject, "Subject vehicle station id");
  report->add_option("--robot", report_robot, "Robot station id (default: from the log header)");
  report->add_option("--format", report_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* calibrate = app.add_subcommand("calibrate", "Fit a distance polynomial from (s, d) pairs");
  std::string calib_input;
  int calib_order = 2;
  calibrate->add_option("--input", calib_input, "CSV with header line and s,d rows")->required();
  calibrate->add_option("--order", calib_order, "Polynomial order")->check(CLI::NonNegativeNumber);

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  std::string validate_file;
  validate->add_option("file", validate_file, "Scenario JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  if (*run) return guarded([&] { return cmd_run(run_scenario, run_seed, run_out, run_series); });
  if (*batch) return guarded([&] { return cmd_batch(batch_dir, batch_out, batch_jobs, batch_seed); });
  if (*report) return guarded([&] { return cmd_report(report_log, report_subject, report_robot, report_format); });
  if (*calibrate) return guarded([&] { return cmd_calibrate(calib_input, calib_order); });
  if (*validate) return guarded([&] { return cmd_validate(validate_file); });
  return kExitInvalid;
}
