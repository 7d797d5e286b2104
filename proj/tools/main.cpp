// bifamp command-line tool. Thin shell over the shared library's C API:
// it assembles the config document, dispatches the run, and writes the
// JSON / CSV outputs atomically.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "bifamp/bifamp.h"
#include "json.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitUnconverged = 4;

[[noreturn]] void die(int code, const std::string& message) {
  std::cerr << "bifamp: " << message << "\n";
  std::exit(code);
}

int status_to_exit(bifamp_status status) {
  switch (status) {
    case BIFAMP_OK: return 0;
    case BIFAMP_ERR_CONFIG:
    case BIFAMP_ERR_INVALID: return kExitConfig;
    case BIFAMP_ERR_UNCONVERGED: return kExitUnconverged;
    default: return kExitNumeric;
  }
}

void check(bifamp_status status) {
  if (status != BIFAMP_OK) die(status_to_exit(status), bifamp_last_error());
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) die(kExitNumeric, "cannot open '" + tmp.string() + "' for writing");
    os << content;
    if (!os) die(kExitNumeric, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) die(kExitNumeric, "rename failed for '" + target.string() + "'");
}

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::string trace_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool strict = false;
  bool emit_plot = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--out", args.out_path, "output path");
  cmd->add_option("--trace-out", args.trace_path, "per-iteration CSV path");
  cmd->add_option("--seed", args.seed, "random seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_option("--threads", args.threads, "worker pool size");
  cmd->add_flag("--strict", args.strict, "exit 4 when the run does not converge");
  cmd->add_flag("--emit-plot", args.emit_plot, "also write a gnuplot script");
}

// Load the config file (if any) and fold the command-line overrides in.
nlohmann::json build_config(const CommonArgs& args) {
  nlohmann::json config = nlohmann::json::object();
  if (!args.config_path.empty()) {
    std::ifstream is(args.config_path);
    if (!is) die(kExitConfig, "cannot open config '" + args.config_path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    try {
      config = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
      die(kExitConfig, std::string("config parse error: ") + e.what());
    }
  }
  if (args.seed_set) config["seed"] = args.seed;
  if (args.threads > 0) config["threads"] = args.threads;
  if (!args.out_path.empty()) config["out"] = args.out_path;
  if (!args.trace_path.empty()) config["trace_out"] = args.trace_path;
  if (args.strict) config["strict"] = true;
  if (args.emit_plot) config["emit_plot"] = true;
  return config;
}

std::string out_or(const nlohmann::json& config, const std::string& fallback) {
  if (config.contains("out")) return config.at("out").get<std::string>();
  return fallback;
}

void apply_threads(const nlohmann::json& config) {
  if (config.contains("threads"))
    bifamp_set_threads(config.at("threads").get<int>());
}

int finish(bifamp_result* result, const nlohmann::json& config,
           const std::string& default_out, const char* table,
           const std::string& table_suffix) {
  std::string json_path = out_or(config, default_out);
  write_atomic(json_path, std::string(bifamp_result_json(result)) + "\n");
  if (table) {
    const char* csv = bifamp_result_table(result, table);
    if (csv) {
      std::string csv_path = json_path;
      auto dot = csv_path.rfind('.');
      if (dot != std::string::npos) csv_path.resize(dot);
      csv_path += table_suffix;
      if (config.contains("trace_out"))
        csv_path = config.at("trace_out").get<std::string>();
      write_atomic(csv_path, csv);
      std::cerr << "bifamp: wrote " << csv_path << "\n";
    }
  }
  const char* plot = bifamp_result_table(result, "plot");
  if (plot) {
    std::string plot_path = json_path + ".gp";
    write_atomic(plot_path, plot);
    std::cerr << "bifamp: wrote " << plot_path << "\n";
  }
  std::cerr << "bifamp: wrote " << json_path << "\n";
  bool strict = config.contains("strict") && config.at("strict").get<bool>();
  int converged = bifamp_result_converged(result);
  bifamp_result_free(result);
  if (strict && !converged) return kExitUnconverged;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayes-optimal matrix factorization: AMP solvers, state "
               "evolution, and phase diagrams"};
  app.require_subcommand(1);
  app.set_version_flag("--version", bifamp_version());

  CommonArgs gen_args, amp_args, se_args, thr_args, phase_args;
  std::string amp_instance;

  CLI::App* gen = app.add_subcommand("gen", "generate a teacher-student instance");
  add_common(gen, gen_args);
  CLI::App* amp = app.add_subcommand("amp", "run GAMP on an instance");
  add_common(amp, amp_args);
  amp->add_option("--instance", amp_instance, "instance file (else generated inline)");
  CLI::App* se = app.add_subcommand("se", "run the state-evolution recursion");
  add_common(se, se_args);
  CLI::App* thr = app.add_subcommand("thresholds", "compute phase-transition thresholds");
  add_common(thr, thr_args);
  CLI::App* phase = app.add_subcommand("phase", "sweep a parameter grid");
  add_common(phase, phase_args);

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    nlohmann::json config = build_config(gen_args);
    apply_threads(config);
    bifamp_instance* inst = nullptr;
    check(bifamp_generate(config.dump().c_str(), &inst));
    std::string path = out_or(config, "instance.bin");
    check(bifamp_instance_save(inst, path.c_str()));
    char* info = nullptr;
    check(bifamp_instance_info(inst, &info));
    std::cerr << "bifamp: wrote " << path << "\n" << info << "\n";
    bifamp_string_free(info);
    bifamp_instance_free(inst);
    return 0;
  }

  if (amp->parsed()) {
    nlohmann::json config = build_config(amp_args);
    apply_threads(config);
    if (!amp_instance.empty()) config["instance"] = amp_instance;
    bifamp_instance* inst = nullptr;
    if (config.contains("instance")) {
      check(bifamp_instance_load(config.at("instance").get<std::string>().c_str(),
                                 &inst));
    } else {
      check(bifamp_generate(config.dump().c_str(), &inst));
    }
    bifamp_result* result = nullptr;
    bifamp_status status = bifamp_amp(inst, config.dump().c_str(), &result);
    bifamp_instance_free(inst);
    check(status);
    return finish(result, config, "amp_result.json", "trace", "_trace.csv");
  }

  if (se->parsed()) {
    nlohmann::json config = build_config(se_args);
    apply_threads(config);
    bifamp_result* result = nullptr;
    check(bifamp_se(config.dump().c_str(), &result));
    return finish(result, config, "se_result.json", "trajectory", "_trajectory.csv");
  }

  if (thr->parsed()) {
    nlohmann::json config = build_config(thr_args);
    apply_threads(config);
    bifamp_result* result = nullptr;
    check(bifamp_thresholds(config.dump().c_str(), &result));
    return finish(result, config, "thresholds.json", nullptr, "");
  }

  nlohmann::json config = build_config(phase_args);
  apply_threads(config);
  bifamp_result* result = nullptr;
  check(bifamp_phase(config.dump().c_str(), &result));
  return finish(result, config, "phase_result.json", "grid", "_grid.csv");
}
