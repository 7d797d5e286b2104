#pragma once

#include <map>
#include <string>

#include "amp.hpp"
#include "bethe.hpp"
#include "phase.hpp"
#include "rbp.hpp"
#include "state_evolution.hpp"

namespace bifamp {

// Output of one command: a JSON summary plus named CSV tables (and, for
// sweeps, a gnuplot script under "plot").
struct RunOutput {
  nlohmann::json summary;
  std::map<std::string, std::string> tables;
  bool converged = true;
};

// Parsed top-level configuration document. Unknown keys anywhere are
// rejected; see docs/FORMATS.md.
struct RunConfig {
  nlohmann::json raw;
  ProblemSpec problem;
  bool has_problem = false;
  int n = 0;
  std::uint64_t seed = 1;
  std::string instance_path;  // amp input alternative to inline generation
  AmpOptions amp;
  SeOptions se;
  nlohmann::json thresholds;  // optional numeric-threshold requests
  nlohmann::json phase;       // sweep axes
  int threads = 0;
  // CLI-owned keys (validated here, consumed by the tool)
  std::string out_path, trace_path;
  bool emit_plot = false;
  bool strict = false;

  static RunConfig parse(const std::string& json_text);
};

RunOutput run_amp(const Instance& instance, const RunConfig& config);
RunOutput run_se(const RunConfig& config);
RunOutput run_thresholds(const RunConfig& config);
RunOutput run_phase(const RunConfig& config);

// Shared formatting: shortest-round-trip decimal for doubles.
std::string format_double(double v);

}  // namespace bifamp
