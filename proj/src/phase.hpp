#pragma once

#include <optional>
#include <string>
#include <vector>

#include "state_evolution.hpp"

namespace bifamp {

// Parameters a sweep / bisection can move along.
enum class SweepParam { pi, alpha, rho, delta, epsilon, eta, psi1 };

const char* to_string(SweepParam p);
SweepParam sweep_param_from_string(const std::string& name);

ProblemSpec with_param(const ProblemSpec& base, SweepParam param, double value);

struct ThresholdValue {
  bool exists = false;
  double value = 0.0;
  std::string method;  // "closed-form" | "bisection"
  double bracket_width = 0.0;
  std::string note;
};

struct ThresholdReport {
  SweepParam param = SweepParam::pi;
  ThresholdValue counting;
  ThresholdValue informative_stability;
  ThresholdValue uninformative_stability;
  ThresholdValue spinodal;      // filled by find_spinodal
  ThresholdValue first_order;   // filled by find_first_order
  double jacobian_mismatch = 0.0;  // closed form vs numeric-Jacobian crossing
};

// Dimension-counting bound for exact noiseless recovery, as a threshold on
// the application's natural sweep parameter.
ThresholdValue counting_bound(const ProblemSpec& problem);

// Closed-form linear-stability thresholds plus a numeric-Jacobian
// cross-check of the spectral-radius-1 crossing.
ThresholdReport stability_thresholds(const ProblemSpec& problem);

SweepParam natural_sweep_param(const ProblemSpec& problem);

// Uninformative-init SE reaches the recovered phase?
bool se_recovers(const ProblemSpec& problem, const SeOptions& options = {});

// Bisection on the recovery indicator of the uninformative-init SE.
ThresholdValue find_spinodal(const ProblemSpec& base, SweepParam param, double lo,
                             double hi, double width = 1e-3);

// Bisection on "two distinct fixed points exist and the planted one has the
// larger replica free entropy".
ThresholdValue find_first_order(const ProblemSpec& base, SweepParam param, double lo,
                                double hi, double width = 1e-3);

// --- parameter-grid sweeps ---------------------------------------------

struct SweepAxis {
  SweepParam param;
  std::vector<double> values;
  static SweepAxis linspace(SweepParam p, double from, double to, int count);
};

struct SweepRow {
  std::vector<double> coords;
  MmseReport report;
  bool failed = false;
  std::string error;
};

// One mmse_select per grid point, rows in lexicographic axis order,
// computed on the worker pool. Per-point failures are recorded in-row.
std::vector<SweepRow> sweep_grid(const ProblemSpec& base,
                                 const std::vector<SweepAxis>& axes,
                                 const SeOptions& options = {});

}  // namespace bifamp
