#pragma once

#include <vector>

#include "problem.hpp"

namespace bifamp {

// Scalar order parameters on the Nishimori line. m_f has one entry per
// psi component for factor analysis and exactly one entry otherwise.
struct SeState {
  double m_x = 0.0;
  std::vector<double> m_f = {0.0};

  double m_f_mean(const std::vector<double>& weights) const;
};

enum class SeInit { uninformative, informative, custom };

struct SeOptions {
  SeInit init = SeInit::uninformative;
  double m_x0 = 0.0, m_f0 = 0.0;  // used by SeInit::custom
  double tolerance = 1e-12;
  long max_iterations = 100000;
  int quadrature_order = 40;
  double symmetry_seed = 1e-6;  // perturbation when the uninformative
                                // init lands exactly on m_F = 0
  bool check_quadrature = true;
  long store_limit = 20000;  // trajectory rows kept (head + strided tail)
};

struct SeResult {
  SeState fixed_point;
  bool converged = false;
  long iterations = 0;
  double final_change = 0.0;
  double final_drift = 0.0;  // change of m_x on the last iteration
  double drift_trend = 0.0;  // final_drift minus the drift at the 90% mark;
                             // positive on unconverged runs means the plateau
                             // is being escaped
  double monotonicity_violation = 0.0;
  double e_x = 0.0, e_f = 0.0;  // MSEs at the stopping point
  int quadrature_order_used = 40;
  std::vector<SeState> trajectory;  // includes the t = 0 state
  long trajectory_stride = 1;
};

// One synchronous update of the Nishimori-line recursion.
SeState se_step(const ProblemSpec& problem, const SeState& state, int quad_order = 40);

SeResult se_run(const ProblemSpec& problem, const SeOptions& options);

SeState se_initial_state(const ProblemSpec& problem, const SeOptions& options);

double se_e_x(const ProblemSpec& problem, const SeState& state);
double se_e_f(const ProblemSpec& problem, const SeState& state);

// --- general (possibly mismatched) mode, AWGN-family channels only ----

struct GeneralSeState {
  double m_x = 0, q_x = 0, Q_x = 0;
  double m_f = 0, q_f = 0, Q_f = 0;
};

// Teacher distribution; defaults match the student (Nishimori line).
struct TeacherSpec {
  double rho, xbar, sigma, delta;
  static TeacherSpec matched(const ProblemSpec& p) {
    return {p.rho, p.xbar, p.sigma, p.delta};
  }
};

GeneralSeState se_step_general(const ProblemSpec& problem, const TeacherSpec& teacher,
                               const GeneralSeState& state, int quad_order = 40);

// --- replica free entropy (per N^2), Nishimori line -------------------

double replica_free_entropy(const ProblemSpec& problem, const SeState& state,
                            int quad_order = 40);

// --- fixed-point selection --------------------------------------------

enum class SeRegime { unique, spinodal_easy, spinodal_hard };

struct MmseReport {
  double mmse_x = 0, mmse_f = 0;
  double ampmse_x = 0, ampmse_f = 0;
  SeRegime regime = SeRegime::unique;
  double phi_uninformative = 0, phi_informative = 0;
  bool converged = true;  // both runs converged
  SeResult uninformative, informative;
};

MmseReport mmse_select(const ProblemSpec& problem, const SeOptions& base_options = {});

const char* to_string(SeRegime regime);

}  // namespace bifamp
