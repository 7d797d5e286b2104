#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "instances.hpp"

namespace bifamp {

enum class VarianceMode {
  general,    // full Sigma / Z expressions (can go negative off-line)
  nishimori,  // matched-prior simplification, strictly positive
  full_tap,   // scalar V, Sigma, Z built from empirical order parameters
};

enum class UpdateSchedule { parallel, block_sequential };

enum class AmpInit {
  prior,    // a, r sampled i.i.d. from the priors (breaks the symmetry)
  planted,  // a = X0, r = sqrt(N) F0, tiny variances
  cs,       // r = sqrt(N) F0 fixed, s = 0; signal side only (factor frozen)
};

struct AmpOptions {
  long max_iterations = 1000;
  double tolerance = 1e-8;
  double damping = 0.5;  // beta in (0, 1], applied to a, c, r, s
  VarianceMode variance_mode = VarianceMode::nishimori;
  UpdateSchedule schedule = UpdateSchedule::parallel;
  AmpInit init = AmpInit::prior;
  // Prior-sampled initial means are pulled toward the prior mean by this
  // factor. Full-strength samples claim prior variance while carrying an
  // extra sample's worth of error, which breaks the runtime Nishimori
  // identity over the first sweeps; a damped draw stays calibrated yet
  // still breaks the permutation symmetry.
  double init_scale = 0.1;
  int blocks = 8;               // block count for the sequential schedule
  std::uint64_t seed = 1;       // init / schedule randomness
  int align_overlaps_first = 0; // record gauge-aligned overlaps for t <= this
  bool track_free_entropy = false;
  double planted_variance = 1e-8;
  double variance_floor = 1e-12;  // clamp for negative variances (general mode)
};

// Per-element AMP quantities for one instance.
struct AmpState {
  Eigen::MatrixXd a, c;          // N x P posterior mean / variance of x
  Eigen::MatrixXd r, s;          // M x N scaled mean / variance of sqrt(N) F
  Eigen::MatrixXd omega, V;      // M x P cavity mean / variance of z
  Eigen::MatrixXd g_prev;        // M x P output function at the previous sweep
  Eigen::MatrixXd Sigma, T;      // N x P signal-side window
  Eigen::MatrixXd Zvar, W;       // M x N factor-side window
  Eigen::MatrixXd a_prev, r_prev;
  long iteration = 0;
  bool factor_frozen = false;

  Eigen::Index n() const { return a.rows(); }
  Eigen::Index p() const { return a.cols(); }
  Eigen::Index m() const { return r.rows(); }
};

struct AmpDiagnostics {
  double delta_a = 0.0;          // mean |change of a|
  double nishimori_lhs = 0.0;    // (1/MP) sum -dg
  double nishimori_rhs = 0.0;    // (1/MP) sum g^2
  double v_mean = 0.0, v_min = 0.0;
  long clamped_variances = 0;
  // magnitude of the variance terms dropped by the reduced convention
  double sigma_extra_term = 0.0, z_extra_term = 0.0;
};

struct AmpTraceRow {
  long iteration = 0;
  double delta_a = 0.0;
  double m_x = 0.0, m_f = 0.0;            // literal overlaps with the truth
  double m_x_aligned = 0.0, m_f_aligned = 0.0;  // gauge-fixed (when computed)
  bool aligned_valid = false;
  double mse_z = 0.0;
  double nishimori_lhs = 0.0, nishimori_rhs = 0.0;
  double v_mean = 0.0;
  double phi_bethe = 0.0;
  bool phi_valid = false;
};

struct AmpResult {
  AmpState state;
  bool converged = false;
  long iterations = 0;
  std::vector<AmpTraceRow> trace;  // trace.size() == iterations + 1
  AmpDiagnostics last;
};

struct MseReport {
  double mse_z = 0.0;
  double mse_x_aligned = 0.0;
  double mse_f_aligned = 0.0;
  std::vector<Eigen::Index> permutation;  // estimate column i of r matches
                                          // truth column permutation[i]
  std::vector<int> signs;
};

class AmpError : public std::runtime_error {
 public:
  AmpError(const std::string& what, long iteration)
      : std::runtime_error(what), iteration(iteration) {}
  long iteration;
};

AmpState amp_init(const Instance& instance, const AmpOptions& options, Rng& rng);

AmpDiagnostics amp_iterate(AmpState& state, const Instance& instance,
                           const AmpOptions& options, Rng* schedule_rng = nullptr);

AmpResult amp_run(const Instance& instance, const AmpOptions& options,
                  bool with_truth_trace = true);

MseReport evaluate_mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& r,
                       const Eigen::MatrixXd& x0, const Eigen::MatrixXd& f0scaled,
                       int n);

// Literal (un-aligned) overlaps m_x = (1/NP) sum a x0, m_F = (1/M sqrt(N)) sum r F0.
double overlap_x(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x0);
double overlap_f(const Eigen::MatrixXd& r, const Eigen::MatrixXd& f0scaled, int n);

// Greedy gauge between estimated and true latent components; returns the
// overlaps after applying it.
void aligned_overlaps(const Eigen::MatrixXd& a, const Eigen::MatrixXd& r,
                      const Eigen::MatrixXd& x0, const Eigen::MatrixXd& f0scaled,
                      int n, double& m_x, double& m_f);

}  // namespace bifamp
