#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>

#include "channels.hpp"
#include "problem.hpp"

namespace bifamp {

// One teacher-student draw. Factor matrices are stored in scaled units
// r0 = sqrt(N) F0 so every entry is O(1). Immutable after creation;
// regeneration from (problem, n, seed) is bit-identical.
struct Instance {
  ProblemSpec problem;
  int n = 0;
  std::uint64_t seed = 0;
  Eigen::Index m = 0, p = 0;  // realised dims: m = round(alpha n), p = round(pi n)

  Eigen::MatrixXd f0;  // M x N, scaled sqrt(N) F0
  Eigen::MatrixXd x0;  // N x P
  Eigen::MatrixXd y;   // M x P
  std::shared_ptr<MaskMatrix> mask;               // completion only
  std::shared_ptr<std::vector<double>> psi_rows;  // factor analysis only
  Eigen::MatrixXd wprime;  // calibration / cs only: scaled noisy estimate of f0

  double realized_alpha() const { return double(m) / n; }
  double realized_pi() const { return double(p) / n; }

  // Channel with the per-instance context attached.
  Channel channel() const;

  // Noiseless product z0 = F0 X0 in unscaled units, i.e. f0 * x0 / sqrt(N).
  Eigen::MatrixXd z0() const { return f0 * x0 / std::sqrt(double(n)); }
};

Instance generate(const ProblemSpec& problem, int n, std::uint64_t seed);

// Binary round-trip; layout documented in docs/FORMATS.md. Writing is
// atomic (temp file + rename).
void save_instance(const Instance& inst, const std::string& path);
Instance load_instance(const std::string& path);

}  // namespace bifamp
