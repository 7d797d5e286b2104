#pragma once

#include "amp.hpp"

namespace bifamp {

// Per-edge relaxed belief propagation. O(N M P) messages, so this is the
// small-instance oracle; instances with N*M*P > 10^6 are refused.
//
// Message layout: x-side messages indexed [((i*P)+l)*M + mu], factor-side
// messages indexed [((mu*N)+i)*P + l].
struct RbpState {
  std::vector<double> a_msg, c_msg;  // x_{il} -> (mu l)
  std::vector<double> r_msg, s_msg;  // F_{mu i} -> (mu l)
  std::vector<double> A_fac, B_fac;  // (mu l) -> x_{il}, layout as a_msg
  std::vector<double> R_fac, S_fac;  // (mu l) -> F_{mu i}, layout as r_msg
  long iteration = 0;
};

struct RbpResult {
  Eigen::MatrixXd a, c;  // node marginal means / variances of x
  Eigen::MatrixXd r, s;  // node marginals of sqrt(N) F
  bool converged = false;
  long iterations = 0;
  double final_change = 0.0;
  RbpState state;  // final messages (kept for free-entropy evaluation)
};

RbpResult rbp_run(const Instance& instance, const AmpOptions& options);

}  // namespace bifamp
