#pragma once

#include "amp.hpp"

namespace bifamp {

struct FreeEntropyReport {
  double phi_bethe = 0.0;        // total log-likelihood estimate
  double phi_bethe_per_n2 = 0.0; // density, comparable across sizes
  double phi_variational = 0.0;
  double phi_vmf = std::numeric_limits<double>::quiet_NaN();  // AWGN only
  // per-term breakdown of phi_bethe
  double term_kl_x = 0.0;       // signal tilted-prior block
  double term_kl_f = 0.0;       // factor tilted-prior block
  double term_output = 0.0;     // sum log Z^{mu l}
  double term_correction = 0.0; // (1/2N) sum g^2 (s a^2 + r^2 c)
  double fixed_point_residual = 0.0;  // mean |delta a| of one probe sweep
  bool flagged = false;               // residual above 1e-4
};

// Free entropy of the current state (meaningful at AMP fixed points; a
// probe sweep measures how far from one the state is).
FreeEntropyReport bethe_free_entropy(const AmpState& state, const Instance& instance);

// Variational form: a function of the window parameters only, with the
// conjugate means/variances and the cavity mean solved internally. AMP
// fixed points are its stationary points.
double variational_bethe(const Eigen::MatrixXd& T, const Eigen::MatrixXd& Sigma,
                         const Eigen::MatrixXd& W, const Eigen::MatrixXd& Z,
                         const Instance& instance);

// Closed form of the variational expression for the plain AWGN channel;
// independent code path used to pin the additive convention.
double variational_bethe_awgn(const Eigen::MatrixXd& T, const Eigen::MatrixXd& Sigma,
                              const Eigen::MatrixXd& W, const Eigen::MatrixXd& Z,
                              const Instance& instance);

// Variational mean-field free entropy (AWGN only; throws otherwise).
double vmf_free_entropy(const Eigen::MatrixXd& T, const Eigen::MatrixXd& Sigma,
                        const Eigen::MatrixXd& W, const Eigen::MatrixXd& Z,
                        const Instance& instance);

}  // namespace bifamp
