#pragma once

#include <variant>

#include "rng.hpp"

namespace bifamp {

// --- signal-side priors (entries of X) ------------------------------
//
// The tilted measure is M_X(Sigma, T, x) ~ P_X(x) N(x; T, Sigma); the
// partition log_partition_x includes the 1/sqrt(2 pi Sigma) window factor.
// input_moments_x returns its mean f_a and variance f_c.

struct GaussBernoulli {
  double rho = 1.0;   // density of nonzeros, in (0, 1]
  double mean = 0.0;  // mean of the nonzero part
  double var = 1.0;   // variance of the nonzero part
};

// Same mixture with the Gaussian part truncated to x >= 0.
struct NonNegGaussBernoulli {
  double rho = 1.0;
  double mean = 0.0;
  double var = 1.0;
};

using SignalPrior = std::variant<GaussBernoulli, NonNegGaussBernoulli>;

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments input_moments_x(const SignalPrior& prior, double Sigma, double T);
double log_partition_x(const SignalPrior& prior, double Sigma, double T);

Moments prior_moments_x(const SignalPrior& prior);  // mean / variance of P_X
double prior_second_moment_x(const SignalPrior& prior);
double sample_x(const SignalPrior& prior, Rng& rng);

// --- factor-side priors (entries of F, in scaled units u = sqrt(N) F) ---
//
// GaussianFactor: u ~ N(0, 1). CalibrationFactor: a noisy scaled estimate
// w' of u is known, u | w' ~ N(w'/sqrt(1+eta), eta/(1+eta)); eta -> inf
// recovers GaussianFactor and eta = 0 is exact knowledge (f_r = w',
// f_s = 0). The estimate w' is per matrix element and passed per call.

struct GaussianFactor {};

struct CalibrationFactor {
  double eta = 1.0;  // uncertainty, >= 0
};

using FactorPrior = std::variant<GaussianFactor, CalibrationFactor>;

Moments input_moments_f(const FactorPrior& prior, double Z, double W,
                        double wprime = 0.0);
double log_partition_f(const FactorPrior& prior, double Z, double W,
                       double wprime = 0.0);

Moments prior_moments_f(const FactorPrior& prior, double wprime = 0.0);
double sample_f(const FactorPrior& prior, Rng& rng, double wprime = 0.0);

}  // namespace bifamp
