#include "priors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "math_util.hpp"

namespace bifamp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_window_x(double Sigma, double T) {
  if (!(Sigma > 0.0) || !std::isfinite(Sigma) || !std::isfinite(T))
    throw std::invalid_argument("input function: Sigma must be positive and finite");
}

void check_window_f(double Z, double W) {
  if (!(Z > 0.0) || !std::isfinite(Z) || !std::isfinite(W))
    throw std::invalid_argument("input function: Z must be positive and finite");
}

// log weights of the two mixture branches under the window N(x; T, Sigma),
// including the window normalisation (so their log-sum is log Zhat_X).
// Zero branch: (1-rho) delta(x); Gaussian branch: rho N(mean, var).
struct BranchWeights {
  double log_zero;
  double log_gauss;
};

BranchWeights gb_weights(const GaussBernoulli& p, double Sigma, double T) {
  BranchWeights w;
  w.log_zero = p.rho >= 1.0 ? kNegInf
                            : std::log1p(-p.rho) + log_normal_pdf(0.0, T, Sigma);
  w.log_gauss = p.rho <= 0.0 ? kNegInf
                             : std::log(p.rho) + log_normal_pdf(p.mean, T, Sigma + p.var);
  return w;
}

// Truncated-normal moments for N(m, v) restricted to x >= 0.
void truncated_moments(double m, double v, double& mean, double& var) {
  double sd = std::sqrt(v);
  double beta = -m / sd;  // standardised lower bound
  double lambda = mills_ratio_inverse(beta);
  mean = m + sd * lambda;
  var = v * (1.0 + beta * lambda - lambda * lambda);
  if (var < 0.0) var = 0.0;  // guard roundoff for extreme truncation
}

// Gaussian-product parameters of the tilted nonzero branch.
void gauss_product(double m1, double v1, double m2, double v2, double& m,
                   double& v) {
  v = v1 * v2 / (v1 + v2);
  m = (m1 * v2 + m2 * v1) / (v1 + v2);
}

}  // namespace

Moments input_moments_x(const SignalPrior& prior, double Sigma, double T) {
  check_window_x(Sigma, T);
  return std::visit(
      [&](const auto& p) -> Moments {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GaussBernoulli>) {
          auto w = gb_weights(p, Sigma, T);
          double log_z = log_sum_exp(w.log_zero, w.log_gauss);
          double p1 = std::exp(w.log_gauss - log_z);
          double m1, v1;
          gauss_product(p.mean, p.var, T, Sigma, m1, v1);
          Moments out;
          out.mean = p1 * m1;
          out.var = p1 * v1 + p1 * (1.0 - p1) * m1 * m1;
          return out;
        } else {
          // truncated branch: tilted Gaussian restricted to x >= 0
          double m1, v1;
          gauss_product(p.mean, p.var, T, Sigma, m1, v1);
          double sd1 = std::sqrt(v1);
          double log_trunc_mass = log_normal_cdf(m1 / sd1);
          double log_prior_mass = log_normal_cdf(p.mean / std::sqrt(p.var));
          double log_zero = p.rho >= 1.0
                                ? kNegInf
                                : std::log1p(-p.rho) + log_normal_pdf(0.0, T, Sigma);
          double log_gauss = p.rho <= 0.0
                                 ? kNegInf
                                 : std::log(p.rho) + log_normal_pdf(p.mean, T, Sigma + p.var) +
                                       log_trunc_mass - log_prior_mass;
          double log_z = log_sum_exp(log_zero, log_gauss);
          double p1 = std::exp(log_gauss - log_z);
          double tm, tv;
          truncated_moments(m1, v1, tm, tv);
          Moments out;
          out.mean = p1 * tm;
          out.var = p1 * tv + p1 * (1.0 - p1) * tm * tm;
          return out;
        }
      },
      prior);
}

double log_partition_x(const SignalPrior& prior, double Sigma, double T) {
  check_window_x(Sigma, T);
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GaussBernoulli>) {
          auto w = gb_weights(p, Sigma, T);
          return log_sum_exp(w.log_zero, w.log_gauss);
        } else {
          double m1, v1;
          gauss_product(p.mean, p.var, T, Sigma, m1, v1);
          double log_trunc_mass = log_normal_cdf(m1 / std::sqrt(v1));
          double log_prior_mass = log_normal_cdf(p.mean / std::sqrt(p.var));
          double log_zero = p.rho >= 1.0
                                ? kNegInf
                                : std::log1p(-p.rho) + log_normal_pdf(0.0, T, Sigma);
          double log_gauss = p.rho <= 0.0
                                 ? kNegInf
                                 : std::log(p.rho) + log_normal_pdf(p.mean, T, Sigma + p.var) +
                                       log_trunc_mass - log_prior_mass;
          return log_sum_exp(log_zero, log_gauss);
        }
      },
      prior);
}

Moments prior_moments_x(const SignalPrior& prior) {
  return std::visit(
      [&](const auto& p) -> Moments {
        using P = std::decay_t<decltype(p)>;
        Moments out;
        if constexpr (std::is_same_v<P, GaussBernoulli>) {
          out.mean = p.rho * p.mean;
          double second = p.rho * (p.mean * p.mean + p.var);
          out.var = second - out.mean * out.mean;
        } else {
          double tm, tv;
          truncated_moments(p.mean, p.var, tm, tv);
          out.mean = p.rho * tm;
          double second = p.rho * (tv + tm * tm);
          out.var = second - out.mean * out.mean;
        }
        return out;
      },
      prior);
}

double prior_second_moment_x(const SignalPrior& prior) {
  Moments m = prior_moments_x(prior);
  return m.var + m.mean * m.mean;
}

double sample_x(const SignalPrior& prior, Rng& rng) {
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if (rng.uniform() >= p.rho) return 0.0;
        double x = p.mean + std::sqrt(p.var) * rng.normal();
        if constexpr (std::is_same_v<P, NonNegGaussBernoulli>) {
          while (x < 0.0) x = p.mean + std::sqrt(p.var) * rng.normal();
        }
        return x;
      },
      prior);
}

// --- factor side -----------------------------------------------------

namespace {

// Effective Gaussian prior N(m0, v0) for the scaled element u = sqrt(N) F.
void factor_gaussian(const FactorPrior& prior, double wprime, double& m0,
                     double& v0) {
  if (std::holds_alternative<GaussianFactor>(prior)) {
    m0 = 0.0;
    v0 = 1.0;
  } else {
    double eta = std::get<CalibrationFactor>(prior).eta;
    if (eta < 0.0) throw std::invalid_argument("calibration: eta must be >= 0");
    if (std::isinf(eta)) {
      m0 = 0.0;
      v0 = 1.0;
    } else {
      m0 = wprime / std::sqrt(1.0 + eta);
      v0 = eta / (1.0 + eta);
    }
  }
}

}  // namespace

Moments input_moments_f(const FactorPrior& prior, double Z, double W,
                        double wprime) {
  check_window_f(Z, W);
  double m0, v0;
  factor_gaussian(prior, wprime, m0, v0);
  Moments out;
  if (v0 == 0.0) {  // exact knowledge limit
    out.mean = m0;
    out.var = 0.0;
    return out;
  }
  out.mean = (m0 * Z + W * v0) / (Z + v0);
  out.var = v0 * Z / (Z + v0);
  return out;
}

double log_partition_f(const FactorPrior& prior, double Z, double W,
                       double wprime) {
  check_window_f(Z, W);
  double m0, v0;
  factor_gaussian(prior, wprime, m0, v0);
  // convolution of the Gaussian prior with the window N(u; W, Z)
  return log_normal_pdf(W, m0, v0 + Z);
}

Moments prior_moments_f(const FactorPrior& prior, double wprime) {
  double m0, v0;
  factor_gaussian(prior, wprime, m0, v0);
  return {m0, v0};
}

double sample_f(const FactorPrior& prior, Rng& rng, double wprime) {
  double m0, v0;
  factor_gaussian(prior, wprime, m0, v0);
  return m0 + std::sqrt(v0) * rng.normal();
}

}  // namespace bifamp
