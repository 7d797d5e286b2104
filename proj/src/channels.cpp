#include "channels.hpp"

#include <cmath>
#include <stdexcept>

#include "math_util.hpp"
#include "quadrature.hpp"

namespace bifamp {

namespace {

void check_variance(double V, double delta) {
  if (V < 0.0 || (V == 0.0 && delta <= 0.0) || !std::isfinite(V))
    throw std::invalid_argument("channel: need V > 0 (V = 0 only with delta > 0)");
}

struct MixtureParts {
  double resp_s, resp_l;  // posterior responsibilities
  double inv_s, inv_l;    // 1/(delta + V) per component
  double log_z;
};

MixtureParts mixture_parts(const TwoGaussianMixture& m, double omega, double y,
                           double V) {
  MixtureParts p;
  double vs = m.delta_s + V, vl = m.delta_l + V;
  p.inv_s = 1.0 / vs;
  p.inv_l = 1.0 / vl;
  double lw_s = m.eps > 0.0 ? std::log(m.eps) + log_normal_pdf(y, omega, vs)
                            : -std::numeric_limits<double>::infinity();
  double lw_l = m.eps < 1.0 ? std::log1p(-m.eps) + log_normal_pdf(y, omega, vl)
                            : -std::numeric_limits<double>::infinity();
  p.log_z = log_sum_exp(lw_s, lw_l);
  p.resp_s = std::exp(lw_s - p.log_z);
  p.resp_l = std::exp(lw_l - p.log_z);
  return p;
}

}  // namespace

double Channel::g(double omega, double y, double V, Eigen::Index mu,
                  Eigen::Index l) const {
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Awgn>) {
          check_variance(V, m.delta);
          return (y - omega) / (m.delta + V);
        } else if constexpr (std::is_same_v<M, MaskedAwgn>) {
          if (!known(mu, l)) return 0.0;
          check_variance(V, m.delta);
          return (y - omega) / (m.delta + V);
        } else if constexpr (std::is_same_v<M, TwoGaussianMixture>) {
          check_variance(V, m.delta_s);
          auto p = mixture_parts(m, omega, y, V);
          return (y - omega) * (p.resp_s * p.inv_s + p.resp_l * p.inv_l);
        } else {
          check_variance(V, (*m.psi)[static_cast<std::size_t>(mu)]);
          return (y - omega) / ((*m.psi)[static_cast<std::size_t>(mu)] + V);
        }
      },
      model_);
}

double Channel::dg(double omega, double y, double V, Eigen::Index mu,
                   Eigen::Index l) const {
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Awgn>) {
          check_variance(V, m.delta);
          return -1.0 / (m.delta + V);
        } else if constexpr (std::is_same_v<M, MaskedAwgn>) {
          if (!known(mu, l)) return 0.0;
          check_variance(V, m.delta);
          return -1.0 / (m.delta + V);
        } else if constexpr (std::is_same_v<M, TwoGaussianMixture>) {
          check_variance(V, m.delta_s);
          auto p = mixture_parts(m, omega, y, V);
          double u = y - omega;
          double gv = u * (p.resp_s * p.inv_s + p.resp_l * p.inv_l);
          double second = p.resp_s * (u * u * p.inv_s * p.inv_s - p.inv_s) +
                          p.resp_l * (u * u * p.inv_l * p.inv_l - p.inv_l);
          return second - gv * gv;
        } else {
          check_variance(V, (*m.psi)[static_cast<std::size_t>(mu)]);
          return -1.0 / ((*m.psi)[static_cast<std::size_t>(mu)] + V);
        }
      },
      model_);
}

double Channel::log_partition(double omega, double y, double V, Eigen::Index mu,
                              Eigen::Index l) const {
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Awgn>) {
          check_variance(V, m.delta);
          return log_normal_pdf(y, omega, m.delta + V);
        } else if constexpr (std::is_same_v<M, MaskedAwgn>) {
          if (!known(mu, l)) return log_normal_pdf(y, 0.0, 1.0);
          check_variance(V, m.delta);
          return log_normal_pdf(y, omega, m.delta + V);
        } else if constexpr (std::is_same_v<M, TwoGaussianMixture>) {
          check_variance(V, m.delta_s);
          return mixture_parts(m, omega, y, V).log_z;
        } else {
          check_variance(V, (*m.psi)[static_cast<std::size_t>(mu)]);
          return log_normal_pdf(y, omega, (*m.psi)[static_cast<std::size_t>(mu)] + V);
        }
      },
      model_);
}

double Channel::sample(double z, Rng& rng, Eigen::Index mu, Eigen::Index l) const {
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Awgn>) {
          return z + std::sqrt(m.delta) * rng.normal();
        } else if constexpr (std::is_same_v<M, MaskedAwgn>) {
          if (!known(mu, l)) return rng.normal();  // dummy N(0,1), independent of z
          return z + std::sqrt(m.delta) * rng.normal();
        } else if constexpr (std::is_same_v<M, TwoGaussianMixture>) {
          double var = rng.uniform() < m.eps ? m.delta_s : m.delta_l;
          return z + std::sqrt(var) * rng.normal();
        } else {
          return z + std::sqrt((*m.psi)[static_cast<std::size_t>(mu)]) * rng.normal();
        }
      },
      model_);
}

void Channel::evaluate(const Eigen::MatrixXd& omega, const Eigen::MatrixXd& y,
                       const Eigen::MatrixXd& V, Eigen::MatrixXd& G,
                       Eigen::MatrixXd& DG) const {
  const Eigen::Index rows = omega.rows(), cols = omega.cols();
  G.resize(rows, cols);
  DG.resize(rows, cols);
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        for (Eigen::Index l = 0; l < cols; ++l) {
          for (Eigen::Index mu = 0; mu < rows; ++mu) {
            if constexpr (std::is_same_v<M, Awgn>) {
              check_variance(V(mu, l), m.delta);
              double inv = 1.0 / (m.delta + V(mu, l));
              G(mu, l) = (y(mu, l) - omega(mu, l)) * inv;
              DG(mu, l) = -inv;
            } else if constexpr (std::is_same_v<M, MaskedAwgn>) {
              if (!known(mu, l)) {
                G(mu, l) = 0.0;
                DG(mu, l) = 0.0;
              } else {
                check_variance(V(mu, l), m.delta);
                double inv = 1.0 / (m.delta + V(mu, l));
                G(mu, l) = (y(mu, l) - omega(mu, l)) * inv;
                DG(mu, l) = -inv;
              }
            } else {
              G(mu, l) = g(omega(mu, l), y(mu, l), V(mu, l), mu, l);
              DG(mu, l) = dg(omega(mu, l), y(mu, l), V(mu, l), mu, l);
            }
          }
        }
      },
      model_);
}

double Channel::sum_log_partition(const Eigen::MatrixXd& omega,
                                  const Eigen::MatrixXd& y,
                                  const Eigen::MatrixXd& V) const {
  std::vector<double> terms(static_cast<std::size_t>(omega.size()));
  std::size_t k = 0;
  for (Eigen::Index l = 0; l < omega.cols(); ++l)
    for (Eigen::Index mu = 0; mu < omega.rows(); ++mu)
      terms[k++] = log_partition(omega(mu, l), y(mu, l), V(mu, l), mu, l);
  return pairwise_sum(terms.data(), terms.size());
}

}  // namespace bifamp
