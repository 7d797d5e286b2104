#include "bethe.hpp"

#include <cmath>
#include <stdexcept>

#include "math_util.hpp"
#include "quadrature.hpp"

namespace bifamp {

namespace {

// Bare tilted-prior partitions: log Xhat = log Zhat + (1/2) log(2 pi Sigma),
// i.e. without the Gaussian window normalisation.
double sum_signal_block(const SignalPrior& prior, const Eigen::MatrixXd& T,
                        const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& a,
                        const Eigen::MatrixXd& c) {
  std::vector<double> terms(static_cast<std::size_t>(T.size()));
  std::size_t k = 0;
  for (Eigen::Index l = 0; l < T.cols(); ++l)
    for (Eigen::Index i = 0; i < T.rows(); ++i) {
      double lx = log_partition_x(prior, Sigma(i, l), T(i, l)) +
                  0.5 * (std::log(Sigma(i, l)) + kLog2Pi);
      double d = a(i, l) - T(i, l);
      terms[k++] = lx + (c(i, l) + d * d) / (2.0 * Sigma(i, l));
    }
  return pairwise_sum(terms.data(), terms.size());
}

double sum_factor_block(const FactorPrior& prior, const Eigen::MatrixXd& W,
                        const Eigen::MatrixXd& Z, const Eigen::MatrixXd& r,
                        const Eigen::MatrixXd& s, const Eigen::MatrixXd& wprime) {
  const bool has_wp = wprime.size() > 0;
  std::vector<double> terms(static_cast<std::size_t>(W.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < W.cols(); ++i)
    for (Eigen::Index mu = 0; mu < W.rows(); ++mu) {
      double lf = log_partition_f(prior, Z(mu, i), W(mu, i),
                                  has_wp ? wprime(mu, i) : 0.0) +
                  0.5 * (std::log(Z(mu, i)) + kLog2Pi);
      double d = r(mu, i) - W(mu, i);
      terms[k++] = lf + (s(mu, i) + d * d) / (2.0 * Z(mu, i));
    }
  return pairwise_sum(terms.data(), terms.size());
}

}  // namespace

FreeEntropyReport bethe_free_entropy(const AmpState& st, const Instance& inst) {
  FreeEntropyReport rep;
  const SignalPrior sp = inst.problem.signal_prior();
  const FactorPrior fp = inst.problem.factor_prior();
  const Channel channel = inst.channel();

  rep.term_kl_x = sum_signal_block(sp, st.T, st.Sigma, st.a, st.c);
  rep.term_kl_f = sum_factor_block(fp, st.W, st.Zvar, st.r, st.s, inst.wprime);
  rep.term_output = channel.sum_log_partition(st.omega, inst.y, st.V);

  // (1/2N) sum_{mu i l} g^2 (s a^2 + r^2 c), grouped per measurement
  Eigen::MatrixXd coupling = st.s * st.a.array().square().matrix() +
                             st.r.array().square().matrix() * st.c;
  Eigen::MatrixXd weighted = st.g_prev.array().square().matrix().cwiseProduct(coupling);
  rep.term_correction = weighted.sum() / (2.0 * inst.n);

  rep.phi_bethe =
      rep.term_kl_x + rep.term_kl_f + rep.term_output + rep.term_correction;
  rep.phi_bethe_per_n2 = rep.phi_bethe / (double(inst.n) * inst.n);

  // one undamped probe sweep measures distance from a fixed point
  {
    AmpState probe = st;
    AmpOptions opts;
    opts.damping = 1.0;
    opts.variance_mode = VarianceMode::nishimori;
    AmpDiagnostics diag = amp_iterate(probe, inst, opts);
    rep.fixed_point_residual = diag.delta_a;
    rep.flagged = diag.delta_a > 1e-4;
  }

  rep.phi_variational = variational_bethe(st.T, st.Sigma, st.W, st.Zvar, inst);
  if (inst.problem.is_awgn_family())
    rep.phi_vmf = vmf_free_entropy(st.T, st.Sigma, st.W, st.Zvar, inst);
  return rep;
}

namespace {

struct VariationalParts {
  Eigen::MatrixXd a, c, r, s;    // conjugate means/variances
  Eigen::MatrixXd V, P, Gsc;     // V*, product mean, (1/N) s c
  Eigen::MatrixXd omega;         // solved cavity mean
};

// Solve g_out(omega, y, V) + (omega - P)/(V - Gsc) = 0 per element.
void solve_omega(const Channel& channel, const Eigen::MatrixXd& y,
                 VariationalParts& parts) {
  const Eigen::Index m = y.rows(), p = y.cols();
  parts.omega.resize(m, p);
  const auto* mix = std::get_if<TwoGaussianMixture>(&channel.model());
  for (Eigen::Index l = 0; l < p; ++l)
    for (Eigen::Index mu = 0; mu < m; ++mu) {
      double V = parts.V(mu, l);
      double P = parts.P(mu, l);
      double denom = std::max(V - parts.Gsc(mu, l), 1e-300);
      double omega;
      if (!mix) {
        // AWGN-style channels: g = (y - omega)/(d + V) with a per-element
        // effective d (or g = 0 when masked-unknown)
        double g0 = channel.g(0.0, 1.0, V, mu, l);  // = 1/(d+V), or 0
        if (g0 == 0.0) {
          omega = P;
        } else {
          double dV = 1.0 / g0;  // d + V
          double G = parts.Gsc(mu, l);
          double d = dV - V;
          omega = (P * dV - y(mu, l) * (V - G)) / (d + G);
        }
      } else {
        // mixture: safeguarded Newton on the monotone-dominant residual
        auto h = [&](double om) {
          return channel.g(om, y(mu, l), V, mu, l) + (om - P) / denom;
        };
        double span = std::abs(y(mu, l) - P) + 10.0 * std::sqrt(mix->delta_l + V);
        double lo = std::min(P, y(mu, l)) - span, hi = std::max(P, y(mu, l)) + span;
        while (h(lo) > 0.0) lo -= span;
        while (h(hi) < 0.0) hi += span;
        omega = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
          double mid = 0.5 * (lo + hi);
          if (h(mid) < 0.0)
            lo = mid;
          else
            hi = mid;
          omega = 0.5 * (lo + hi);
          if (hi - lo < 1e-13 * (1.0 + std::abs(omega))) break;
        }
      }
      parts.omega(mu, l) = omega;
    }
}

VariationalParts variational_parts(const Eigen::MatrixXd& T,
                                   const Eigen::MatrixXd& Sigma,
                                   const Eigen::MatrixXd& W,
                                   const Eigen::MatrixXd& Z,
                                   const Instance& inst, bool with_omega) {
  if ((Sigma.array() <= 0).any() || (Z.array() <= 0).any())
    throw std::invalid_argument("variational_bethe: all Sigma, Z must be positive");
  const SignalPrior sp = inst.problem.signal_prior();
  const FactorPrior fp = inst.problem.factor_prior();
  VariationalParts parts;
  parts.a.resize(T.rows(), T.cols());
  parts.c.resize(T.rows(), T.cols());
  for (Eigen::Index l = 0; l < T.cols(); ++l)
    for (Eigen::Index i = 0; i < T.rows(); ++i) {
      Moments mm = input_moments_x(sp, Sigma(i, l), T(i, l));
      parts.a(i, l) = mm.mean;
      parts.c(i, l) = mm.var;
    }
  parts.r.resize(W.rows(), W.cols());
  parts.s.resize(W.rows(), W.cols());
  const bool has_wp = inst.wprime.size() > 0;
  for (Eigen::Index i = 0; i < W.cols(); ++i)
    for (Eigen::Index mu = 0; mu < W.rows(); ++mu) {
      Moments mm = input_moments_f(fp, Z(mu, i), W(mu, i),
                                   has_wp ? inst.wprime(mu, i) : 0.0);
      parts.r(mu, i) = mm.mean;
      parts.s(mu, i) = mm.var;
    }
  const double inv_n = 1.0 / inst.n;
  Eigen::MatrixXd aa = parts.a.array().square();
  Eigen::MatrixXd rr = parts.r.array().square();
  parts.V = inv_n * (parts.s * (parts.c + aa) + rr * parts.c);
  parts.P = (parts.r * parts.a) / std::sqrt(double(inst.n));
  parts.Gsc = inv_n * (parts.s * parts.c);
  if (with_omega) solve_omega(inst.channel(), inst.y, parts);
  return parts;
}

}  // namespace

double variational_bethe(const Eigen::MatrixXd& T, const Eigen::MatrixXd& Sigma,
                         const Eigen::MatrixXd& W, const Eigen::MatrixXd& Z,
                         const Instance& inst) {
  VariationalParts parts = variational_parts(T, Sigma, W, Z, inst, true);
  const SignalPrior sp = inst.problem.signal_prior();
  const FactorPrior fp = inst.problem.factor_prior();
  double phi = sum_signal_block(sp, T, Sigma, parts.a, parts.c) +
               sum_factor_block(fp, W, Z, parts.r, parts.s, inst.wprime);
  const Channel channel = inst.channel();
  std::vector<double> terms(static_cast<std::size_t>(parts.V.size()));
  std::size_t k = 0;
  for (Eigen::Index l = 0; l < parts.V.cols(); ++l)
    for (Eigen::Index mu = 0; mu < parts.V.rows(); ++mu) {
      double d = parts.omega(mu, l) - parts.P(mu, l);
      double denom = std::max(parts.V(mu, l) - parts.Gsc(mu, l), 1e-300);
      terms[k++] = channel.log_partition(parts.omega(mu, l), inst.y(mu, l),
                                         parts.V(mu, l), mu, l) +
                   0.5 * d * d / denom;
    }
  return phi + pairwise_sum(terms.data(), terms.size());
}

double variational_bethe_awgn(const Eigen::MatrixXd& T, const Eigen::MatrixXd& Sigma,
                              const Eigen::MatrixXd& W, const Eigen::MatrixXd& Z,
                              const Instance& inst) {
  if (!inst.problem.is_awgn_family())
    throw std::invalid_argument("variational_bethe_awgn: AWGN channel only");
  const double delta = inst.problem.delta;
  VariationalParts parts = variational_parts(T, Sigma, W, Z, inst, false);
  const SignalPrior sp = inst.problem.signal_prior();
  const FactorPrior fp = inst.problem.factor_prior();
  double phi = sum_signal_block(sp, T, Sigma, parts.a, parts.c) +
               sum_factor_block(fp, W, Z, parts.r, parts.s, inst.wprime);
  std::vector<double> terms(static_cast<std::size_t>(parts.V.size()));
  std::size_t k = 0;
  for (Eigen::Index l = 0; l < parts.V.cols(); ++l)
    for (Eigen::Index mu = 0; mu < parts.V.rows(); ++mu) {
      double resid = inst.y(mu, l) - parts.P(mu, l);
      terms[k++] = -resid * resid / (2.0 * (delta + parts.Gsc(mu, l))) -
                   0.5 * std::log(2.0 * M_PI * (delta + parts.V(mu, l)));
    }
  return phi + pairwise_sum(terms.data(), terms.size());
}

double vmf_free_entropy(const Eigen::MatrixXd& T, const Eigen::MatrixXd& Sigma,
                        const Eigen::MatrixXd& W, const Eigen::MatrixXd& Z,
                        const Instance& inst) {
  if (!inst.problem.is_awgn_family())
    throw std::invalid_argument("vmf_free_entropy: AWGN channel only");
  const double delta = inst.problem.delta;
  if (!(delta > 0.0))
    throw std::invalid_argument("vmf_free_entropy: delta must be positive");
  VariationalParts parts = variational_parts(T, Sigma, W, Z, inst, false);
  const SignalPrior sp = inst.problem.signal_prior();
  const FactorPrior fp = inst.problem.factor_prior();
  double phi = sum_signal_block(sp, T, Sigma, parts.a, parts.c) +
               sum_factor_block(fp, W, Z, parts.r, parts.s, inst.wprime);
  double quad = 0.0;
  quad += (inst.y - parts.P).squaredNorm();
  quad += parts.V.sum();
  double mp = double(inst.m) * inst.p;
  return phi - quad / (2.0 * delta) - 0.5 * mp * std::log(2.0 * M_PI * delta);
}

}  // namespace bifamp
