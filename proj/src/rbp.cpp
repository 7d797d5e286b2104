#include "rbp.hpp"

#include <cmath>
#include <stdexcept>

namespace bifamp {

namespace {

inline std::size_t xidx(Eigen::Index i, Eigen::Index l, Eigen::Index mu,
                        Eigen::Index p, Eigen::Index m) {
  return (static_cast<std::size_t>(i) * p + l) * m + mu;
}

inline std::size_t fidx(Eigen::Index mu, Eigen::Index i, Eigen::Index l,
                        Eigen::Index n, Eigen::Index p) {
  return (static_cast<std::size_t>(mu) * n + i) * p + l;
}

}  // namespace

RbpResult rbp_run(const Instance& inst, const AmpOptions& options) {
  const Eigen::Index n = inst.n, m = inst.m, p = inst.p;
  if (static_cast<long long>(n) * m * p > 1000000)
    throw std::invalid_argument("rbp_run: N*M*P exceeds the 10^6 message budget");

  const SignalPrior sp = inst.problem.signal_prior();
  const FactorPrior fp = inst.problem.factor_prior();
  const Channel channel = inst.channel();
  const bool has_wp = inst.wprime.size() > 0;
  const double sqrt_n = std::sqrt(double(n));
  const double beta = options.damping;
  Rng rng(options.seed, Stream::amp_init);

  RbpResult res;
  RbpState& st = res.state;
  const std::size_t edges = static_cast<std::size_t>(n) * p * m;
  st.a_msg.resize(edges);
  st.c_msg.resize(edges);
  st.r_msg.resize(edges);
  st.s_msg.resize(edges);
  st.A_fac.assign(edges, 0.0);
  st.B_fac.assign(edges, 0.0);
  st.R_fac.assign(edges, 0.0);
  st.S_fac.assign(edges, 0.0);

  // node-sampled init, identical across outgoing edges
  {
    Moments pm = prior_moments_x(sp);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index l = 0; l < p; ++l) {
        double a0 = sample_x(sp, rng);
        for (Eigen::Index mu = 0; mu < m; ++mu) {
          st.a_msg[xidx(i, l, mu, p, m)] = a0;
          st.c_msg[xidx(i, l, mu, p, m)] = pm.var;
        }
      }
    for (Eigen::Index mu = 0; mu < m; ++mu)
      for (Eigen::Index i = 0; i < n; ++i) {
        double wp = has_wp ? inst.wprime(mu, i) : 0.0;
        double r0 = sample_f(fp, rng, wp);
        double s0 = prior_moments_f(fp, wp).var;
        for (Eigen::Index l = 0; l < p; ++l) {
          st.r_msg[fidx(mu, i, l, n, p)] = r0;
          st.s_msg[fidx(mu, i, l, n, p)] = s0;
        }
      }
  }

  res.a.resize(n, p);
  res.c.resize(n, p);
  res.r.resize(m, n);
  res.s.resize(m, n);

  auto factor_pass = [&]() {
    for (Eigen::Index mu = 0; mu < m; ++mu)
      for (Eigen::Index l = 0; l < p; ++l) {
        double sra = 0.0, sv = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          double aj = st.a_msg[xidx(j, l, mu, p, m)];
          double cj = st.c_msg[xidx(j, l, mu, p, m)];
          double rj = st.r_msg[fidx(mu, j, l, n, p)];
          double sj = st.s_msg[fidx(mu, j, l, n, p)];
          sra += rj * aj;
          sv += sj * cj + sj * aj * aj + rj * rj * cj;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          double ai = st.a_msg[xidx(i, l, mu, p, m)];
          double ci = st.c_msg[xidx(i, l, mu, p, m)];
          double ri = st.r_msg[fidx(mu, i, l, n, p)];
          double si = st.s_msg[fidx(mu, i, l, n, p)];
          double omega = (sra - ri * ai) / sqrt_n;
          double V = (sv - (si * ci + si * ai * ai + ri * ri * ci)) / n;
          V = std::max(V, 1e-300);
          double g = channel.g(omega, inst.y(mu, l), V, mu, l);
          double dg = channel.dg(omega, inst.y(mu, l), V, mu, l);
          st.B_fac[xidx(i, l, mu, p, m)] = g * ri;
          st.A_fac[xidx(i, l, mu, p, m)] = -dg * (ri * ri + si) - g * g * si;
          st.R_fac[fidx(mu, i, l, n, p)] = g * ai;
          st.S_fac[fidx(mu, i, l, n, p)] = -dg * (ai * ai + ci) - g * g * ci;
        }
      }
  };

  auto variable_pass = [&]() -> double {
    double change = 0.0;
    // x side
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index l = 0; l < p; ++l) {
        double sum_a = 0.0, sum_b = 0.0;
        const std::size_t base = xidx(i, l, 0, p, m);
        for (Eigen::Index mu = 0; mu < m; ++mu) {
          sum_a += st.A_fac[base + mu];
          sum_b += st.B_fac[base + mu];
        }
        for (Eigen::Index mu = 0; mu < m; ++mu) {
          double sa = std::max(sum_a - st.A_fac[base + mu], n * 1e-12);
          double sb = sum_b - st.B_fac[base + mu];
          Moments mm = input_moments_x(sp, n / sa, sqrt_n * sb / sa);
          double& a_ref = st.a_msg[base + mu];
          double& c_ref = st.c_msg[base + mu];
          change += std::abs(beta * (mm.mean - a_ref));
          a_ref = beta * mm.mean + (1 - beta) * a_ref;
          c_ref = beta * mm.var + (1 - beta) * c_ref;
        }
        double sa = std::max(sum_a, n * 1e-12);
        Moments mm = input_moments_x(sp, n / sa, sqrt_n * sum_b / sa);
        res.a(i, l) = mm.mean;
        res.c(i, l) = mm.var;
      }
    // factor side
    for (Eigen::Index mu = 0; mu < m; ++mu)
      for (Eigen::Index i = 0; i < n; ++i) {
        double wp = has_wp ? inst.wprime(mu, i) : 0.0;
        double sum_s = 0.0, sum_r = 0.0;
        const std::size_t base = fidx(mu, i, 0, n, p);
        for (Eigen::Index l = 0; l < p; ++l) {
          sum_s += st.S_fac[base + l];
          sum_r += st.R_fac[base + l];
        }
        for (Eigen::Index l = 0; l < p; ++l) {
          double ss = std::max(sum_s - st.S_fac[base + l], n * 1e-12);
          double sr = sum_r - st.R_fac[base + l];
          Moments mm = input_moments_f(fp, n / ss, sqrt_n * sr / ss, wp);
          double& r_ref = st.r_msg[base + l];
          double& s_ref = st.s_msg[base + l];
          r_ref = beta * mm.mean + (1 - beta) * r_ref;
          s_ref = beta * mm.var + (1 - beta) * s_ref;
        }
        double ss = std::max(sum_s, n * 1e-12);
        Moments mm = input_moments_f(fp, n / ss, sqrt_n * sum_r / ss, wp);
        res.r(mu, i) = mm.mean;
        res.s(mu, i) = mm.var;
      }
    return change / double(edges);
  };

  for (long t = 0; t < options.max_iterations; ++t) {
    factor_pass();
    double change = variable_pass();
    st.iteration = t + 1;
    res.iterations = t + 1;
    res.final_change = change;
    if (change < options.tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace bifamp
