#include "state_evolution.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "math_util.hpp"
#include "quadrature.hpp"

namespace bifamp {

namespace {

constexpr double kMhatCap = 1e30;

// b / (1 + b), safe for b = inf
double ratio_b(double b) { return 1.0 - 1.0 / (1.0 + b); }

// Nishimori m_F update for a Gaussian factor with calibration uncertainty
// eta; mtil = pi m_x mhat. eta = inf is the plain Gaussian factor, eta = 0
// is a fully known factor (m_F = 1).
double update_m_f(double eta, double mtil) {
  if (eta == 0.0) return 1.0;
  if (std::isinf(eta)) return ratio_b(mtil);
  double inv_eta = 1.0 / eta;
  return (inv_eta + mtil) / (inv_eta + 1.0 + mtil);
}

// E[f_a^2] over the Nishimori tilted ensemble for the Gauss-Bernoulli
// prior: b = alpha m_F mhat, window Sigma = 1/b, and T distributed as
// N(0, 1/b) on the zero branch and N(xbar, sigma + 1/b) on the Gaussian
// branch.
//
// For sharp windows the sparse denoiser switches branches over a width
// O(sqrt(Sigma)) that Gauss-Hermite nodes cannot resolve, so the
// integrals go adaptive with explicit cuts at the switching scales.
double update_m_x_gb(const SignalPrior& prior, double rho, double xbar,
                     double sigma, double b, int quad_order) {
  Moments pm = prior_moments_x(prior);
  if (!(b > 0.0)) return pm.mean * pm.mean;
  if (std::isinf(b) || 1.0 / b < 1e-14 * sigma)
    return pm.var + pm.mean * pm.mean;
  const double Sigma = 1.0 / b;
  const bool sharp = rho < 1.0 && b * sigma > 50.0;

  auto fa2 = [&](double t) {
    double fa = input_moments_x(prior, Sigma, t).mean;
    return fa * fa;
  };

  double acc = 0.0;
  if (rho < 1.0) {
    double sd = std::sqrt(Sigma);
    if (!sharp) {
      acc += (1.0 - rho) *
             gauss_hermite(quad_order).integrate([&](double xi) { return fa2(sd * xi); });
    } else {
      auto weighted = [&](double t) {
        return std::exp(log_normal_pdf(t, 0.0, Sigma)) * fa2(t);
      };
      // the switch sits at |T| ~ sd sqrt(2 log(1/(rho sd))); cuts bracket it
      const double cuts[] = {0.0, 2.0, 4.0, 6.0, 9.0, 14.0};
      double acc0 = 0.0;
      for (std::size_t k = 1; k < std::size(cuts); ++k) {
        acc0 += integrate_adaptive(weighted, cuts[k - 1] * sd, cuts[k] * sd, 1e-13);
        acc0 += integrate_adaptive(weighted, -cuts[k] * sd, -cuts[k - 1] * sd, 1e-13);
      }
      acc += (1.0 - rho) * acc0;
    }
  }
  {
    double sd = std::sqrt(sigma + Sigma);
    if (!sharp) {
      acc += rho * gauss_hermite(quad_order).integrate(
                       [&](double xi) { return fa2(xbar + sd * xi); });
    } else {
      auto weighted = [&](double t) {
        return std::exp(log_normal_pdf(t, xbar, sigma + Sigma)) * fa2(t);
      };
      // bulk of the branch plus a carve-out around the shrinkage dip at 0
      double dip = 10.0 * std::sqrt(Sigma);
      double lo = xbar - 14.0 * sd, hi = xbar + 14.0 * sd;
      double acc1 = integrate_adaptive(weighted, lo, std::max(lo, -dip), 1e-13) +
                    integrate_adaptive(weighted, -dip, dip, 1e-13) +
                    integrate_adaptive(weighted, std::min(hi, dip), hi, 1e-13);
      acc += rho * acc1;
    }
  }
  return acc;
}

// Dense signal (rho = 1): closed form of the m_x update, safe at c = inf.
double update_m_x_dense(double xbar, double sigma, double c) {
  if (!(c > 0.0)) return xbar * xbar;
  return xbar * xbar + sigma * sigma / (1.0 / c + sigma);
}

// mhat for the two-Gaussian mixture channel, from the exact
// responsibility-weighted g_out: integral over u = y - omega of
// (sum_k w_k N_k(u) u / (D_k + V))^2 / sum_k w_k N_k(u).
double mixture_mhat(double eps, double delta_s, double delta_l, double V) {
  if (!(V > 0.0)) throw std::invalid_argument("mixture mhat: V must be > 0");
  if (eps >= 1.0) return 1.0 / (delta_s + V);
  if (eps <= 0.0) return 1.0 / (delta_l + V);
  double A = delta_s + V, B = delta_l + V;
  auto integrand = [&](double u) {
    double lw_s = std::log(eps) + log_normal_pdf(u, 0.0, A);
    double lw_l = std::log1p(-eps) + log_normal_pdf(u, 0.0, B);
    double log_z = log_sum_exp(lw_s, lw_l);
    double q = std::exp(lw_s - log_z) / A + std::exp(lw_l - log_z) / B;
    return u * u * q * q * std::exp(log_z);
  };
  double scale = eps / A + (1.0 - eps) / B;
  // split at both component scales so the narrow peak is always sampled
  double sa = std::sqrt(A), sb = std::sqrt(B);
  std::vector<double> cuts = {0.0, 4.0 * sa, 8.0 * sa, 4.0 * sb, 12.0 * sb};
  std::sort(cuts.begin(), cuts.end());
  double value = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    if (cuts[k] <= cuts[k - 1]) continue;
    double piece = integrate_adaptive(integrand, cuts[k - 1], cuts[k], 1e-12 * scale);
    value += piece;
    value += integrate_adaptive(integrand, -cuts[k], -cuts[k - 1], 1e-12 * scale);
  }
  return value;
}

struct Hats {
  std::vector<double> mhat;  // one per psi component; size 1 otherwise
};

Hats channel_mhat(const ProblemSpec& p, const SeState& s) {
  const double qz = p.z_second_moment();
  Hats h;
  switch (p.app) {
    case Application::completion: {
      double v = p.delta + qz - s.m_f[0] * s.m_x;
      if (!(v > 0.0)) throw std::invalid_argument("se: m_F m_x must stay below <z^2>");
      h.mhat = {std::min(p.epsilon / v, kMhatCap)};
      break;
    }
    case Application::robust_pca: {
      double v = qz - s.m_f[0] * s.m_x;
      if (!(v > 0.0)) throw std::invalid_argument("se: m_F m_x must stay below <z^2>");
      h.mhat = {std::min(mixture_mhat(p.epsilon, p.delta_s, p.delta_l, v), kMhatCap)};
      break;
    }
    case Application::factor_analysis: {
      h.mhat.resize(p.psi.size());
      for (std::size_t k = 0; k < p.psi.size(); ++k) {
        double v = p.psi[k] + qz - s.m_f[k] * s.m_x;
        if (!(v > 0.0))
          throw std::invalid_argument("se: m_F m_x must stay below <z^2>");
        h.mhat[k] = std::min(1.0 / v, kMhatCap);
      }
      break;
    }
    default: {  // dictionary family and cs: plain AWGN
      double v = p.delta + qz - s.m_f[0] * s.m_x;
      if (!(v > 0.0)) throw std::invalid_argument("se: m_F m_x must stay below <z^2>");
      h.mhat = {std::min(1.0 / v, kMhatCap)};
      break;
    }
  }
  return h;
}

}  // namespace

double SeState::m_f_mean(const std::vector<double>& weights) const {
  if (m_f.size() == 1) return m_f[0];
  double acc = 0.0;
  for (std::size_t k = 0; k < m_f.size(); ++k) acc += weights[k] * m_f[k];
  return acc;
}

SeState se_step(const ProblemSpec& problem, const SeState& state, int quad_order) {
  SeState current = state;
  if (problem.app == Application::cs) current.m_f.assign(current.m_f.size(), 1.0);
  Hats hats = channel_mhat(problem, current);
  SeState next;
  next.m_f.assign(current.m_f.size(), 0.0);

  if (problem.app == Application::factor_analysis) {
    auto weights = problem.psi_weights_or_default();
    double coupling = 0.0;
    for (std::size_t k = 0; k < hats.mhat.size(); ++k) {
      next.m_f[k] = ratio_b(problem.pi * current.m_x * hats.mhat[k]);
      coupling += weights[k] * current.m_f[k] * hats.mhat[k];
    }
    next.m_x = update_m_x_dense(problem.xbar, problem.sigma, problem.alpha * coupling);
    return next;
  }

  double mhat = hats.mhat[0];
  next.m_f[0] = update_m_f(problem.eta_for_se(), problem.pi * current.m_x * mhat);
  double b = problem.alpha * current.m_f[0] * mhat;
  if (problem.rho >= 1.0 && !problem.nonneg) {
    next.m_x = update_m_x_dense(problem.xbar, problem.sigma, b);
  } else {
    next.m_x = update_m_x_gb(problem.signal_prior(), problem.rho, problem.xbar,
                             problem.sigma, b, quad_order);
  }
  return next;
}

SeState se_initial_state(const ProblemSpec& problem, const SeOptions& options) {
  std::size_t components =
      problem.app == Application::factor_analysis ? problem.psi.size() : 1;
  SeState s;
  s.m_f.assign(components, 0.0);
  switch (options.init) {
    case SeInit::custom:
      s.m_x = options.m_x0;
      s.m_f.assign(components, options.m_f0);
      break;
    case SeInit::informative: {
      s.m_x = problem.signal_second_moment() - 1e-8;
      s.m_f.assign(components, 1.0 - 1e-8);
      break;
    }
    case SeInit::uninformative: {
      Moments pm = prior_moments_x(problem.signal_prior());
      s.m_x = pm.mean * pm.mean;
      double eta = problem.eta_for_se();
      double mf0 = std::isinf(eta) ? 0.0 : 1.0 / (1.0 + eta);
      if (mf0 <= 0.0) mf0 = options.symmetry_seed;
      s.m_f.assign(components, mf0);
      // An exactly-zero m_x alternates against the seeded m_F forever under
      // the synchronous update. Replacing it by its own update image puts
      // the state on an ordered orbit: the map is coordinatewise monotone,
      // so the trajectory is monotone from the first step.
      if (s.m_x <= 0.0) s.m_x = se_step(problem, s, options.quadrature_order).m_x;
      break;
    }
  }
  return s;
}

double se_e_x(const ProblemSpec& problem, const SeState& state) {
  return problem.signal_second_moment() - state.m_x;
}

double se_e_f(const ProblemSpec& problem, const SeState& state) {
  if (problem.app == Application::factor_analysis)
    return 1.0 - state.m_f_mean(problem.psi_weights_or_default());
  return 1.0 - state.m_f[0];
}

namespace {

double state_change(const SeState& a, const SeState& b) {
  double d = std::abs(a.m_x - b.m_x);
  for (std::size_t k = 0; k < a.m_f.size(); ++k)
    d = std::max(d, std::abs(a.m_f[k] - b.m_f[k]));
  return d;
}

}  // namespace

SeResult se_run(const ProblemSpec& problem, const SeOptions& options) {
  problem.validate();
  SeResult res;
  res.quadrature_order_used = options.quadrature_order;
  int order = options.quadrature_order;

  for (int attempt = 0; attempt < 3; ++attempt) {
    res = SeResult{};
    res.quadrature_order_used = order;
    SeState s = se_initial_state(problem, options);
    res.trajectory.clear();
    res.trajectory.push_back(s);
    res.trajectory_stride = 1;
    double drift_window = 0.0;
    double drift_checkpoint = 0.0;
    const long checkpoint = std::max<long>(1, options.max_iterations * 9 / 10);
    long iter = 0;
    const double seed_scale =
        100.0 * std::max(s.m_x, options.symmetry_seed * problem.signal_second_moment());
    for (; iter < options.max_iterations; ++iter) {
      SeState next = se_step(problem, s, order);
      double change = state_change(next, s);
      // monotone from uninformative init on the Nishimori line; the first
      // steps while the symmetry seed relaxes are excluded (below the
      // instability the seed itself decays)
      if (options.init == SeInit::uninformative && s.m_x > seed_scale) {
        if (s.m_x - next.m_x > res.monotonicity_violation)
          res.monotonicity_violation = s.m_x - next.m_x;
      }
      drift_window = next.m_x - s.m_x;
      if (iter == checkpoint) drift_checkpoint = drift_window;
      s = next;
      if (res.trajectory.size() < static_cast<std::size_t>(options.store_limit) ||
          (iter % 100) == 0) {
        if (res.trajectory.size() >= static_cast<std::size_t>(options.store_limit) &&
            res.trajectory_stride == 1)
          res.trajectory_stride = 100;
        if (res.trajectory_stride == 1 || (iter % res.trajectory_stride) == 0)
          res.trajectory.push_back(s);
      }
      res.final_change = change;
      if (change < options.tolerance) {
        res.converged = true;
        ++iter;
        break;
      }
    }
    res.iterations = iter;
    res.fixed_point = s;
    res.final_drift = drift_window;
    res.drift_trend = drift_window - drift_checkpoint;
    res.e_x = se_e_x(problem, s);
    res.e_f = se_e_f(problem, s);

    if (!options.check_quadrature || !res.converged) return res;
    // quadrature gate: one step at doubled order must agree to 1e-8
    SeState doubled = se_step(problem, s, 2 * order);
    SeState same = se_step(problem, s, order);
    if (state_change(doubled, same) < 1e-8) return res;
    if (order >= 160)
      throw std::runtime_error("se: quadrature failed to converge at order 160");
    order *= 2;
  }
  return res;
}

// --- general (mismatched) state evolution ------------------------------

GeneralSeState se_step_general(const ProblemSpec& problem, const TeacherSpec& teacher,
                               const GeneralSeState& s, int quad_order) {
  if (!(problem.is_awgn_family() || problem.app == Application::completion))
    throw std::invalid_argument("se_step_general: AWGN-family channels only");
  if (s.Q_x < s.q_x - 1e-12 || s.Q_f < s.q_f - 1e-12 || s.q_x < 0 || s.q_f < 0)
    throw std::invalid_argument("se_step_general: need Q >= q >= 0");

  const double eps = problem.app == Application::completion ? problem.epsilon : 1.0;
  const double qz0 = teacher.rho * (teacher.xbar * teacher.xbar + teacher.sigma);
  double v = problem.delta + s.Q_f * s.Q_x - s.q_f * s.q_x;
  if (!(v > 0.0)) throw std::invalid_argument("se_step_general: V must be positive");
  double chihat = eps / v;
  double mhat = chihat;  // AWGN: d_z g = -d_omega g
  double qhat = eps * (teacher.delta + qz0 + s.q_f * s.q_x - 2 * s.m_f * s.m_x) / (v * v);
  // chihat - qhat evaluated in subtracted form: the difference vanishes
  // identically on the Nishimori line and must not be left to cancellation
  double chi_minus_q = eps *
                       ((problem.delta - teacher.delta) + (s.Q_f * s.Q_x - qz0) -
                        2.0 * (s.q_f * s.q_x - s.m_f * s.m_x)) /
                       (v * v);

  double sigma_inv = problem.alpha * (s.q_f * qhat + s.Q_f * chi_minus_q);
  double z_inv = problem.pi * (s.q_x * qhat + s.Q_x * chi_minus_q);
  double scale_f = problem.alpha * s.Q_f * (std::abs(chihat) + std::abs(qhat));
  double scale_x = problem.pi * s.Q_x * (std::abs(chihat) + std::abs(qhat));
  if (sigma_inv < -1e-9 * scale_f || z_inv < -1e-9 * scale_x)
    throw std::runtime_error("se_step_general: negative effective variance");

  GeneralSeState next;

  // fully collapsed overlaps: the windows are flat and the denoisers
  // return the plain prior moments
  if (sigma_inv < 1e-200 || z_inv < 1e-200) {
    Moments pm = prior_moments_x(problem.signal_prior());
    next.m_x = next.q_x = pm.mean * pm.mean;
    next.Q_x = pm.var + pm.mean * pm.mean;
    double eta = problem.eta_for_se();
    double kappa = std::isinf(eta) ? 0.0 : 1.0 / (1.0 + eta);
    next.m_f = next.q_f = kappa;
    next.Q_f = 1.0;
    return next;
  }
  double Sigma = 1.0 / sigma_inv, Z = 1.0 / z_inv;

  // Signal side: teacher Gauss-Bernoulli, student prior from the problem.
  // Conditionally on the teacher branch, (x0, T) is jointly Gaussian, so
  // E[x0 f_a(T)] = E[(x0bar + beta (T - Tbar)) f_a(T)] and all three
  // moments are one-dimensional integrals over T.
  {
    SignalPrior prior = problem.signal_prior();
    double a_coef = problem.alpha * s.m_f * mhat;
    double noise_var = std::max(problem.alpha * s.q_f * qhat, 0.0);
    double m_acc = 0, q_acc = 0, c_acc = 0;
    auto accumulate = [&](double weight, double x0_mean, double x0_var) {
      if (weight <= 0.0) return;
      double t_mean = Sigma * a_coef * x0_mean;
      double t_var = Sigma * Sigma * (a_coef * a_coef * x0_var + noise_var);
      if (t_var < 1e-280) {
        Moments mm = input_moments_x(prior, Sigma, t_mean);
        m_acc += weight * x0_mean * mm.mean;
        q_acc += weight * mm.mean * mm.mean;
        c_acc += weight * mm.var;
        return;
      }
      double beta = Sigma * a_coef * x0_var / t_var;
      double sd = std::sqrt(t_var);
      auto body = [&](double T) {
        Moments mm = input_moments_x(prior, Sigma, T);
        double w = std::exp(log_normal_pdf(T, t_mean, t_var));
        double x0_given_t = x0_mean + beta * (T - t_mean);
        return std::array<double, 3>{w * x0_given_t * mm.mean,
                                     w * mm.mean * mm.mean, w * mm.var};
      };
      // panel cuts: the bulk of T plus a carve-out around the sparse
      // denoiser's switching region at the window scale
      std::vector<double> cuts = {t_mean - 14.0 * sd, t_mean + 14.0 * sd};
      double dip = 10.0 * std::sqrt(Sigma);
      for (double c : {-dip, dip})
        if (c > cuts.front() && c < cuts.back()) cuts.push_back(c);
      std::sort(cuts.begin(), cuts.end());
      for (int which = 0; which < 3; ++which) {
        double acc = 0.0;
        for (std::size_t k = 1; k < cuts.size(); ++k)
          acc += integrate_adaptive(
              [&](double T) { return body(T)[which]; }, cuts[k - 1], cuts[k], 1e-13);
        (which == 0 ? m_acc : which == 1 ? q_acc : c_acc) += weight * acc;
      }
    };
    accumulate(1.0 - teacher.rho, 0.0, 0.0);
    accumulate(teacher.rho, teacher.xbar, teacher.sigma);
    next.m_x = m_acc;
    next.q_x = q_acc;
    next.Q_x = q_acc + c_acc;
  }

  // factor side: Gaussian teacher, linear student denoiser -> closed form
  {
    double b_coef = problem.pi * s.m_x * mhat;
    double noise_var = std::max(problem.pi * s.q_x * qhat, 0.0);
    double eta = problem.eta_for_se();
    if (std::isinf(eta)) {
      next.m_f = Z * b_coef / (1.0 + Z);
      next.q_f = Z * Z * (b_coef * b_coef + noise_var) / ((1.0 + Z) * (1.0 + Z));
      next.Q_f = next.q_f + Z / (1.0 + Z);
    } else {
      double v0 = eta / (1.0 + eta);
      double kappa = 1.0 / (1.0 + eta);  // E[u0 m0] = E[m0^2]
      double denom = Z + v0;
      next.m_f = (Z * kappa + v0 * Z * b_coef) / denom;
      double e_w2 = Z * Z * (b_coef * b_coef + noise_var);
      double e_m0w = Z * b_coef * kappa;
      next.q_f = (Z * Z * kappa + 2 * Z * v0 * e_m0w + v0 * v0 * e_w2) / (denom * denom);
      next.Q_f = next.q_f + v0 * Z / denom;
    }
  }
  return next;
}

// --- replica free entropy ----------------------------------------------

namespace {

// log of the bare tilted partition int dx P_X(x) exp(-b x^2/2 + t x) for
// the Gauss-Bernoulli prior.
double log_inner_gb(double rho, double xbar, double sigma, double b, double t) {
  double log_gauss = -0.5 * std::log1p(b * sigma) +
                     (-b * xbar * xbar + 2 * t * xbar + t * t * sigma) /
                         (2.0 * (1.0 + b * sigma));
  if (rho >= 1.0) return log_gauss;
  return log_sum_exp(std::log1p(-rho), std::log(rho) + log_gauss);
}

// E over the Nishimori-tilted ensemble of log_inner, for conjugate b.
//
// The Gaussian-branch expectation of the Gaussian part is taken in closed
// form, b (xbar^2 + sigma)/2 - log(1 + b sigma)/2, so quadrature only sees
// O(1) remainders; otherwise the O(b) magnitude would have to cancel
// against the -mhat_x m_x / 2 counter-term through quadrature error.
double g_x_term(const ProblemSpec& p, double b, int quad_order) {
  if (b == 0.0) return 0.0;
  const double closed_gauss =
      -0.5 * std::log1p(b * p.sigma) + b * (p.xbar * p.xbar + p.sigma) / 2.0;
  if (p.rho >= 1.0) return closed_gauss;

  const double log_ratio = std::log1p(-p.rho) - std::log(p.rho);
  auto lg = [&](double t) {
    return -0.5 * std::log1p(b * p.sigma) +
           (-b * p.xbar * p.xbar + 2 * t * p.xbar + t * t * p.sigma) /
               (2.0 * (1.0 + b * p.sigma));
  };
  const bool sharp = b * p.sigma > 50.0;

  // zero branch: E_{xi}[ log((1-rho) + rho e^{lg(sqrt(b) xi)}) ]
  double e1;
  double sqrt_b = std::sqrt(b);
  auto zero_branch = [&](double xi) {
    return log_sum_exp(std::log1p(-p.rho),
                       std::log(p.rho) + lg(sqrt_b * xi));
  };
  if (!sharp) {
    e1 = gauss_hermite(quad_order).integrate(zero_branch);
  } else {
    auto weighted = [&](double xi) {
      return std::exp(log_normal_pdf(xi, 0.0, 1.0)) * zero_branch(xi);
    };
    const double cuts[] = {0.0, 2.0, 4.0, 6.0, 9.0, 14.0};
    e1 = 0.0;
    for (std::size_t k = 1; k < std::size(cuts); ++k) {
      e1 += integrate_adaptive(weighted, cuts[k - 1], cuts[k], 1e-13);
      e1 += integrate_adaptive(weighted, -cuts[k], -cuts[k - 1], 1e-13);
    }
  }

  // Gaussian branch: log rho + E[lg] (closed) plus the zero-component
  // correction E[log1p(((1-rho)/rho) e^{-lg})], which is exponentially
  // localised around t = 0
  auto correction = [&](double zeta) {
    double t = b * p.xbar + std::sqrt(b * (1.0 + b * p.sigma)) * zeta;
    double arg = log_ratio - lg(t);
    return arg > 36.0 ? arg : std::log1p(std::exp(std::min(arg, 700.0)));
  };
  double e2;
  if (!sharp) {
    e2 = gauss_hermite(quad_order).integrate(correction);
  } else {
    auto weighted = [&](double zeta) {
      return std::exp(log_normal_pdf(zeta, 0.0, 1.0)) * correction(zeta);
    };
    // the correction peaks where t = 0, i.e. zeta0 = -b xbar / sd
    double sd = std::sqrt(b * (1.0 + b * p.sigma));
    double zeta0 = -b * p.xbar / sd;
    double width = 10.0 * std::sqrt(b * p.sigma) / sd + 1e-8;
    e2 = 0.0;
    if (std::abs(zeta0) < 14.0) {
      double lo = std::max(zeta0 - width, -14.0), hi = std::min(zeta0 + width, 14.0);
      e2 += integrate_adaptive(weighted, lo, hi, 1e-13);
      if (lo > -14.0) e2 += integrate_adaptive(weighted, -14.0, lo, 1e-13);
      if (hi < 14.0) e2 += integrate_adaptive(weighted, hi, 14.0, 1e-13);
    }
  }
  return (1.0 - p.rho) * e1 + p.rho * (std::log(p.rho) + closed_gauss + e2);
}

// Factor-side term: Gaussian with calibration variance v0 = eta/(1+eta).
double g_f_term(double eta, double b) {
  double v0 = std::isinf(eta) ? 1.0 : eta / (1.0 + eta);
  return -0.5 * std::log1p(b * v0) + 0.5 * b;
}

// Channel contribution per measurement: E_y[ Z log Z ] with
// Z(y) = int Du P_out(y | sqrt(V0) u + kappa); translation-invariant.
double channel_entropy_term(const ProblemSpec& p, double v0,
                            const std::vector<double>* v0_per_psi) {
  switch (p.app) {
    case Application::completion:
      return p.epsilon * (-0.5 * std::log(2.0 * M_PI * (p.delta + v0)) - 0.5) +
             (1.0 - p.epsilon) * (-0.5 * kLog2Pi - 0.5);
    case Application::robust_pca: {
      double A = p.delta_s + v0, B = p.delta_l + v0;
      auto zfun = [&](double u) {
        double lw_s = p.epsilon > 0
                          ? std::log(p.epsilon) + log_normal_pdf(u, 0.0, A)
                          : -std::numeric_limits<double>::infinity();
        double lw_l = p.epsilon < 1
                          ? std::log1p(-p.epsilon) + log_normal_pdf(u, 0.0, B)
                          : -std::numeric_limits<double>::infinity();
        return log_sum_exp(lw_s, lw_l);
      };
      auto integrand = [&](double u) {
        double lz = zfun(u);
        return std::exp(lz) * lz;
      };
      double sa = std::sqrt(A), sb = std::sqrt(B);
      std::vector<double> cuts = {0.0, 4.0 * sa, 8.0 * sa, 4.0 * sb, 12.0 * sb};
      std::sort(cuts.begin(), cuts.end());
      double acc = 0.0;
      for (std::size_t k = 1; k < cuts.size(); ++k) {
        if (cuts[k] <= cuts[k - 1]) continue;
        acc += integrate_adaptive(integrand, cuts[k - 1], cuts[k], 1e-13);
        acc += integrate_adaptive(integrand, -cuts[k], -cuts[k - 1], 1e-13);
      }
      return acc;
    }
    case Application::factor_analysis: {
      auto weights = p.psi_weights_or_default();
      double acc = 0.0;
      for (std::size_t k = 0; k < p.psi.size(); ++k)
        acc += weights[k] *
               (-0.5 * std::log(2.0 * M_PI * (p.psi[k] + (*v0_per_psi)[k])) - 0.5);
      return acc;
    }
    default:
      return -0.5 * std::log(2.0 * M_PI * (p.delta + v0)) - 0.5;
  }
}

}  // namespace

double replica_free_entropy(const ProblemSpec& problem, const SeState& state,
                            int quad_order) {
  const double qz = problem.z_second_moment();
  for (double mf : state.m_f)
    if (!(mf * state.m_x < qz) || mf < -1e-12 || state.m_x < -1e-12)
      throw std::invalid_argument("replica_free_entropy: overlaps out of domain");

  Hats hats = channel_mhat(problem, state);
  auto weights = problem.app == Application::factor_analysis
                     ? problem.psi_weights_or_default()
                     : std::vector<double>{1.0};

  // channel term
  double v0 = qz - state.m_f[0] * state.m_x;
  std::vector<double> v0_psi;
  if (problem.app == Application::factor_analysis) {
    v0_psi.resize(problem.psi.size());
    for (std::size_t k = 0; k < problem.psi.size(); ++k)
      v0_psi[k] = qz - state.m_f[k] * state.m_x;
  }
  double phi = problem.alpha * problem.pi *
               channel_entropy_term(problem, v0, &v0_psi);

  // factor term(s)
  double eta = problem.eta_for_se();
  double mhat_x = 0.0;
  for (std::size_t k = 0; k < state.m_f.size(); ++k) {
    double mhat_f = problem.pi * state.m_x * hats.mhat[k];
    phi += problem.alpha * weights[k] *
           (-0.5 * mhat_f * state.m_f[k] + g_f_term(eta, mhat_f));
    mhat_x += problem.alpha * weights[k] * state.m_f[k] * hats.mhat[k];
  }

  // signal term
  phi += problem.pi * (-0.5 * mhat_x * state.m_x +
                       g_x_term(problem, mhat_x, quad_order));
  return phi;
}

// --- selection ----------------------------------------------------------

const char* to_string(SeRegime regime) {
  switch (regime) {
    case SeRegime::unique: return "unique";
    case SeRegime::spinodal_easy: return "spinodal-easy";
    case SeRegime::spinodal_hard: return "spinodal-hard";
  }
  return "?";
}

MmseReport mmse_select(const ProblemSpec& problem, const SeOptions& base) {
  SeOptions opt_u = base;
  opt_u.init = SeInit::uninformative;
  SeOptions opt_i = base;
  opt_i.init = SeInit::informative;

  MmseReport rep;
  rep.uninformative = se_run(problem, opt_u);
  rep.informative = se_run(problem, opt_i);
  rep.converged = rep.uninformative.converged && rep.informative.converged;

  const SeState& u = rep.uninformative.fixed_point;
  const SeState& i = rep.informative.fixed_point;
  double diff = std::abs(u.m_x - i.m_x);
  for (std::size_t k = 0; k < u.m_f.size(); ++k)
    diff = std::max(diff, std::abs(u.m_f[k] - i.m_f[k]));

  rep.ampmse_x = rep.uninformative.e_x;
  rep.ampmse_f = rep.uninformative.e_f;
  if (diff < 1e-6) {
    rep.regime = SeRegime::unique;
    rep.mmse_x = rep.ampmse_x;
    rep.mmse_f = rep.ampmse_f;
    return rep;
  }
  // A perfect fixed point of a noiseless channel has divergent free
  // entropy (the planted overlap saturates and the log term blows up), so
  // it wins the selection outright; evaluating phi at the finite stopping
  // point would underestimate a divergence whose coefficient vanishes at
  // the counting bound.
  if (problem.noiseless_channel() && rep.informative.e_x < 1e-8 &&
      rep.informative.e_f < 1e-8) {
    rep.phi_uninformative = replica_free_entropy(problem, u, base.quadrature_order);
    rep.phi_informative = std::numeric_limits<double>::infinity();
    rep.regime = SeRegime::spinodal_hard;
    rep.mmse_x = rep.informative.e_x;
    rep.mmse_f = rep.informative.e_f;
    return rep;
  }
  rep.phi_uninformative = replica_free_entropy(problem, u, base.quadrature_order);
  rep.phi_informative = replica_free_entropy(problem, i, base.quadrature_order);
  if (rep.phi_informative > rep.phi_uninformative) {
    rep.regime = SeRegime::spinodal_hard;
    rep.mmse_x = rep.informative.e_x;
    rep.mmse_f = rep.informative.e_f;
  } else {
    rep.regime = SeRegime::spinodal_easy;
    rep.mmse_x = rep.ampmse_x;
    rep.mmse_f = rep.ampmse_f;
  }
  return rep;
}

}  // namespace bifamp
