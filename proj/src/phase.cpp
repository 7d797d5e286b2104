#include "phase.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "math_util.hpp"
#include "pool.hpp"
#include "quadrature.hpp"

namespace bifamp {

const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::pi: return "pi";
    case SweepParam::alpha: return "alpha";
    case SweepParam::rho: return "rho";
    case SweepParam::delta: return "delta";
    case SweepParam::epsilon: return "epsilon";
    case SweepParam::eta: return "eta";
    case SweepParam::psi1: return "psi1";
  }
  return "?";
}

SweepParam sweep_param_from_string(const std::string& name) {
  for (auto p : {SweepParam::pi, SweepParam::alpha, SweepParam::rho,
                 SweepParam::delta, SweepParam::epsilon, SweepParam::eta,
                 SweepParam::psi1})
    if (name == to_string(p)) return p;
  throw std::invalid_argument("unknown sweep parameter '" + name + "'");
}

ProblemSpec with_param(const ProblemSpec& base, SweepParam param, double value) {
  ProblemSpec p = base;
  switch (param) {
    case SweepParam::pi: p.pi = value; break;
    case SweepParam::alpha: p.alpha = value; break;
    case SweepParam::rho: p.rho = value; break;
    case SweepParam::delta: p.delta = value; break;
    case SweepParam::epsilon: p.epsilon = value; break;
    case SweepParam::eta: p.eta = value; break;
    case SweepParam::psi1:
      if (p.psi.empty()) throw std::invalid_argument("psi1 sweep: psi empty");
      p.psi[0] = value;
      break;
  }
  return p;
}

SweepParam natural_sweep_param(const ProblemSpec& problem) {
  switch (problem.app) {
    case Application::completion:
    case Application::robust_pca:
      return SweepParam::epsilon;
    case Application::cs:
      return SweepParam::rho;
    default:
      return SweepParam::pi;
  }
}

ThresholdValue counting_bound(const ProblemSpec& p) {
  ThresholdValue t;
  t.method = "closed-form";
  switch (p.app) {
    case Application::dictionary:
    case Application::calibration:
    case Application::sparse_pca:
    case Application::blind_source_separation:
      if (p.alpha <= p.rho) {
        t.note = "infinite: alpha <= rho";
        return t;
      }
      t.exists = true;
      t.value = p.alpha / (p.alpha - p.rho);  // threshold on pi
      return t;
    case Application::completion:
    case Application::robust_pca:
      t.exists = true;
      t.value = (p.alpha + p.pi) / (p.alpha * p.pi);  // threshold on epsilon
      return t;
    case Application::cs:
      t.exists = true;
      t.value = p.alpha;  // threshold on rho
      return t;
    case Application::factor_analysis:
      t.note = "no counting bound";
      return t;
  }
  return t;
}

namespace {

// mhat of the channel evaluated at the uninformative point m = 0.
double mhat_at_zero(const ProblemSpec& p) {
  SeState zero;
  zero.m_x = 0.0;
  zero.m_f.assign(p.app == Application::factor_analysis ? p.psi.size() : 1, 0.0);
  // reuse the step internals through a tiny perturbation-free state
  // (channel_mhat is private to state_evolution; recompute here)
  double qz = p.z_second_moment();
  switch (p.app) {
    case Application::completion: return p.epsilon / (p.delta + qz);
    case Application::robust_pca: {
      // exact g_out; evaluated by quadrature through se_step linearisation
      // below, so use the same integral via a one-step probe
      break;
    }
    default: return 1.0 / (p.delta + qz);
  }
  // robust PCA: extract mhat from a linear probe of the m_F update:
  // m_F' = pi m_x mhat / (1 + pi m_x mhat) ~= pi m_x mhat for small m_x.
  double h = 1e-9;
  SeState probe = zero;
  probe.m_x = h;
  SeState out = se_step(p, probe);
  return out.m_f[0] / (p.pi * h);
}

ThresholdValue informative_stability(const ProblemSpec& p) {
  ThresholdValue t;
  t.method = "closed-form";
  switch (p.app) {
    case Application::dictionary:
    case Application::calibration:
    case Application::sparse_pca:
    case Application::blind_source_separation:
      if (p.alpha <= p.rho) {
        t.note = "never stable: alpha <= rho";
        return t;
      }
      t.exists = true;
      t.value = p.alpha / (p.alpha - p.rho);
      t.note = "stable for pi above this (delta = 0)";
      return t;
    case Application::completion:
    case Application::robust_pca:
      t.exists = true;
      t.value = (p.alpha + p.pi) / (p.alpha * p.pi);
      t.note = "stable for epsilon above this (noiseless)";
      return t;
    case Application::factor_analysis:
      if (!p.psi.empty() && p.psi[0] == 0.0) {
        t.exists = true;
        t.value = p.pi / (p.alpha * (p.pi - 1.0));
        t.note = "stable for epsilon above this (psi1 = 0)";
      } else {
        t.note = "defined only with a zero-variance peak";
      }
      return t;
    case Application::cs:
      t.exists = true;
      t.value = p.alpha;
      t.note = "stable for rho below this (delta = 0)";
      return t;
  }
  return t;
}

ThresholdValue uninformative_stability(const ProblemSpec& p) {
  ThresholdValue t;
  t.method = "closed-form";
  const double qx = p.rho * (p.xbar * p.xbar + p.sigma);
  switch (p.app) {
    case Application::dictionary:
    case Application::sparse_pca:
    case Application::blind_source_separation: {
      if (p.xbar != 0.0) {
        t.note = "defined only for zero-mean signal";
        return t;
      }
      // lambda^2 = alpha pi rho^2 sigma^2 / (delta + qx)^2
      t.exists = true;
      double d = p.delta + qx;
      t.value = d * d / (p.alpha * p.rho * p.rho * p.sigma * p.sigma);
      t.note = "uninformative point stable for pi below this";
      return t;
    }
    case Application::completion: {
      if (p.xbar != 0.0) {
        t.note = "defined only for zero-mean signal";
        return t;
      }
      t.exists = true;
      t.value = (p.delta + p.sigma) / (p.sigma * std::sqrt(p.alpha * p.pi));
      t.note = "uninformative point stable for epsilon below this";
      return t;
    }
    case Application::robust_pca: {
      if (p.xbar != 0.0) {
        t.note = "defined only for zero-mean signal";
        return t;
      }
      // lambda = sqrt(alpha pi) sigma mhat(eps); root-find on epsilon
      auto lambda = [&](double eps) {
        ProblemSpec q = with_param(p, SweepParam::epsilon, eps);
        return std::sqrt(p.alpha * p.pi) * p.sigma * mhat_at_zero(q);
      };
      if (lambda(0.0) >= 1.0) {
        t.note = "always unstable on [0, 1]";
        return t;
      }
      if (lambda(1.0) <= 1.0) {
        t.note = "always stable on [0, 1]";
        return t;
      }
      double lo = 0.0, hi = 1.0;
      for (int k = 0; k < 60; ++k) {
        double mid = 0.5 * (lo + hi);
        (lambda(mid) < 1.0 ? lo : hi) = mid;
      }
      t.exists = true;
      t.value = 0.5 * (lo + hi);
      t.note = "uninformative point stable for epsilon below this";
      return t;
    }
    case Application::factor_analysis: {
      if (p.xbar != 0.0) {
        t.note = "defined only for zero-mean signal";
        return t;
      }
      auto weights = p.psi_weights_or_default();
      double sum = 0.0;
      for (std::size_t k = 0; k < p.psi.size(); ++k) {
        double d = p.psi[k] + p.sigma;
        sum += weights[k] / (d * d);
      }
      t.exists = true;
      t.value = 1.0 / (p.alpha * p.sigma * p.sigma * sum);
      t.note = "uninformative point stable for pi below this";
      return t;
    }
    case Application::calibration:
    case Application::cs:
      t.note = "uninformative point is not a fixed point (factor partly known)";
      return t;
  }
  return t;
}

// Spectral radius of the numeric Jacobian of se_step at a base state.
double numeric_spectral_radius(const ProblemSpec& p, const SeState& base,
                               double step) {
  const std::size_t k = 1 + base.m_f.size();
  Eigen::MatrixXd jac(k, k);
  SeState f0 = se_step(p, base);
  auto pack = [](const SeState& s, Eigen::VectorXd& v) {
    v(0) = s.m_x;
    for (std::size_t i = 0; i < s.m_f.size(); ++i) v(1 + i) = s.m_f[i];
  };
  Eigen::VectorXd y0(k);
  pack(f0, y0);
  for (std::size_t j = 0; j < k; ++j) {
    SeState pert = base;
    if (j == 0)
      pert.m_x += step;
    else
      pert.m_f[j - 1] += step;
    Eigen::VectorXd y(k);
    pack(se_step(p, pert), y);
    jac.col(j) = (y - y0) / step;
  }
  return jac.eigenvalues().cwiseAbs().maxCoeff();
}

// Locate the spectral-radius-1 crossing of the numeric Jacobian along the
// sweep parameter, bracketing around a closed-form guess.
std::optional<double> numeric_stability_crossing(const ProblemSpec& base,
                                                 SweepParam param, double guess,
                                                 bool informative_point) {
  auto radius = [&](double value) {
    ProblemSpec p = with_param(base, param, value);
    SeState state;
    std::size_t comps = p.app == Application::factor_analysis ? p.psi.size() : 1;
    if (informative_point) {
      state.m_x = p.signal_second_moment() - 1e-7;
      state.m_f.assign(comps, 1.0 - 1e-7);
    } else {
      state.m_x = 1e-8;
      state.m_f.assign(comps, 1e-8);
    }
    return numeric_spectral_radius(p, state, 1e-9);
  };
  double lo = guess * 0.8, hi = guess * 1.25;
  double rlo = radius(lo), rhi = radius(hi);
  if ((rlo - 1.0) * (rhi - 1.0) > 0.0) return std::nullopt;
  for (int k = 0; k < 50; ++k) {
    double mid = 0.5 * (lo + hi);
    double rm = radius(mid);
    if ((rm - 1.0) * (rlo - 1.0) > 0.0) {
      lo = mid;
      rlo = rm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ThresholdReport stability_thresholds(const ProblemSpec& problem) {
  ThresholdReport rep;
  rep.param = natural_sweep_param(problem);
  rep.counting = counting_bound(problem);
  rep.informative_stability = informative_stability(problem);
  rep.uninformative_stability = uninformative_stability(problem);

  // cross-check the uninformative closed form against the numeric Jacobian
  if (rep.uninformative_stability.exists) {
    auto crossing = numeric_stability_crossing(
        problem, rep.param, rep.uninformative_stability.value, false);
    if (crossing)
      rep.jacobian_mismatch =
          std::abs(*crossing - rep.uninformative_stability.value);
  }
  return rep;
}

bool se_recovers(const ProblemSpec& problem, const SeOptions& options) {
  SeOptions opt = options;
  opt.init = SeInit::uninformative;
  SeResult res = se_run(problem, opt);
  double qx = problem.signal_second_moment();
  double threshold = std::max(1e-4, 10.0 * problem.delta * qx);
  if (res.e_x < threshold) return true;
  if (!res.converged) {
    // near-spinodal classification: an accelerating drift means the plateau
    // is being escaped and the run would recover given more iterations
    return res.final_drift > 2.0 * options.tolerance && res.drift_trend > 0.0;
  }
  return false;
}

ThresholdValue find_spinodal(const ProblemSpec& base, SweepParam param, double lo,
                             double hi, double width) {
  SeOptions options;
  options.max_iterations = 200000;
  ThresholdValue t;
  t.method = "bisection";
  bool rec_lo = se_recovers(with_param(base, param, lo), options);
  bool rec_hi = se_recovers(with_param(base, param, hi), options);
  if (rec_lo == rec_hi) {
    t.note = "no recovery transition in bracket";
    return t;
  }
  while (hi - lo > width) {
    double mid = 0.5 * (lo + hi);
    bool rec = se_recovers(with_param(base, param, mid), options);
    (rec == rec_lo ? lo : hi) = mid;
  }
  t.exists = true;
  t.value = 0.5 * (lo + hi);
  t.bracket_width = hi - lo;
  return t;
}

namespace {

// +1: two fixed points, planted wins; -1: unique fixed point or the
// uninformative one wins.
int first_order_sign(const ProblemSpec& p, const SeOptions& options) {
  MmseReport rep = mmse_select(p, options);
  return rep.regime == SeRegime::spinodal_hard ? +1 : -1;
}

}  // namespace

ThresholdValue find_first_order(const ProblemSpec& base, SweepParam param, double lo,
                                double hi, double width) {
  SeOptions options;
  options.max_iterations = 200000;
  ThresholdValue t;
  t.method = "bisection";
  int s_lo = first_order_sign(with_param(base, param, lo), options);
  int s_hi = first_order_sign(with_param(base, param, hi), options);
  if (s_lo == s_hi) {
    t.note = s_lo < 0 ? "no transition: fixed points never split in bracket"
                      : "no sign change in bracket";
    return t;
  }
  while (hi - lo > width) {
    double mid = 0.5 * (lo + hi);
    (first_order_sign(with_param(base, param, mid), options) == s_lo ? lo : hi) = mid;
  }
  t.exists = true;
  t.value = 0.5 * (lo + hi);
  t.bracket_width = hi - lo;
  return t;
}

SweepAxis SweepAxis::linspace(SweepParam p, double from, double to, int count) {
  SweepAxis axis;
  axis.param = p;
  if (count < 1) throw std::invalid_argument("sweep axis: count must be >= 1");
  axis.values.resize(count);
  for (int i = 0; i < count; ++i)
    axis.values[i] =
        count == 1 ? from : from + (to - from) * double(i) / double(count - 1);
  return axis;
}

std::vector<SweepRow> sweep_grid(const ProblemSpec& base,
                                 const std::vector<SweepAxis>& axes,
                                 const SeOptions& options) {
  std::size_t total = 1;
  for (const auto& axis : axes) total *= axis.values.size();
  std::vector<SweepRow> rows(total);

  parallel_for(total, [&](std::size_t idx) {
    SweepRow& row = rows[idx];
    ProblemSpec p = base;
    std::size_t rem = idx;
    row.coords.resize(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
      std::size_t n = axes[a].values.size();
      double v = axes[a].values[rem % n];
      rem /= n;
      row.coords[a] = v;
      p = with_param(p, axes[a].param, v);
    }
    try {
      row.report = mmse_select(p, options);
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
  });
  return rows;
}

}  // namespace bifamp
