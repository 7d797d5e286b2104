#include "amp.hpp"

#include <cmath>
#include <numeric>

#include "bethe.hpp"

namespace bifamp {

namespace {

void apply_signal_denoiser(const SignalPrior& prior, const Eigen::MatrixXd& Sigma,
                           const Eigen::MatrixXd& T, Eigen::MatrixXd& a_out,
                           Eigen::MatrixXd& c_out) {
  const Eigen::Index rows = Sigma.rows(), cols = Sigma.cols();
  a_out.resize(rows, cols);
  c_out.resize(rows, cols);
  for (Eigen::Index l = 0; l < cols; ++l)
    for (Eigen::Index i = 0; i < rows; ++i) {
      Moments mm = input_moments_x(prior, Sigma(i, l), T(i, l));
      a_out(i, l) = mm.mean;
      c_out(i, l) = mm.var;
    }
}

void apply_factor_denoiser(const FactorPrior& prior, const Eigen::MatrixXd& Z,
                           const Eigen::MatrixXd& W, const Eigen::MatrixXd& wprime,
                           Eigen::MatrixXd& r_out, Eigen::MatrixXd& s_out) {
  const Eigen::Index rows = Z.rows(), cols = Z.cols();
  r_out.resize(rows, cols);
  s_out.resize(rows, cols);
  const bool has_wp = wprime.size() > 0;
  for (Eigen::Index i = 0; i < cols; ++i)
    for (Eigen::Index mu = 0; mu < rows; ++mu) {
      Moments mm = input_moments_f(prior, Z(mu, i), W(mu, i),
                                   has_wp ? wprime(mu, i) : 0.0);
      r_out(mu, i) = mm.mean;
      s_out(mu, i) = mm.var;
    }
}

long clamp_floor(Eigen::MatrixXd& mat, double floor_value) {
  long clamped = 0;
  for (Eigen::Index j = 0; j < mat.cols(); ++j)
    for (Eigen::Index i = 0; i < mat.rows(); ++i)
      if (!(mat(i, j) >= floor_value)) {
        mat(i, j) = floor_value;
        ++clamped;
      }
  return clamped;
}

// Output-side arrays (V, omega, g, dg) computed from the given a, c, r, s
// with the time-lagged Onsager correction read from the state.
struct OutputSide {
  Eigen::MatrixXd aa, rr;  // elementwise squares
  Eigen::MatrixXd V, omega, G, DG;
  // empirical order parameters (full-TAP mode)
  double q_x = 0, q_f = 0, cbar = 0, sbar = 0;
};

void compute_output_side(const AmpState& st, const Instance& inst,
                         const Channel& channel, const AmpOptions& options,
                         OutputSide& w) {
  const double inv_n = 1.0 / inst.n;
  const double inv_sqrt_n = 1.0 / std::sqrt(double(inst.n));
  w.aa = st.a.array().square();
  w.rr = st.r.array().square();
  if (options.variance_mode == VarianceMode::full_tap) {
    w.q_x = st.a.squaredNorm() / double(st.a.size());
    w.q_f = st.r.squaredNorm() / double(st.r.size());
    w.cbar = st.c.mean();
    w.sbar = st.s.mean();
    double v_scalar =
        std::max((w.q_f + w.sbar) * (w.q_x + w.cbar) - w.q_f * w.q_x, 1e-30);
    w.V.setConstant(inst.m, inst.p, v_scalar);
    double onsager = w.q_f * w.cbar + w.q_x * w.sbar;
    w.omega = inv_sqrt_n * (st.r * st.a) - onsager * st.g_prev;
  } else {
    w.V = inv_n * (st.s * (st.c + w.aa.matrix()) + w.rr.matrix() * st.c);
    Eigen::MatrixXd onsager = inv_n * (st.r.cwiseProduct(st.r_prev) * st.c +
                                       st.s * st.a.cwiseProduct(st.a_prev));
    w.omega = inv_sqrt_n * (st.r * st.a) - st.g_prev.cwiseProduct(onsager);
  }
  channel.evaluate(w.omega, inst.y, w.V, w.G, w.DG);
}

// Signal-side window (Sigma, T) from the output side; variance treatment
// depends on the mode.
void signal_window(const AmpState& st, const OutputSide& w, const Instance& inst,
                   const AmpOptions& options, AmpDiagnostics& diag,
                   Eigen::MatrixXd& Sigma, Eigen::MatrixXd& T) {
  const double inv_n = 1.0 / inst.n;
  const double inv_sqrt_n = 1.0 / std::sqrt(double(inst.n));
  switch (options.variance_mode) {
    case VarianceMode::general: {
      Eigen::MatrixXd inv =
          inv_n * ((w.rr.matrix() + st.s).transpose() * (-w.DG) -
                   st.s.transpose() * w.G.cwiseProduct(w.G));
      diag.sigma_extra_term =
          inv_n * (st.s.transpose() * ((-w.DG) + w.G.cwiseProduct(w.G)))
                      .array()
                      .abs()
                      .mean();
      diag.clamped_variances += clamp_floor(inv, 1e-30);
      Sigma = inv.cwiseInverse();
      diag.clamped_variances += clamp_floor(Sigma, options.variance_floor);
      break;
    }
    case VarianceMode::nishimori: {
      Eigen::MatrixXd inv = inv_n * (w.rr.matrix().transpose() * (-w.DG));
      clamp_floor(inv, 1e-30);
      Sigma = inv.cwiseInverse();
      break;
    }
    case VarianceMode::full_tap: {
      double alpha = double(inst.m) / inst.n;
      double q_tilde = w.G.squaredNorm() / double(inst.m * inst.p);
      double inv = std::max(alpha * w.q_f * q_tilde, 1e-30);
      Sigma.setConstant(st.a.rows(), st.a.cols(), 1.0 / inv);
      double gg = w.G.cwiseProduct(st.g_prev).mean();
      T = Sigma.cwiseProduct(inv_sqrt_n * (st.r.transpose() * w.G) +
                             (alpha * q_tilde * w.q_f) * st.a -
                             (alpha * w.sbar * gg) * st.a_prev);
      return;
    }
  }
  T = Sigma.cwiseProduct(
      inv_sqrt_n * (st.r.transpose() * w.G) -
      st.a.cwiseProduct(inv_n * (w.rr.matrix().transpose() * w.DG)) -
      st.a_prev.cwiseProduct(inv_n *
                             (st.s.transpose() * w.G.cwiseProduct(st.g_prev))));
}

void factor_window(const AmpState& st, const OutputSide& w, const Instance& inst,
                   const AmpOptions& options, AmpDiagnostics& diag,
                   Eigen::MatrixXd& Z, Eigen::MatrixXd& W) {
  const double inv_n = 1.0 / inst.n;
  const double inv_sqrt_n = 1.0 / std::sqrt(double(inst.n));
  switch (options.variance_mode) {
    case VarianceMode::general: {
      Eigen::MatrixXd inv =
          inv_n * ((-w.DG) * (w.aa.matrix() + st.c).transpose() -
                   w.G.cwiseProduct(w.G) * st.c.transpose());
      diag.z_extra_term =
          inv_n * (((-w.DG) + w.G.cwiseProduct(w.G)) * st.c.transpose())
                      .array()
                      .abs()
                      .mean();
      diag.clamped_variances += clamp_floor(inv, 1e-30);
      Z = inv.cwiseInverse();
      diag.clamped_variances += clamp_floor(Z, options.variance_floor);
      break;
    }
    case VarianceMode::nishimori: {
      Eigen::MatrixXd inv = inv_n * ((-w.DG) * w.aa.matrix().transpose());
      clamp_floor(inv, 1e-30);
      Z = inv.cwiseInverse();
      break;
    }
    case VarianceMode::full_tap: {
      double pi = double(inst.p) / inst.n;
      double q_tilde = w.G.squaredNorm() / double(inst.m * inst.p);
      double inv = std::max(pi * w.q_x * q_tilde, 1e-30);
      Z.setConstant(st.r.rows(), st.r.cols(), 1.0 / inv);
      double gg = w.G.cwiseProduct(st.g_prev).mean();
      W = Z.cwiseProduct(inv_sqrt_n * (w.G * st.a.transpose()) +
                         (pi * q_tilde * w.q_x) * st.r -
                         (pi * w.cbar * gg) * st.r_prev);
      return;
    }
  }
  W = Z.cwiseProduct(
      inv_sqrt_n * (w.G * st.a.transpose()) -
      st.r.cwiseProduct(inv_n * (w.DG * w.aa.matrix().transpose())) -
      st.r_prev.cwiseProduct(inv_n *
                             (w.G.cwiseProduct(st.g_prev) * st.c.transpose())));
}

}  // namespace

AmpState amp_init(const Instance& inst, const AmpOptions& options, Rng& rng) {
  AmpState st;
  const Eigen::Index n = inst.n, m = inst.m, p = inst.p;
  st.a.resize(n, p);
  st.c.resize(n, p);
  st.r.resize(m, n);
  st.s.resize(m, n);
  const SignalPrior sp = inst.problem.signal_prior();
  const FactorPrior fp = inst.problem.factor_prior();
  const bool has_wp = inst.wprime.size() > 0;

  switch (options.init) {
    case AmpInit::prior: {
      const double k = options.init_scale;
      Moments pm = prior_moments_x(sp);
      for (Eigen::Index l = 0; l < p; ++l)
        for (Eigen::Index i = 0; i < n; ++i) {
          st.a(i, l) = pm.mean + k * (sample_x(sp, rng) - pm.mean);
          st.c(i, l) = pm.var;
        }
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index mu = 0; mu < m; ++mu) {
          double wp = has_wp ? inst.wprime(mu, i) : 0.0;
          Moments fm = prior_moments_f(fp, wp);
          st.r(mu, i) = fm.mean + k * (sample_f(fp, rng, wp) - fm.mean);
          st.s(mu, i) = fm.var;
        }
      break;
    }
    case AmpInit::planted:
      st.a = inst.x0;
      st.c.setConstant(options.planted_variance);
      st.r = inst.f0;
      st.s.setConstant(options.planted_variance);
      break;
    case AmpInit::cs: {
      const double k = options.init_scale;
      Moments pm = prior_moments_x(sp);
      for (Eigen::Index l = 0; l < p; ++l)
        for (Eigen::Index i = 0; i < n; ++i) {
          st.a(i, l) = pm.mean + k * (sample_x(sp, rng) - pm.mean);
          st.c(i, l) = pm.var;
        }
      st.r = inst.f0;
      st.s.setZero();
      st.factor_frozen = true;
      break;
    }
  }

  // the t = -1 quantities are zero, so the first sweep sees no Onsager terms
  st.a_prev = Eigen::MatrixXd::Zero(n, p);
  st.r_prev = Eigen::MatrixXd::Zero(m, n);
  st.g_prev = Eigen::MatrixXd::Zero(m, p);
  st.omega = Eigen::MatrixXd::Zero(m, p);
  st.V = Eigen::MatrixXd::Ones(m, p);
  st.Sigma = Eigen::MatrixXd::Ones(n, p);
  st.T = Eigen::MatrixXd::Zero(n, p);
  st.Zvar = Eigen::MatrixXd::Ones(m, n);
  st.W = Eigen::MatrixXd::Zero(m, n);
  st.iteration = 0;
  return st;
}

AmpDiagnostics amp_iterate(AmpState& st, const Instance& inst,
                           const AmpOptions& options, Rng* schedule_rng) {
  const Channel channel = inst.channel();
  const SignalPrior sp = inst.problem.signal_prior();
  const FactorPrior fp = inst.problem.factor_prior();
  const double beta = options.damping;
  AmpDiagnostics diag;

  OutputSide w;
  Eigen::MatrixXd a_next, c_next, r_next, s_next;

  if (options.schedule == UpdateSchedule::parallel) {
    compute_output_side(st, inst, channel, options, w);
    signal_window(st, w, inst, options, diag, st.Sigma, st.T);
    apply_signal_denoiser(sp, st.Sigma, st.T, a_next, c_next);
    if (!st.factor_frozen) {
      factor_window(st, w, inst, options, diag, st.Zvar, st.W);
      apply_factor_denoiser(fp, st.Zvar, st.W, inst.wprime, r_next, s_next);
    } else {
      r_next = st.r;
      s_next = st.s;
    }
    diag.delta_a = beta * (a_next - st.a).array().abs().mean();
    st.a_prev = st.a;
    st.r_prev = st.r;
    st.a = beta * a_next + (1 - beta) * st.a_prev;
    st.c = beta * c_next + (1 - beta) * st.c;
    if (!st.factor_frozen) {
      st.r = beta * r_next + (1 - beta) * st.r_prev;
      st.s = beta * s_next + (1 - beta) * st.s;
    }
  } else {
    // Block-sequential: alternate signal column blocks and factor row
    // blocks in random order. The live copy advances block by block so
    // later blocks see the newest estimates; the Onsager lag quantities
    // (g_prev, a_prev, r_prev) stay frozen for the whole sweep.
    const int nb = std::max(1, options.blocks);
    std::vector<int> order(2 * nb);
    std::iota(order.begin(), order.end(), 0);
    if (schedule_rng)
      for (std::size_t k = order.size(); k > 1; --k)
        std::swap(order[k - 1], order[schedule_rng->below(k)]);

    AmpState work = st;
    Eigen::MatrixXd Sigma_full, T_full, Z_full, W_full;
    for (int step : order) {
      compute_output_side(work, inst, channel, options, w);
      const bool signal_side = step < nb;
      const int b = signal_side ? step : step - nb;
      if (signal_side) {
        signal_window(work, w, inst, options, diag, Sigma_full, T_full);
        apply_signal_denoiser(sp, Sigma_full, T_full, a_next, c_next);
        Eigen::Index lo = inst.p * b / nb, hi = inst.p * (b + 1) / nb;
        for (Eigen::Index l = lo; l < hi; ++l) {
          work.a.col(l) = beta * a_next.col(l) + (1 - beta) * st.a.col(l);
          work.c.col(l) = beta * c_next.col(l) + (1 - beta) * st.c.col(l);
        }
        st.Sigma = Sigma_full;
        st.T = T_full;
      } else if (!st.factor_frozen) {
        factor_window(work, w, inst, options, diag, Z_full, W_full);
        apply_factor_denoiser(fp, Z_full, W_full, inst.wprime, r_next, s_next);
        Eigen::Index lo = inst.m * b / nb, hi = inst.m * (b + 1) / nb;
        for (Eigen::Index mu = lo; mu < hi; ++mu) {
          work.r.row(mu) = beta * r_next.row(mu) + (1 - beta) * st.r.row(mu);
          work.s.row(mu) = beta * s_next.row(mu) + (1 - beta) * st.s.row(mu);
        }
        st.Zvar = Z_full;
        st.W = W_full;
      }
    }
    diag.delta_a = (work.a - st.a).array().abs().mean();
    // consistent output side for the next sweep's Onsager terms
    compute_output_side(work, inst, channel, options, w);
    st.a_prev = std::move(st.a);
    st.r_prev = std::move(st.r);
    st.a = std::move(work.a);
    st.c = std::move(work.c);
    st.r = std::move(work.r);
    st.s = std::move(work.s);
  }

  st.omega = w.omega;
  st.V = w.V;
  st.g_prev = w.G;
  ++st.iteration;

  diag.nishimori_lhs = -w.DG.mean();
  diag.nishimori_rhs = w.G.array().square().mean();
  diag.v_mean = w.V.mean();
  diag.v_min = w.V.minCoeff();

  if (!st.a.allFinite() || !st.c.allFinite() || !st.r.allFinite() ||
      !st.s.allFinite() || !st.omega.allFinite())
    throw AmpError("amp diverged (non-finite state)", st.iteration);
  return diag;
}

AmpResult amp_run(const Instance& inst, const AmpOptions& options,
                  bool with_truth_trace) {
  Rng rng(options.seed, Stream::amp_init);
  Rng schedule_rng(options.seed, Stream::schedule);
  AmpResult result;
  result.state = amp_init(inst, options, rng);
  AmpState& st = result.state;

  auto record = [&](long t, const AmpDiagnostics& diag) {
    AmpTraceRow row;
    row.iteration = t;
    row.delta_a = diag.delta_a;
    row.nishimori_lhs = diag.nishimori_lhs;
    row.nishimori_rhs = diag.nishimori_rhs;
    row.v_mean = diag.v_mean;
    if (with_truth_trace) {
      row.m_x = overlap_x(st.a, inst.x0);
      row.m_f = overlap_f(st.r, inst.f0, inst.n);
      double inv_sqrt_n = 1.0 / std::sqrt(double(inst.n));
      row.mse_z = (inv_sqrt_n * (st.r * st.a) - inv_sqrt_n * (inst.f0 * inst.x0))
                      .squaredNorm() /
                  double(inst.m * inst.p);
      if (t <= options.align_overlaps_first) {
        aligned_overlaps(st.a, st.r, inst.x0, inst.f0, inst.n, row.m_x_aligned,
                         row.m_f_aligned);
        row.aligned_valid = true;
      }
    }
    if (options.track_free_entropy && t > 0) {
      row.phi_bethe = bethe_free_entropy(st, inst).phi_bethe;
      row.phi_valid = true;
    }
    result.trace.push_back(row);
  };

  record(0, AmpDiagnostics{});
  long t = 0;
  for (; t < options.max_iterations; ++t) {
    AmpDiagnostics diag = amp_iterate(st, inst, options, &schedule_rng);
    result.last = diag;
    record(t + 1, diag);
    if (diag.delta_a < options.tolerance) {
      result.converged = true;
      ++t;
      break;
    }
  }
  result.iterations = t;
  return result;
}

double overlap_x(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x0) {
  return a.cwiseProduct(x0).sum() / double(a.size());
}

double overlap_f(const Eigen::MatrixXd& r, const Eigen::MatrixXd& f0scaled, int n) {
  return r.cwiseProduct(f0scaled).sum() / double(r.rows() * n);
}

namespace {

// Greedy best permutation-and-sign gauge from the combined normalised
// correlations of signal rows and factor columns.
void greedy_gauge(const Eigen::MatrixXd& a, const Eigen::MatrixXd& r,
                  const Eigen::MatrixXd& x0, const Eigen::MatrixXd& f0,
                  std::vector<Eigen::Index>& perm, std::vector<int>& signs) {
  const Eigen::Index n = a.rows();
  Eigen::VectorXd na = a.rowwise().norm(), nx = x0.rowwise().norm();
  Eigen::VectorXd nr = r.colwise().norm(), nf = f0.colwise().norm();
  const double tiny = 1e-300;
  Eigen::MatrixXd corr = a * x0.transpose();
  Eigen::MatrixXd cf = r.transpose() * f0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      corr(i, j) = corr(i, j) / std::max(na(i) * nx(j), tiny) +
                   cf(i, j) / std::max(nr(i) * nf(j), tiny);

  perm.assign(n, -1);
  signs.assign(n, 1);
  std::vector<bool> row_used(n, false), col_used(n, false);
  for (Eigen::Index pick = 0; pick < n; ++pick) {
    double best = -1.0;
    Eigen::Index bi = 0, bj = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (row_used[i]) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (col_used[j]) continue;
        double v = std::abs(corr(i, j));
        if (v > best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    row_used[bi] = true;
    col_used[bj] = true;
    perm[bi] = bj;
    signs[bi] = corr(bi, bj) >= 0.0 ? 1 : -1;
  }
}

}  // namespace

void aligned_overlaps(const Eigen::MatrixXd& a, const Eigen::MatrixXd& r,
                      const Eigen::MatrixXd& x0, const Eigen::MatrixXd& f0,
                      int n, double& m_x, double& m_f) {
  std::vector<Eigen::Index> perm;
  std::vector<int> signs;
  greedy_gauge(a, r, x0, f0, perm, signs);
  double sx = 0.0, sf = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    sx += signs[i] * a.row(i).dot(x0.row(perm[i]));
    sf += signs[i] * r.col(i).dot(f0.col(perm[i]));
  }
  m_x = sx / double(a.size());
  m_f = sf / double(r.rows() * n);
}

MseReport evaluate_mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& r,
                       const Eigen::MatrixXd& x0, const Eigen::MatrixXd& f0,
                       int n) {
  MseReport rep;
  const double inv_sqrt_n = 1.0 / std::sqrt(double(n));
  rep.mse_z = (inv_sqrt_n * (r * a) - inv_sqrt_n * (f0 * x0)).squaredNorm() /
              double(r.rows() * a.cols());
  greedy_gauge(a, r, x0, f0, rep.permutation, rep.signs);
  double ex = 0.0, ef = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    ex += (rep.signs[i] * a.row(i) - x0.row(rep.permutation[i])).squaredNorm();
    ef += (rep.signs[i] * r.col(i) - f0.col(rep.permutation[i])).squaredNorm();
  }
  rep.mse_x_aligned = ex / double(a.size());
  rep.mse_f_aligned = ef / double(r.rows() * n);
  return rep;
}

}  // namespace bifamp
