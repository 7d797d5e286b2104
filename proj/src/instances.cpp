#include "instances.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace bifamp {

namespace {

Eigen::Index round_dim(double x) {
  return static_cast<Eigen::Index>(std::floor(x + 0.5));
}

}  // namespace

Channel Instance::channel() const {
  ChannelModel model = problem.channel_model();
  if (auto* rw = std::get_if<RowwiseAwgn>(&model)) rw->psi = psi_rows;
  return Channel(std::move(model), mask);
}

Instance generate(const ProblemSpec& problem, int n, std::uint64_t seed) {
  problem.validate();
  if (n < 2) throw std::invalid_argument("generate: n must be >= 2");
  Instance inst;
  inst.problem = problem;
  inst.n = n;
  inst.seed = seed;
  inst.m = round_dim(problem.alpha * n);
  inst.p = round_dim(problem.pi * n);
  if (inst.m < 1 || inst.p < 1)
    throw std::invalid_argument("generate: alpha*n and pi*n must round to >= 1");

  const double sqrt_n = std::sqrt(double(n));

  // teacher factor matrix, scaled units: entries of sqrt(N) F0 are N(0, 1)
  {
    Rng rng(seed, Stream::factor);
    inst.f0.resize(inst.m, n);
    for (Eigen::Index mu = 0; mu < inst.m; ++mu)
      for (Eigen::Index i = 0; i < n; ++i) inst.f0(mu, i) = rng.normal();
  }

  // teacher signal matrix
  {
    Rng rng(seed, Stream::signal);
    SignalPrior prior = problem.signal_prior();
    inst.x0.resize(n, inst.p);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index l = 0; l < inst.p; ++l) inst.x0(i, l) = sample_x(prior, rng);
  }

  // per-element context
  if (problem.app == Application::completion) {
    // exactly round(eps * M * P) known entries, uniformly at random
    Rng rng(seed, Stream::mask);
    auto mask = std::make_shared<MaskMatrix>(inst.m, inst.p);
    mask->setZero();
    const std::uint64_t total = std::uint64_t(inst.m) * std::uint64_t(inst.p);
    std::uint64_t want = static_cast<std::uint64_t>(
        std::floor(problem.epsilon * double(total) + 0.5));
    std::vector<std::uint64_t> order(total);
    for (std::uint64_t k = 0; k < total; ++k) order[k] = k;
    for (std::uint64_t k = 0; k < total; ++k) {  // Fisher-Yates
      std::uint64_t j = k + rng.below(total - k);
      std::swap(order[k], order[j]);
    }
    for (std::uint64_t k = 0; k < want; ++k) {
      auto idx = order[k];
      (*mask)(idx / inst.p, idx % inst.p) = 1;
    }
    inst.mask = std::move(mask);
  }
  if (problem.app == Application::factor_analysis) {
    Rng rng(seed, Stream::row_variances);
    auto weights = problem.psi_weights_or_default();
    auto psi = std::make_shared<std::vector<double>>(inst.m);
    for (Eigen::Index mu = 0; mu < inst.m; ++mu) {
      double u = rng.uniform(), acc = 0.0;
      std::size_t pick = problem.psi.size() - 1;
      for (std::size_t k = 0; k < weights.size(); ++k) {
        acc += weights[k];
        if (u < acc) {
          pick = k;
          break;
        }
      }
      (*psi)[mu] = problem.psi[pick];
    }
    inst.psi_rows = std::move(psi);
  }
  if (problem.app == Application::calibration || problem.app == Application::cs) {
    // scaled estimate w' = (u0 + sqrt(eta) xi) / sqrt(1 + eta), xi ~ N(0,1)
    Rng rng(seed, Stream::calibration_noise);
    double eta = problem.app == Application::cs ? 0.0 : problem.eta;
    inst.wprime.resize(inst.m, n);
    if (std::isinf(eta)) {
      for (Eigen::Index mu = 0; mu < inst.m; ++mu)
        for (Eigen::Index i = 0; i < n; ++i) inst.wprime(mu, i) = rng.normal();
    } else {
      double scale = 1.0 / std::sqrt(1.0 + eta), noise = std::sqrt(eta);
      for (Eigen::Index mu = 0; mu < inst.m; ++mu)
        for (Eigen::Index i = 0; i < n; ++i)
          inst.wprime(mu, i) = (inst.f0(mu, i) + noise * rng.normal()) * scale;
    }
  }

  // measurements
  {
    Rng rng(seed, Stream::channel_noise);
    Channel channel = inst.channel();
    Eigen::MatrixXd z = inst.f0 * inst.x0 / sqrt_n;
    inst.y.resize(inst.m, inst.p);
    for (Eigen::Index mu = 0; mu < inst.m; ++mu)
      for (Eigen::Index l = 0; l < inst.p; ++l)
        inst.y(mu, l) = channel.sample(z(mu, l), rng, mu, l);
  }
  if (!inst.y.allFinite()) throw std::runtime_error("generate: non-finite Y");
  return inst;
}

// --- binary file format ----------------------------------------------

namespace {

constexpr char kMagic[8] = {'B', 'I', 'F', 'A', 'M', 'P', 'I', 'N'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

// row-major f64 blocks
void write_matrix(std::ostream& os, const Eigen::MatrixXd& mat) {
  for (Eigen::Index r = 0; r < mat.rows(); ++r)
    for (Eigen::Index c = 0; c < mat.cols(); ++c) {
      double v = mat(r, c);
      os.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

Eigen::MatrixXd read_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd mat(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      double v = 0;
      is.read(reinterpret_cast<char*>(&v), sizeof v);
      mat(r, c) = v;
    }
  return mat;
}

}  // namespace

void save_instance(const Instance& inst, const std::string& path) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    os.write(kMagic, sizeof kMagic);
    write_u32(os, kVersion);
    std::string spec = inst.problem.to_json().dump();
    write_u32(os, static_cast<std::uint32_t>(spec.size()));
    os.write(spec.data(), static_cast<std::streamsize>(spec.size()));
    write_u32(os, static_cast<std::uint32_t>(inst.n));
    write_u64(os, inst.seed);
    write_u32(os, static_cast<std::uint32_t>(inst.m));
    write_u32(os, static_cast<std::uint32_t>(inst.p));
    write_matrix(os, inst.f0);
    write_matrix(os, inst.x0);
    write_matrix(os, inst.y);
    if (inst.mask)
      for (Eigen::Index r = 0; r < inst.m; ++r)
        for (Eigen::Index c = 0; c < inst.p; ++c) {
          double v = (*inst.mask)(r, c) ? 1.0 : 0.0;
          os.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
    if (inst.psi_rows)
      for (double v : *inst.psi_rows)
        os.write(reinterpret_cast<const char*>(&v), sizeof v);
    if (inst.wprime.size() > 0) write_matrix(os, inst.wprime);
    if (!os) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

Instance load_instance(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("'" + path + "' is not an instance file");
  if (read_u32(is) != kVersion)
    throw std::runtime_error("'" + path + "': unsupported version");
  std::uint32_t spec_len = read_u32(is);
  std::string spec(spec_len, '\0');
  is.read(spec.data(), spec_len);
  Instance inst;
  inst.problem = ProblemSpec::from_json(nlohmann::json::parse(spec));
  inst.n = static_cast<int>(read_u32(is));
  inst.seed = read_u64(is);
  inst.m = read_u32(is);
  inst.p = read_u32(is);
  inst.f0 = read_matrix(is, inst.m, inst.n);
  inst.x0 = read_matrix(is, inst.n, inst.p);
  inst.y = read_matrix(is, inst.m, inst.p);
  if (inst.problem.app == Application::completion) {
    auto mask = std::make_shared<MaskMatrix>(inst.m, inst.p);
    Eigen::MatrixXd raw = read_matrix(is, inst.m, inst.p);
    for (Eigen::Index r = 0; r < inst.m; ++r)
      for (Eigen::Index c = 0; c < inst.p; ++c) (*mask)(r, c) = raw(r, c) != 0.0;
    inst.mask = std::move(mask);
  }
  if (inst.problem.app == Application::factor_analysis) {
    auto psi = std::make_shared<std::vector<double>>(inst.m);
    for (Eigen::Index r = 0; r < inst.m; ++r) {
      double v = 0;
      is.read(reinterpret_cast<char*>(&v), sizeof v);
      (*psi)[r] = v;
    }
    inst.psi_rows = std::move(psi);
  }
  if (inst.problem.app == Application::calibration ||
      inst.problem.app == Application::cs)
    inst.wprime = read_matrix(is, inst.m, inst.n);
  if (!is) throw std::runtime_error("'" + path + "': truncated file");
  return inst;
}

}  // namespace bifamp
