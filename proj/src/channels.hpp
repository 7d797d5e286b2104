#pragma once

#include <Eigen/Core>
#include <memory>
#include <variant>
#include <vector>

#include "rng.hpp"

namespace bifamp {

using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// --- output channel models ------------------------------------------
//
// g_out(omega, y, V) is the mean of (z - omega)/V under the tilted measure
// P_out(y|z) N(z; omega, V); equivalently d/domega of the element
// log-partition log_partition_out. Unknown entries of a masked channel have
// g_out = dg_out = 0 and a fixed dummy likelihood N(y; 0, 1).

struct Awgn {
  double delta = 0.0;  // noise variance, >= 0
};

struct MaskedAwgn {
  double delta = 0.0;
  double known_fraction = 1.0;  // used when generating the mask
};

// Two-component Gaussian mixture likelihood (sparse large distortions).
struct TwoGaussianMixture {
  double eps = 1.0;      // fraction of undistorted entries
  double delta_s = 0.0;  // small noise variance
  double delta_l = 1.0;  // large noise variance, > 0
};

struct RowwiseAwgn {
  std::shared_ptr<const std::vector<double>> psi;  // per-row variances
};

using ChannelModel = std::variant<Awgn, MaskedAwgn, TwoGaussianMixture, RowwiseAwgn>;

// Channel model plus the per-element context (mask) it needs.
class Channel {
 public:
  Channel() : model_(Awgn{}) {}
  explicit Channel(ChannelModel model) : model_(std::move(model)) {}
  Channel(ChannelModel model, std::shared_ptr<const MaskMatrix> mask)
      : model_(std::move(model)), mask_(std::move(mask)) {}

  const ChannelModel& model() const { return model_; }
  const std::shared_ptr<const MaskMatrix>& mask() const { return mask_; }
  bool known(Eigen::Index mu, Eigen::Index l) const {
    return !mask_ || (*mask_)(mu, l) != 0;
  }

  double g(double omega, double y, double V, Eigen::Index mu, Eigen::Index l) const;
  double dg(double omega, double y, double V, Eigen::Index mu, Eigen::Index l) const;
  double log_partition(double omega, double y, double V, Eigen::Index mu,
                       Eigen::Index l) const;
  double sample(double z, Rng& rng, Eigen::Index mu, Eigen::Index l) const;

  // Fill G and DG with g_out / its omega-derivative over whole arrays.
  void evaluate(const Eigen::MatrixXd& omega, const Eigen::MatrixXd& y,
                const Eigen::MatrixXd& V, Eigen::MatrixXd& G,
                Eigen::MatrixXd& DG) const;

  double sum_log_partition(const Eigen::MatrixXd& omega, const Eigen::MatrixXd& y,
                           const Eigen::MatrixXd& V) const;

 private:
  ChannelModel model_;
  std::shared_ptr<const MaskMatrix> mask_;
};

}  // namespace bifamp
