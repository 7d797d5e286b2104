#pragma once

#include <string>
#include <vector>

#include "channels.hpp"
#include "priors.hpp"

// vendored single-header nlohmann::json, pulled in once for the project
#include "json.hpp"

namespace bifamp {

enum class Application {
  dictionary,
  calibration,
  sparse_pca,
  blind_source_separation,
  completion,
  robust_pca,
  factor_analysis,
  cs,  // compressed-sensing anchor: calibration with eta = 0, F known
};

const char* to_string(Application app);
Application application_from_string(const std::string& name);

// Single source of truth for one experiment.
struct ProblemSpec {
  Application app = Application::dictionary;
  double alpha = 0.5;  // M / N
  double pi = 2.0;     // P / N

  // signal prior (Gauss-Bernoulli unless nonneg)
  double rho = 1.0;
  double xbar = 0.0;
  double sigma = 1.0;
  bool nonneg = false;

  // channel parameters
  double delta = 0.0;    // AWGN noise variance
  double epsilon = 1.0;  // known fraction (completion), undistorted fraction
                         // (robust PCA), weight of psi[0] (factor analysis)
  double delta_s = 0.0;  // robust PCA small noise
  double delta_l = 1.0;  // robust PCA large noise
  double eta = std::numeric_limits<double>::infinity();  // calibration
  std::vector<double> psi = {0.5, 2.0};                  // factor analysis
  std::vector<double> psi_weights;  // defaults to {epsilon, 1-epsilon} for 2 peaks

  void validate() const;  // throws std::invalid_argument

  SignalPrior signal_prior() const;
  FactorPrior factor_prior() const;
  // Channel without per-instance context (mask, realised psi rows).
  ChannelModel channel_model() const;

  bool is_awgn_family() const;  // plain AWGN channel (dictionary family)
  double signal_second_moment() const;  // E[(x0)^2]
  double z_second_moment() const;       // <(z0)^2> = N E[(F0)^2] E[(x0)^2]

  // Calibration uncertainty as used by the asymptotic analysis: eta for
  // calibration, 0 for cs (factor known), +inf otherwise.
  double eta_for_se() const;

  // True when exact recovery is possible in principle (the channel carries
  // a noiseless component), so the free entropy of a perfect fixed point
  // diverges.
  bool noiseless_channel() const;

  std::vector<double> psi_weights_or_default() const;

  nlohmann::json to_json() const;
  static ProblemSpec from_json(const nlohmann::json& j);
};

// Strict-schema helpers: reject unknown keys, require types.
void require_known_keys(const nlohmann::json& obj, const char* where,
                        std::initializer_list<const char*> keys);

}  // namespace bifamp
