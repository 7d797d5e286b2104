#include "problem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bifamp {

const char* to_string(Application app) {
  switch (app) {
    case Application::dictionary: return "dictionary";
    case Application::calibration: return "calibration";
    case Application::sparse_pca: return "sparse_pca";
    case Application::blind_source_separation: return "blind_source_separation";
    case Application::completion: return "completion";
    case Application::robust_pca: return "robust_pca";
    case Application::factor_analysis: return "factor_analysis";
    case Application::cs: return "cs";
  }
  return "?";
}

Application application_from_string(const std::string& name) {
  for (auto app : {Application::dictionary, Application::calibration,
                   Application::sparse_pca, Application::blind_source_separation,
                   Application::completion, Application::robust_pca,
                   Application::factor_analysis, Application::cs})
    if (name == to_string(app)) return app;
  throw std::invalid_argument("unknown application '" + name + "'");
}

void ProblemSpec::validate() const {
  if (!(alpha > 0.0) || !(pi > 0.0))
    throw std::invalid_argument("problem: alpha and pi must be positive");
  if (!(rho > 0.0) || rho > 1.0)
    throw std::invalid_argument("problem: rho must be in (0, 1]");
  if (!(sigma > 0.0)) throw std::invalid_argument("problem: sigma must be > 0");
  if (delta < 0.0) throw std::invalid_argument("problem: delta must be >= 0");
  switch (app) {
    case Application::completion:
      if (!(epsilon > 0.0) || epsilon > 1.0)
        throw std::invalid_argument("completion: epsilon must be in (0, 1]");
      break;
    case Application::robust_pca:
      if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("robust_pca: epsilon must be in [0, 1]");
      if (delta_s < 0.0) throw std::invalid_argument("robust_pca: delta_s >= 0");
      if (!(delta_l > 0.0)) throw std::invalid_argument("robust_pca: delta_l > 0");
      break;
    case Application::factor_analysis: {
      if (psi.empty()) throw std::invalid_argument("factor_analysis: psi empty");
      for (double v : psi)
        if (!(v > 0.0)) throw std::invalid_argument("factor_analysis: psi > 0");
      auto w = psi_weights_or_default();
      double total = 0.0;
      for (double v : w) {
        if (v < 0.0) throw std::invalid_argument("factor_analysis: weights >= 0");
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("factor_analysis: weights must sum to 1");
      break;
    }
    case Application::calibration:
      if (!(eta >= 0.0)) throw std::invalid_argument("calibration: eta must be >= 0");
      break;
    default:
      break;
  }
}

SignalPrior ProblemSpec::signal_prior() const {
  if (nonneg) return NonNegGaussBernoulli{rho, xbar, sigma};
  return GaussBernoulli{rho, xbar, sigma};
}

FactorPrior ProblemSpec::factor_prior() const {
  if (app == Application::calibration) return CalibrationFactor{eta};
  if (app == Application::cs) return CalibrationFactor{0.0};
  return GaussianFactor{};
}

ChannelModel ProblemSpec::channel_model() const {
  switch (app) {
    case Application::completion:
      return MaskedAwgn{delta, epsilon};
    case Application::robust_pca:
      return TwoGaussianMixture{epsilon, delta_s, delta_l};
    case Application::factor_analysis:
      return RowwiseAwgn{};  // realised per-row psi lives in the instance
    default:
      return Awgn{delta};
  }
}

bool ProblemSpec::is_awgn_family() const {
  switch (app) {
    case Application::dictionary:
    case Application::calibration:
    case Application::sparse_pca:
    case Application::blind_source_separation:
    case Application::cs:
      return true;
    default:
      return false;
  }
}

double ProblemSpec::signal_second_moment() const {
  return prior_second_moment_x(signal_prior());
}

double ProblemSpec::z_second_moment() const {
  // E[(sqrt(N) F0)^2] = 1 for every factor ensemble used here
  return signal_second_moment();
}

double ProblemSpec::eta_for_se() const {
  if (app == Application::calibration) return eta;
  if (app == Application::cs) return 0.0;
  return std::numeric_limits<double>::infinity();
}

bool ProblemSpec::noiseless_channel() const {
  switch (app) {
    case Application::robust_pca:
      return delta_s == 0.0;
    case Application::factor_analysis:
      return false;
    default:
      return delta == 0.0;
  }
}

std::vector<double> ProblemSpec::psi_weights_or_default() const {
  if (!psi_weights.empty()) {
    if (psi_weights.size() != psi.size())
      throw std::invalid_argument("factor_analysis: psi_weights size mismatch");
    return psi_weights;
  }
  if (psi.size() == 1) return {1.0};
  if (psi.size() == 2) return {epsilon, 1.0 - epsilon};
  throw std::invalid_argument("factor_analysis: psi_weights required for >2 peaks");
}

void require_known_keys(const nlohmann::json& obj, const char* where,
                        std::initializer_list<const char*> keys) {
  if (!obj.is_object())
    throw std::invalid_argument(std::string(where) + ": expected a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) {
          return it.key() == k;
        }) == keys.end())
      throw std::invalid_argument(std::string(where) + ": unknown key '" +
                                  it.key() + "'");
  }
}

namespace {

double get_number(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string() && v.get<std::string>() == "inf")
    return std::numeric_limits<double>::infinity();
  if (!v.is_number())
    throw std::invalid_argument(std::string("problem: '") + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

nlohmann::json ProblemSpec::to_json() const {
  nlohmann::json j;
  j["application"] = to_string(app);
  j["alpha"] = alpha;
  j["pi"] = pi;
  j["rho"] = rho;
  j["xbar"] = xbar;
  j["sigma"] = sigma;
  if (nonneg) j["nonneg"] = true;
  j["delta"] = delta;
  switch (app) {
    case Application::completion:
      j["epsilon"] = epsilon;
      break;
    case Application::robust_pca:
      j["epsilon"] = epsilon;
      j["delta_s"] = delta_s;
      j["delta_l"] = delta_l;
      break;
    case Application::factor_analysis:
      j["epsilon"] = epsilon;
      j["psi"] = psi;
      if (!psi_weights.empty()) j["psi_weights"] = psi_weights;
      break;
    case Application::calibration:
      if (std::isinf(eta))
        j["eta"] = "inf";
      else
        j["eta"] = eta;
      break;
    default:
      break;
  }
  return j;
}

ProblemSpec ProblemSpec::from_json(const nlohmann::json& j) {
  require_known_keys(j, "problem",
                     {"application", "alpha", "pi", "rho", "xbar", "sigma",
                      "nonneg", "delta", "epsilon", "delta_s", "delta_l", "eta",
                      "psi", "psi_weights"});
  ProblemSpec p;
  if (!j.contains("application"))
    throw std::invalid_argument("problem: 'application' is required");
  p.app = application_from_string(j.at("application").get<std::string>());
  p.alpha = get_number(j, "alpha", p.alpha);
  p.pi = get_number(j, "pi", p.pi);
  p.rho = get_number(j, "rho", p.rho);
  p.xbar = get_number(j, "xbar", p.xbar);
  p.sigma = get_number(j, "sigma", p.sigma);
  if (j.contains("nonneg")) p.nonneg = j.at("nonneg").get<bool>();
  p.delta = get_number(j, "delta", p.delta);
  p.epsilon = get_number(j, "epsilon", p.epsilon);
  p.delta_s = get_number(j, "delta_s", p.delta_s);
  p.delta_l = get_number(j, "delta_l", p.delta_l);
  p.eta = get_number(j, "eta", p.eta);
  if (j.contains("psi")) p.psi = j.at("psi").get<std::vector<double>>();
  if (j.contains("psi_weights"))
    p.psi_weights = j.at("psi_weights").get<std::vector<double>>();
  if (p.app == Application::cs) p.eta = 0.0;
  p.validate();
  return p;
}

}  // namespace bifamp
