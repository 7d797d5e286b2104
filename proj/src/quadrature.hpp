#pragma once

#include <functional>
#include <vector>

namespace bifamp {

// Nodes and weights for E_{xi ~ N(0,1)}[f(xi)] (probabilists' convention:
// sum_k w_k f(x_k) with sum w_k = 1).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) acc += weights[k] * f(nodes[k]);
    return acc;
  }
};

// Cached rule of the given order (40, 80, 160 are precomputed on first use;
// other orders are built on demand).
const GaussHermiteRule& gauss_hermite(int order);

// Adaptive Simpson on [a, b] to absolute tolerance tol.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol, int max_depth = 60);

// Pairwise (tree) summation. Deterministic order, fixed fan-in.
double pairwise_sum(const double* data, std::size_t n);

}  // namespace bifamp
