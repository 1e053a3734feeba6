#include "flowembed/kernel.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flowembed {

KernelShape kernel_shape_from_string(const std::string& s) {
  if (s == "box") return KernelShape::box;
  if (s == "gaussian") return KernelShape::gaussian;
  if (s == "forward") return KernelShape::one_sided_forward;
  if (s == "backward") return KernelShape::one_sided_backward;
  throw std::invalid_argument("kernel: unknown shape '" + s + "'");
}

std::string to_string(KernelShape s) {
  switch (s) {
    case KernelShape::box: return "box";
    case KernelShape::gaussian: return "gaussian";
    case KernelShape::one_sided_forward: return "forward";
    case KernelShape::one_sided_backward: return "backward";
  }
  return "box";
}

double DiscreteKernel::sum() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

DiscreteKernel make_kernel(KernelShape shape, int half_length) {
  if (half_length < 0) throw std::invalid_argument("kernel: half_length must be >= 0");
  const int l = half_length;
  const int n = 2 * l + 1;
  DiscreteKernel k;
  k.half_length = l;
  k.shape = shape;
  k.weights.assign(std::size_t(n), 0.0);
  switch (shape) {
    case KernelShape::box:
      for (auto& w : k.weights) w = 1.0 / double(n);
      break;
    case KernelShape::gaussian: {
      if (l == 0) {
        k.weights[0] = 1.0;
        break;
      }
      const double sigma = double(l) / 3.0;
      double total = 0.0;
      for (int i = -l; i <= l; ++i) {
        const double w = std::exp(-double(i) * double(i) / (2.0 * sigma * sigma));
        k.weights[std::size_t(i + l)] = w;
        total += w;
      }
      for (auto& w : k.weights) w /= total;
      break;
    }
    case KernelShape::one_sided_forward:
      for (int i = 0; i <= l; ++i) k.weights[std::size_t(i + l)] = 1.0 / double(l + 1);
      break;
    case KernelShape::one_sided_backward:
      for (int i = -l; i <= 0; ++i) k.weights[std::size_t(i + l)] = 1.0 / double(l + 1);
      break;
  }
  return k;
}

DiscreteKernel renormalize_truncated(const DiscreteKernel& kernel, int first_kept,
                                     int last_kept) {
  if (first_kept > last_kept)
    throw std::invalid_argument("kernel: kept range is empty");
  if (first_kept > 0 || last_kept < 0)
    throw std::invalid_argument("kernel: kept range must contain index 0");
  const int l = kernel.half_length;
  DiscreteKernel out = kernel;
  double total = 0.0;
  for (int i = -l; i <= l; ++i) {
    if (i < first_kept || i > last_kept) out.weights[std::size_t(i + l)] = 0.0;
    total += out.weights[std::size_t(i + l)];
  }
  if (total <= 0.0)
    throw std::invalid_argument("kernel: kept range carries no weight");
  for (auto& w : out.weights) w /= total;
  return out;
}

}  // namespace flowembed
