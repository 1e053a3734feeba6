#pragma once

#include <string>
#include <vector>

namespace flowembed {

enum class KernelShape {
  box,
  gaussian,
  one_sided_forward,
  one_sided_backward,
};

KernelShape kernel_shape_from_string(const std::string& s);
std::string to_string(KernelShape s);

/// Discrete trajectory-certainty distribution over sample indices -L..L.
/// Weights are non-negative and sum to 1.
struct DiscreteKernel {
  int half_length = 0;
  KernelShape shape = KernelShape::box;
  std::vector<double> weights;  // size 2L+1; weights[i + L] is the weight at index i

  double weight(int index) const { return weights[std::size_t(index + half_length)]; }
  double sum() const;
};

/// box: uniform 1/(2L+1); gaussian: exp(-t^2 / (2 sigma^2)) with sigma = L/3,
/// normalized; one-sided: box restricted to t >= 0 (forward) or t <= 0
/// (backward), normalized.
DiscreteKernel make_kernel(KernelShape shape, int half_length);

/// Zero the weights outside [first_kept, last_kept] and rescale the rest to
/// sum 1. The kept range must contain index 0.
DiscreteKernel renormalize_truncated(const DiscreteKernel& kernel, int first_kept,
                                     int last_kept);

}  // namespace flowembed
