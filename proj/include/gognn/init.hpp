#pragma once

#include <cmath>
#include <cstddef>

#include "gognn/rng.hpp"
#include "gognn/tensor.hpp"

namespace gognn {

/// Fan-balanced uniform initialization for a rows×cols parameter.
/// `gain` rescales the fan-based bound; layers whose output feeds a
/// magnitude-sensitive op (a tanh gate, a raw dot product) pass gains
/// chosen so activations start at usable scale instead of collapsing.
inline Tensor glorot_uniform(Rng& rng, std::size_t rows, std::size_t cols,
                             double gain = 1.0) {
  const double bound = gain * std::sqrt(6.0 / double(rows + cols));
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from({rows, cols}, std::move(v), /*requires_grad=*/true);
}


/// Seeded normal initialization with the given standard deviation.
inline Tensor normal_tensor(Rng& rng, Shape shape, double stddev) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = stddev * rng.normal();
  return Tensor::from(std::move(shape), std::move(v), /*requires_grad=*/true);
}

}  // namespace gognn
