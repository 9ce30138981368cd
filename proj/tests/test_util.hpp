#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "docnmt/tensor.hpp"

namespace docnmt::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0, bool requires_grad = true) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

/// Fixed random projection that turns any tensor into a scalar loss.
inline Tensor project_to_scalar(const Tensor& out, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum(mul(out, random_tensor(out.shape(), rng, 1.0, false)));
}

/// Largest relative error, per input tensor measured as max|analytic - numeric|
/// over max(|analytic|, |numeric|, floor), between backprop gradients and central
/// finite differences of `loss_fn` with respect to every element of `inputs`.
/// The floor keeps tensors whose exact gradient is zero (attention key biases)
/// from dividing roundoff by roundoff.
inline double gradient_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> inputs, double h = 1e-6,
                             double floor = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  loss_fn().backward();
  double worst = 0.0;
  for (auto& t : inputs) {
    std::vector<double> analytic(t.numel(), 0.0);
    if (!t.grad().empty()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    std::vector<double> numeric(t.numel());
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double up = loss_fn().item();
      data[i] = orig - h;
      const double down = loss_fn().item();
      data[i] = orig;
      numeric[i] = (up - down) / (2.0 * h);
    }
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
      scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    }
    worst = std::max(worst, diff / std::max(scale, floor));
  }
  return worst;
}

}  // namespace docnmt::testing
