#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "doctest.h"
#include "kgx/rng.hpp"
#include "kgx/tape.hpp"

namespace kgx::testutil {

// Central finite differences against backward() for a scalar-valued build
// function over leaf tensors. Relative error tol with an absolute floor.
inline void check_gradients(
    std::vector<Tensor> inputs,
    const std::function<Tape::NodeId(Tape&, std::span<const Tape::NodeId>)>& build,
    double step = 1e-5, double tol = 1e-4, double floor = 1e-7) {
  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Tape::NodeId> leaves;
    leaves.reserve(xs.size());
    for (const Tensor& x : xs) leaves.push_back(tape.leaf(x));
    const Tape::NodeId loss = build(tape, leaves);
    return tape.value(loss).item();
  };

  Tape tape;
  std::vector<Tape::NodeId> leaves;
  for (const Tensor& x : inputs) leaves.push_back(tape.leaf(x));
  const Tape::NodeId loss = build(tape, leaves);
  const std::vector<Tensor> grads = tape.backward(loss);

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor& g = grads[leaves[i]];
    REQUIRE(g.size() == inputs[i].size());
    double worst = 0.0;
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      std::vector<Tensor> xs = inputs;
      const double orig = xs[i][j];
      xs[i][j] = orig + step;
      const double up = eval(xs);
      xs[i][j] = orig - step;
      const double down = eval(xs);
      const double fd = (up - down) / (2.0 * step);
      const double ad = g[j];
      const double err = std::fabs(ad - fd);
      const double limit = std::max(tol * std::max(std::fabs(ad), std::fabs(fd)), floor);
      if (err > limit && err > worst) worst = err;
      INFO("input ", i, " component ", j, ": autodiff ", ad, " vs fd ", fd);
      CHECK(err <= limit);
    }
  }
}

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(-scale, scale);
  return t;
}

}  // namespace kgx::testutil
