// SPDX-License-Identifier: Apache-2.0
#include "shloss/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "shloss/error.hpp"

namespace shloss {

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw InvalidArgument("Rng::index needs n >= 1");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::poisson(double lambda) {
  if (!(lambda >= 0.0) || lambda > 500.0) throw InvalidArgument("Rng::poisson needs lambda in [0, 500]");
  const double limit = std::exp(-lambda);
  std::uint64_t k = 0;
  double product = uniform();
  while (product > limit) {
    ++k;
    product *= uniform();
  }
  return k;
}

}  // namespace shloss
