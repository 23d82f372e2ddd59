#pragma once

#include <random>

#include "eet/scenarios.hpp"
#include "test_util.hpp"

namespace eet::testing {

/// Random state on ground + 7 sites + sink with at most one excitation.
struct OneExcitationSample {
  double a00;
  double sink;
  Matrix block;  // 7x7 site block
};

inline OneExcitationSample random_one_excitation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 0.4);
  OneExcitationSample s;
  s.a00 = u(rng);
  s.sink = u(rng) * (1.0 - s.a00);
  s.block = random_density(rng, 7, 1 + static_cast<Eigen::Index>(rng() % 7)) * (1.0 - s.a00 - s.sink);
  return s;
}

inline Matrix embed(const OneExcitationSample& s, const BasisLayout& layout) {
  const auto n = Eigen::Index(layout.total_dim());
  Matrix rho = Matrix::Zero(n, n);
  const auto g = Eigen::Index(occupation_index(layout, {}));
  const auto k = Eigen::Index(occupation_index(layout, {kSinkLabel}));
  rho(g, g) = s.a00;
  rho(k, k) = s.sink;
  for (std::size_t i = 1; i <= 7; ++i)
    for (std::size_t j = 1; j <= 7; ++j)
      rho(Eigen::Index(occupation_index(layout, {site_label(i)})), Eigen::Index(occupation_index(layout, {site_label(j)}))) =
          s.block(Eigen::Index(i - 1), Eigen::Index(j - 1));
  return rho;
}

}  // namespace eet::testing
