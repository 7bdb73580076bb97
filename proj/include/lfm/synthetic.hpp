#pragma once

#include <cstdint>

#include "lfm/dataset.hpp"

namespace lfm {

/// Ratings y = mean + a_u . b_i + N(0, noise^2) with a, b ~ N(0, factor_scale^2)
/// of dimension `rank`. Each user rates `per_user` distinct items drawn with
/// Zipf-like popularity weights (rank r has weight r^-popularity_exponent).
struct LowRankConfig {
  Index users = 200;
  Index items = 200;
  Index per_user = 40;
  Index rank = 4;
  double noise = 0.3;
  double mean = 3.0;
  double factor_scale = 0.7;
  double popularity_exponent = 1.0;
  std::uint64_t seed = 7;
};

Dataset make_low_rank(const LowRankConfig& cfg);

/// Every user and every item has exactly `degree` ratings, so n grows with
/// `users` while the n' distribution stays fixed. Requires items == users.
struct FixedDegreeConfig {
  Index users = 2500;
  Index degree = 20;
  Index rank = 4;
  double noise = 0.3;
  double mean = 3.0;
  double factor_scale = 0.7;
  std::uint64_t seed = 11;
};

Dataset make_fixed_degree(const FixedDegreeConfig& cfg);

}  // namespace lfm
