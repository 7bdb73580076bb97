#include "lfm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lfm/error.hpp"

namespace lfm {

namespace {

std::shared_ptr<IdMaps> numbered_ids(Index users, Index items) {
  auto ids = std::make_shared<IdMaps>();
  for (Index u = 0; u < users; ++u) ids->users.intern("u" + std::to_string(u));
  for (Index i = 0; i < items; ++i) ids->items.intern("i" + std::to_string(i));
  return ids;
}

std::vector<std::vector<double>> factors(Index count, Index rank, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<std::vector<double>> out(count, std::vector<double>(rank));
  for (auto& row : out) {
    for (double& x : row) x = normal(rng);
  }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

Dataset make_low_rank(const LowRankConfig& cfg) {
  if (cfg.per_user > cfg.items || cfg.users == 0 || cfg.per_user == 0) {
    throw Error(ErrorKind::kConfig, "invalid low-rank dataset shape");
  }
  std::mt19937_64 rng(cfg.seed);
  const auto a = factors(cfg.users, cfg.rank, cfg.factor_scale, rng);
  const auto b = factors(cfg.items, cfg.rank, cfg.factor_scale, rng);

  std::vector<Index> popularity_order(cfg.items);
  std::iota(popularity_order.begin(), popularity_order.end(), 0);
  std::shuffle(popularity_order.begin(), popularity_order.end(), rng);
  std::vector<double> weight(cfg.items);
  for (Index r = 0; r < cfg.items; ++r) {
    weight[popularity_order[r]] = std::pow(static_cast<double>(r + 1), -cfg.popularity_exponent);
  }

  std::normal_distribution<double> noise(0.0, cfg.noise);
  std::vector<IndexedRating> records;
  records.reserve(cfg.users * cfg.per_user);
  for (Index u = 0; u < cfg.users; ++u) {
    std::vector<double> w = weight;
    for (Index j = 0; j < cfg.per_user; ++j) {
      std::discrete_distribution<Index> pick(w.begin(), w.end());
      const Index i = pick(rng);
      w[i] = 0.0;
      records.push_back({u, i, cfg.mean + dot(a[u], b[i]) + noise(rng)});
    }
  }
  return Dataset(numbered_ids(cfg.users, cfg.items), std::move(records));
}

Dataset make_fixed_degree(const FixedDegreeConfig& cfg) {
  if (cfg.degree == 0 || cfg.degree > cfg.users) throw Error(ErrorKind::kConfig, "invalid fixed-degree shape");
  std::mt19937_64 rng(cfg.seed);
  const Index m = cfg.users;
  const auto a = factors(m, cfg.rank, cfg.factor_scale, rng);
  const auto b = factors(m, cfg.rank, cfg.factor_scale, rng);

  // Circulant pattern u -> (u + offset_j) mod m with distinct offsets gives
  // every user and item exactly `degree` ratings; relabel items randomly.
  std::vector<Index> offsets(m);
  std::iota(offsets.begin(), offsets.end(), 0);
  std::shuffle(offsets.begin(), offsets.end(), rng);
  offsets.resize(cfg.degree);
  std::vector<Index> relabel(m);
  std::iota(relabel.begin(), relabel.end(), 0);
  std::shuffle(relabel.begin(), relabel.end(), rng);

  std::normal_distribution<double> noise(0.0, cfg.noise);
  std::vector<IndexedRating> records;
  records.reserve(m * cfg.degree);
  for (Index u = 0; u < m; ++u) {
    for (Index off : offsets) {
      const Index i = relabel[(u + off) % m];
      records.push_back({u, i, cfg.mean + dot(a[u], b[i]) + noise(rng)});
    }
  }
  return Dataset(numbered_ids(m, m), std::move(records));
}

}  // namespace lfm
