#pragma once

// Glue between oracle types and library types.

#include <memory>
#include <string>
#include <vector>

#include "lfm/dataset.hpp"
#include "lfm/params.hpp"
#include "oracles.hpp"

namespace support {

inline std::shared_ptr<lfm::IdMaps> ids(std::size_t users, std::size_t items) {
  auto m = std::make_shared<lfm::IdMaps>();
  for (std::size_t u = 0; u < users; ++u) m->users.intern("u" + std::to_string(u));
  for (std::size_t i = 0; i < items; ++i) m->items.intern("i" + std::to_string(i));
  return m;
}

inline lfm::Dataset dataset(std::size_t users, std::size_t items, const std::vector<oracle::Rating>& data) {
  std::vector<lfm::IndexedRating> recs;
  for (const auto& r : data) recs.push_back({r.u, r.i, r.y});
  return lfm::Dataset(ids(users, items), std::move(recs));
}

inline std::vector<oracle::Rating> random_ratings(std::size_t users, std::size_t items, std::size_t count,
                                                  std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pu(0, users - 1), pi(0, items - 1);
  std::uniform_real_distribution<double> py(1.0, 5.0);
  std::vector<oracle::Rating> out;
  for (std::size_t c = 0; c < count; ++c) out.push_back({pu(rng), pi(rng), py(rng)});
  return out;
}

inline lfm::ModelParams mf_params(const oracle::MfShape& s, const oracle::Vec& theta) {
  auto p = lfm::ModelParams::mf(s.users, s.items, s.k);
  p.values() = theta;
  return p;
}

inline oracle::NcfShape ncf_shape(std::size_t users, std::size_t items, std::size_t k,
                                  const std::vector<std::size_t>& hidden, int act) {
  oracle::NcfShape s{{users, items, k}, {2 * k}, {}};
  for (auto h : hidden) {
    s.widths.push_back(h);
    s.acts.push_back(act);
  }
  s.widths.push_back(1);
  return s;
}

inline lfm::ModelParams ncf_params(const oracle::NcfShape& s, const oracle::Vec& theta, lfm::Activation act) {
  std::vector<lfm::Index> hidden(s.widths.begin() + 1, s.widths.end() - 1);
  auto p = lfm::ModelParams::ncf(s.emb.users, s.emb.items, s.emb.k,
                                 lfm::NcfArchitecture::tower(s.emb.k, hidden, act));
  p.values() = theta;
  return p;
}

}  // namespace support
