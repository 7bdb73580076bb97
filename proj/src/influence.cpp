#include "lfm/influence.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "lfm/error.hpp"
#include "lfm/ncf.hpp"
#include "lfm/train.hpp"

namespace lfm {

namespace {

Eigen::Index eidx(Index i) { return static_cast<Eigen::Index>(i); }

void require_kind(const ModelParams& params, ModelKind kind) {
  if (params.kind() != kind) {
    throw Error(ErrorKind::kConfig, "estimator expects a " + to_string(kind) + " model");
  }
}

void require_pair(const TestCase& tc, const ModelParams& params) {
  if (tc.user >= params.num_users() || tc.item >= params.num_items()) {
    throw Error(ErrorKind::kUnknownId, "test pair is outside the model's id maps");
  }
}

struct Neighborhood {
  std::vector<std::pair<Index, Side>> tagged;
  std::vector<Index> rows;
};

Neighborhood neighborhood(const Dataset& train, const TestCase& tc) {
  Neighborhood nb;
  nb.tagged = interacting_points(train, tc.pair());
  if (nb.tagged.empty()) {
    throw Error(ErrorKind::kColdStart, "no interacting training points for the test pair");
  }
  nb.rows.reserve(nb.tagged.size());
  for (auto [r, side] : nb.tagged) nb.rows.push_back(r);
  return nb;
}

std::vector<Index> all_rows(const Dataset& train) {
  std::vector<Index> rows(train.size());
  std::iota(rows.begin(), rows.end(), Index{0});
  return rows;
}

// Regularizer share of grad L(z): 2 l2 theta over regularized coordinates.
double penalty_dot(const ModelParams& params, double l2, const Vector& s) {
  double d = 0.0;
  for (auto [a, b] : params.regularized_ranges()) {
    d += params.values().segment(eidx(a), eidx(b - a)).dot(s.segment(eidx(a), eidx(b - a)));
  }
  return 2.0 * l2 * d;
}

// The restricted Hessian averages over n' records, so the penalty enters
// at n/n' times its weight to stay the theta_t block of the trained
// objective's Hessian.
double restricted_l2(const InfluenceOptions& opts, const Dataset& train, Index n_prime) {
  if (!opts.hessian_l2) return 0.0;
  return opts.l2 * static_cast<double>(train.size()) / static_cast<double>(n_prime);
}

Vector theta_t(const ModelParams& params, UserItem pair) {
  const auto k = eidx(params.dim());
  Vector t(2 * k);
  t << params.user(pair.user), params.item(pair.item);
  return t;
}

}  // namespace

std::string to_string(Side side) {
  switch (side) {
    case Side::kUser: return "user";
    case Side::kItem: return "item";
    case Side::kBoth: return "both";
  }
  return "user";
}

std::vector<std::pair<Index, Side>> interacting_points(const Dataset& train, UserItem test) {
  std::vector<std::pair<Index, Side>> out;
  if (test.user >= train.num_users() || test.item >= train.num_items()) return out;
  auto ru = train.by_user(test.user);
  auto ri = train.by_item(test.item);
  out.reserve(ru.size() + ri.size());
  std::size_t a = 0, b = 0;
  while (a < ru.size() || b < ri.size()) {
    if (b == ri.size() || (a < ru.size() && ru[a] < ri[b])) {
      out.emplace_back(ru[a++], Side::kUser);
    } else if (a == ru.size() || ri[b] < ru[a]) {
      out.emplace_back(ri[b++], Side::kItem);
    } else {
      out.emplace_back(ru[a], Side::kBoth);
      ++a;
      ++b;
    }
  }
  return out;
}

InfluenceResult influence_basic_mf(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                   const InfluenceOptions& opts) {
  require_kind(params, ModelKind::kMf);
  require_pair(tc, params);
  const auto nb = neighborhood(train, tc);
  const auto k = eidx(params.dim());
  const double hl2 = opts.hessian_l2 ? opts.l2 : 0.0;

  // S1: s = (H + lambda I)^{-1} grad g, grad g nonzero only on theta_t.
  Vector grad_g = Vector::Zero(eidx(params.size()));
  grad_g.segment(eidx(params.user_offset(tc.user)), k) = params.item(tc.item);
  grad_g.segment(eidx(params.item_offset(tc.item)), k) = params.user(tc.user);
  InfluenceResult result;
  result.prediction = predict(params, tc.user, tc.item);
  result.solve = solve_inverse_hvp(
      grad_g, [&](const Vector& v) { return mf_hvp_full(v, train, params, hl2, 0.0); }, opts.cg);
  const Vector& s = result.solve.solution;

  // S2 + S3.
  const double shared = penalty_dot(params, opts.l2, s);
  const double inv_n = 1.0 / static_cast<double>(train.size());
  result.scores.reserve(nb.tagged.size());
  for (auto [r, side] : nb.tagged) {
    const double dot = mf_grad_full(train.record(r), params, 0.0).dot(s);
    result.scores.push_back({r, inv_n * (dot + shared), side});
  }
  return result;
}

InfluenceResult influence_fia_mf(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                 const InfluenceOptions& opts) {
  require_kind(params, ModelKind::kMf);
  require_pair(tc, params);
  const auto nb = neighborhood(train, tc);
  const auto k = eidx(params.dim());
  const Index n_prime = nb.rows.size();
  const double hl2 = restricted_l2(opts, train, n_prime);

  auto pt = params.user(tc.user);
  auto qt = params.item(tc.item);
  Vector grad_g(2 * k);
  grad_g << qt, pt;

  InfluenceResult result;
  result.prediction = pt.dot(qt);
  result.solve = solve_inverse_hvp(
      grad_g, [&](const Vector& v) { return mf_hvp_restricted(v, tc.pair(), nb.rows, train, params, hl2, 0.0); },
      opts.cg);
  const Vector& s = result.solve.solution;
  const auto sp = s.head(k);
  const auto sq = s.tail(k);

  const double shared = 2.0 * opts.l2 * theta_t(params, tc.pair()).dot(s);
  const double inv_n = 1.0 / static_cast<double>(n_prime);
  result.scores.reserve(n_prime);
  for (auto [r, side] : nb.tagged) {
    const auto& z = train.record(r);
    auto p = params.user(z.user);
    auto q = params.item(z.item);
    const double e = p.dot(q) - z.rating;
    double dot = 0.0;
    if (side != Side::kItem) dot += 2.0 * e * q.dot(sp);
    if (side != Side::kUser) dot += 2.0 * e * p.dot(sq);
    result.scores.push_back({r, inv_n * (dot + shared), side});
  }
  return result;
}

InfluenceResult influence_fia_ncf(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                  const InfluenceOptions& opts, NcfMode mode) {
  require_kind(params, ModelKind::kNcf);
  require_pair(tc, params);
  const auto nb = neighborhood(train, tc);
  const auto k = eidx(params.dim());
  const Index n_prime = nb.rows.size();

  const ForwardCache test_cache = ncf_forward(tc.user, tc.item, params);
  const NcfGradient grad_g = ncf_output_gradient(test_cache, params);

  InfluenceResult result;
  result.prediction = test_cache.output();

  // Embedding part over theta_t and R_t.
  Vector b_e(2 * k);
  b_e << grad_g.user, grad_g.item;
  const double hl2 = restricted_l2(opts, train, n_prime);
  result.solve = solve_inverse_hvp(
      b_e,
      [&](const Vector& v) {
        return ncf_hvp(v, nb.rows, train, params, HvpSubset::embeddings_of(tc.pair()), hl2, 0.0);
      },
      opts.cg);
  const Vector& s_e = result.solve.solution;
  const double shared_e = 2.0 * opts.l2 * theta_t(params, tc.pair()).dot(s_e);

  // Network part over all records (exact mode only).
  Vector s_n;
  double shared_n = 0.0;
  if (mode == NcfMode::kExact) {
    if (train.size() > 100000) {
      spdlog::warn("exact NCF influence runs an HVP over {} records per CG iteration", train.size());
    }
    std::vector<Index> points = all_rows(train);
    if (opts.network_sample && *opts.network_sample < points.size()) {
      std::mt19937_64 rng(opts.sample_seed);
      std::shuffle(points.begin(), points.end(), rng);
      points.resize(*opts.network_sample);
      std::sort(points.begin(), points.end());
    }
    const double nl2 = opts.hessian_l2 ? opts.l2 : 0.0;
    result.network_solve = solve_inverse_hvp(
        grad_g.network,
        [&](const Vector& v) { return ncf_hvp(v, points, train, params, HvpSubset::network_only(), nl2, 0.0); },
        opts.cg);
    s_n = result.network_solve->solution;
    const auto emb = eidx(params.embedding_size());
    Vector net_values = params.values().tail(params.values().size() - emb);
    for (auto [a, b] : params.regularized_ranges()) {
      if (eidx(a) < emb) continue;
      shared_n += net_values.segment(eidx(a) - emb, eidx(b - a)).dot(s_n.segment(eidx(a) - emb, eidx(b - a)));
    }
    shared_n *= 2.0 * opts.l2;
  }

  const double inv_np = 1.0 / static_cast<double>(n_prime);
  const double inv_n = 1.0 / static_cast<double>(train.size());
  result.scores.reserve(n_prime);
  for (auto [r, side] : nb.tagged) {
    const auto& z = train.record(r);
    const NcfGradient gz = ncf_backward(z, ncf_forward(z.user, z.item, params), params, 0.0);
    double dot = 0.0;
    if (side != Side::kItem) dot += gz.user.dot(s_e.head(k));
    if (side != Side::kUser) dot += gz.item.dot(s_e.tail(k));
    double delta = inv_np * (dot + shared_e);
    if (mode == NcfMode::kExact) delta += inv_n * (gz.network.dot(s_n) + shared_n);
    result.scores.push_back({r, delta, side});
  }
  return result;
}

InfluenceResult influence_basic_ncf(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                    const InfluenceOptions& opts) {
  require_kind(params, ModelKind::kNcf);
  require_pair(tc, params);
  const auto nb = neighborhood(train, tc);
  const auto k = eidx(params.dim());
  const auto emb = eidx(params.embedding_size());

  const ForwardCache test_cache = ncf_forward(tc.user, tc.item, params);
  const NcfGradient grad_g = ncf_output_gradient(test_cache, params);
  Vector b = Vector::Zero(eidx(params.size()));
  b.segment(eidx(params.user_offset(tc.user)), k) = grad_g.user;
  b.segment(eidx(params.item_offset(tc.item)), k) = grad_g.item;
  b.tail(b.size() - emb) = grad_g.network;

  InfluenceResult result;
  result.prediction = test_cache.output();
  const std::vector<Index> points = all_rows(train);
  const double hl2 = opts.hessian_l2 ? opts.l2 : 0.0;
  result.solve = solve_inverse_hvp(
      b, [&](const Vector& v) { return ncf_hvp(v, points, train, params, HvpSubset::full(), hl2, 0.0); }, opts.cg);
  const Vector& s = result.solve.solution;
  const double shared = penalty_dot(params, opts.l2, s);

  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (auto [r, side] : nb.tagged) {
    const auto& z = train.record(r);
    const NcfGradient gz = ncf_backward(z, ncf_forward(z.user, z.item, params), params, 0.0);
    const double dot = gz.user.dot(s.segment(eidx(params.user_offset(z.user)), k)) +
                       gz.item.dot(s.segment(eidx(params.item_offset(z.item)), k)) +
                       gz.network.dot(s.tail(s.size() - emb));
    result.scores.push_back({r, inv_n * (dot + shared), side});
  }
  return result;
}

InfluenceResult compute_influence(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                  const InfluenceOptions& opts, bool basic, bool exact) {
  if (params.kind() == ModelKind::kMf) {
    return basic ? influence_basic_mf(tc, train, params, opts) : influence_fia_mf(tc, train, params, opts);
  }
  if (basic) return influence_basic_ncf(tc, train, params, opts);
  return influence_fia_ncf(tc, train, params, opts, exact ? NcfMode::kExact : NcfMode::kApprox);
}

namespace detail {

std::vector<double> test_loss_influence_mf(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                           const InfluenceOptions& opts) {
  if (!tc.true_rating) throw Error(ErrorKind::kConfig, "test loss influence needs the true rating");
  const auto res = influence_basic_mf(tc, train, params, opts);
  const double residual = res.prediction - *tc.true_rating;
  std::vector<double> out;
  out.reserve(res.scores.size());
  for (const auto& s : res.scores) out.push_back(2.0 * residual * s.delta_g);
  return out;
}

}  // namespace detail

}  // namespace lfm
