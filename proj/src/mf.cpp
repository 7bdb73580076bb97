#include "lfm/mf.hpp"

#include "lfm/error.hpp"

namespace lfm {

namespace {

Eigen::Index eidx(Index i) { return static_cast<Eigen::Index>(i); }

}  // namespace

double mf_predict(const Eigen::Ref<const Vector>& pu, const Eigen::Ref<const Vector>& qi) {
  if (pu.size() != qi.size()) throw Error(ErrorKind::kInternal, "mf_predict: length mismatch");
  return pu.dot(qi);
}

SubGradient mf_grad_example(const IndexedRating& z, const ModelParams& params, double l2) {
  if (z.user >= params.num_users() || z.item >= params.num_items()) {
    throw Error(ErrorKind::kInternal, "mf_grad_example: index out of range");
  }
  auto p = params.user(z.user);
  auto q = params.item(z.item);
  const double e = p.dot(q) - z.rating;
  return SubGradient{z.user, z.item, 2.0 * e * q + 2.0 * l2 * p, 2.0 * e * p + 2.0 * l2 * q};
}

Vector mf_hvp_restricted(const Vector& v, UserItem test, std::span<const Index> rt, const Dataset& train,
                         const ModelParams& params, double l2, double damping) {
  const auto k = eidx(params.dim());
  if (v.size() != 2 * k) throw Error(ErrorKind::kInternal, "mf_hvp_restricted: v must have length 2K");
  if (rt.empty()) throw Error(ErrorKind::kColdStart, "no interacting training points");

  const auto vp = v.head(k);
  const auto vq = v.tail(k);
  auto pt = params.user(test.user);
  auto qt = params.item(test.item);

  Vector out = Vector::Zero(2 * k);
  auto op = out.head(k);
  auto oq = out.tail(k);
  for (Index r : rt) {
    const auto& z = train.record(r);
    const bool same_user = z.user == test.user;
    const bool same_item = z.item == test.item;
    if (same_user && same_item) {
      // Both blocks of theta_t belong to this example.
      const double e = pt.dot(qt) - z.rating;
      const double qvp = qt.dot(vp);
      const double pvq = pt.dot(vq);
      op += 2.0 * qvp * qt + 2.0 * (pvq * qt + e * vq);
      oq += 2.0 * (qvp * pt + e * vp) + 2.0 * pvq * pt;
    } else if (same_user) {
      // Only p_{u_t} is in theta_t; q_{i_z} is held fixed.
      auto q = params.item(z.item);
      op += 2.0 * q.dot(vp) * q;
    } else if (same_item) {
      auto p = params.user(z.user);
      oq += 2.0 * p.dot(vq) * p;
    } else {
      throw Error(ErrorKind::kInternal, "mf_hvp_restricted: point does not touch the test pair");
    }
  }
  out /= static_cast<double>(rt.size());
  out += (2.0 * l2 + damping) * v;
  return out;
}

Vector SparseGradient::densify(Index size) const {
  Vector out = Vector::Zero(eidx(size));
  for (const auto& row : rows) out.segment(eidx(row.offset), row.values.size()) += row.values;
  return out;
}

double SparseGradient::dot(const Vector& dense) const {
  double s = 0.0;
  for (const auto& row : rows) s += row.values.dot(dense.segment(eidx(row.offset), row.values.size()));
  return s;
}

SparseGradient mf_grad_full(const IndexedRating& z, const ModelParams& params, double l2) {
  auto g = mf_grad_example(z, params, l2);
  SparseGradient out;
  out.rows.push_back({params.user_offset(z.user), std::move(g.pu)});
  out.rows.push_back({params.item_offset(z.item), std::move(g.qi)});
  return out;
}

Vector mf_hvp_full(const Vector& v, const Dataset& train, const ModelParams& params, double l2, double damping) {
  if (v.size() != eidx(params.size())) throw Error(ErrorKind::kInternal, "mf_hvp_full: length mismatch");
  const auto k = eidx(params.dim());
  Vector out = Vector::Zero(v.size());
  for (const auto& z : train.records()) {
    const auto uo = eidx(params.user_offset(z.user));
    const auto io = eidx(params.item_offset(z.item));
    auto p = params.user(z.user);
    auto q = params.item(z.item);
    const auto vp = v.segment(uo, k);
    const auto vq = v.segment(io, k);
    const double e = p.dot(q) - z.rating;
    const double qvp = q.dot(vp);
    const double pvq = p.dot(vq);
    out.segment(uo, k) += 2.0 * qvp * q + 2.0 * (pvq * q + e * vq);
    out.segment(io, k) += 2.0 * (qvp * p + e * vp) + 2.0 * pvq * p;
  }
  if (train.size() > 0) out /= static_cast<double>(train.size());
  out += (2.0 * l2 + damping) * v;
  return out;
}

}  // namespace lfm
