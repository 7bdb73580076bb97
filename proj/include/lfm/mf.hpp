#pragma once

// Matrix factorization: g(u, i) = p_u . q_i with per-example loss
//
//   L(z) = (p_u . q_i - y)^2 + l2 * ||theta||^2.
//
// With e = p.q - y the per-example derivatives are
//
//   dL/dp = 2 e q + 2 l2 p                 dL/dq = 2 e p + 2 l2 q
//   d2L/dp2 = 2 q q^T + 2 l2 I             d2L/dq2 = 2 p p^T + 2 l2 I
//   d2L/dp dq^T = 2 (q p^T + e I)
//
// The cross block is what makes the Hessian indefinite away from a minimum.

#include <span>
#include <vector>

#include "lfm/dataset.hpp"
#include "lfm/params.hpp"

namespace lfm {

/// (u_t, i_t) as internal indices.
struct UserItem {
  Index user = 0;
  Index item = 0;
};

double mf_predict(const Eigen::Ref<const Vector>& pu, const Eigen::Ref<const Vector>& qi);

/// Gradient of L(z) over z's own user row and item row.
struct SubGradient {
  Index user = 0;
  Index item = 0;
  Vector pu;
  Vector qi;
};

SubGradient mf_grad_example(const IndexedRating& z, const ModelParams& params, double l2);

/// (H_t + damping I) v for theta_t = (p_{u_t}, q_{i_t}), with H_t the mean
/// over `rt` of the per-example Hessian restricted to theta_t, plus 2 l2 I.
/// `v` and the result are laid out as [p-block (K) | q-block (K)].
Vector mf_hvp_restricted(const Vector& v, UserItem test, std::span<const Index> rt, const Dataset& train,
                         const ModelParams& params, double l2, double damping);

/// Row-sparse gradient in full parameter coordinates.
struct SparseGradient {
  struct Row {
    Index offset = 0;
    Vector values;
  };
  std::vector<Row> rows;

  Vector densify(Index size) const;
  double dot(const Vector& dense) const;
};

/// mf_grad_example placed at z's user and item rows. The l2 term covers
/// only those rows; callers own the rest of the penalty gradient.
SparseGradient mf_grad_full(const IndexedRating& z, const ModelParams& params, double l2);

/// (H + damping I) v over every parameter, H = (1/n) sum_z Hess L(z).
Vector mf_hvp_full(const Vector& v, const Dataset& train, const ModelParams& params, double l2, double damping);

}  // namespace lfm
