#pragma once

#include <span>
#include <vector>

#include "lfm/dataset.hpp"
#include "lfm/mf.hpp"
#include "lfm/params.hpp"

namespace lfm {

/// Activations of one forward pass. `post[0]` is z_0 = p_u (+) q_i,
/// `pre[l]` and `post[l + 1]` belong to layer l.
struct ForwardCache {
  Index user = 0;
  Index item = 0;
  std::vector<Vector> pre;
  std::vector<Vector> post;

  double output() const { return post.back()(0); }
};

ForwardCache ncf_forward(Index user, Index item, const ModelParams& params);

/// Gradients of one example split into the embedding rows it touches and
/// the network block (weights and biases, in parameter order).
struct NcfGradient {
  Vector user;
  Vector item;
  Vector network;
};

/// Exact reverse-mode gradient of L(z) = (g - y)^2 + l2 * ||theta||^2,
/// with the penalty taken over z's two rows and the network weights.
/// The cache must come from ncf_forward on the same params and pair.
NcfGradient ncf_backward(const IndexedRating& z, const ForwardCache& cache, const ModelParams& params,
                         double l2);

/// Gradient of the prediction g itself.
NcfGradient ncf_output_gradient(const ForwardCache& cache, const ModelParams& params);

/// Parameter block an HVP runs over.
struct HvpSubset {
  enum class Kind { kEmbeddingsOf, kNetworkOnly, kFull };
  Kind kind = Kind::kFull;
  UserItem pair;  // only for kEmbeddingsOf

  static HvpSubset embeddings_of(UserItem p) { return {Kind::kEmbeddingsOf, p}; }
  static HvpSubset network_only() { return {Kind::kNetworkOnly, {}}; }
  static HvpSubset full() { return {Kind::kFull, {}}; }

  Index size(const ModelParams& params) const;
};

/// ((1/|points|) sum Hess_subset L(z) + damping I) v, computed with an exact
/// forward-over-reverse (R-operator) pass per point. Layouts of `v`:
/// kEmbeddingsOf -> [p_{u_t} | q_{i_t}], kNetworkOnly -> network block,
/// kFull -> all parameters.
Vector ncf_hvp(const Vector& v, std::span<const Index> points, const Dataset& train, const ModelParams& params,
               HvpSubset subset, double l2, double damping);

/// Batched sum of squared residuals and data-term gradient (see
/// accumulate_data_gradient).
double ncf_accumulate_data_gradient(const ModelParams& params, const Dataset& data, std::span<const Index> rows,
                                    double scale, Vector& grad);

}  // namespace lfm
