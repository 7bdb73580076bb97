#pragma once

// Influence of single training ratings on one prediction g(u_t, i_t).
//
// Removing z moves the optimum by (1/n) H^{-1} grad L(z), so
//
//   dg(z) ~= (1/n) grad g^T H^{-1} grad L(z)
//
// (positive: removing z raises the prediction). The basic estimator solves
// with the full Hessian; the fast estimator keeps only theta_t =
// (p_{u_t}, q_{i_t}) and the n' = |R_{u_t} u R_{i_t}| records that touch it,
// normalizing by n' instead of n.

#include <optional>
#include <vector>

#include "lfm/cg.hpp"
#include "lfm/dataset.hpp"
#include "lfm/mf.hpp"
#include "lfm/params.hpp"

namespace lfm {

struct TestCase {
  Index user = 0;
  Index item = 0;
  std::optional<double> true_rating;

  UserItem pair() const { return {user, item}; }
};

enum class Side { kUser, kItem, kBoth };
std::string to_string(Side side);

struct InfluenceScore {
  Index train_index = 0;
  double delta_g = 0.0;
  Side side = Side::kUser;
};

struct InfluenceOptions {
  CgConfig cg;
  /// L2 coefficient the model was trained with.
  double l2 = 0.0;
  /// Drop the 2 l2 I term from every Hessian (ablation).
  bool hessian_l2 = true;
  /// Exact NCF mode: if set, the network-block Hessian averages over a
  /// seeded sample of this many records instead of all of them.
  std::optional<Index> network_sample;
  std::uint64_t sample_seed = 0;
};

struct InfluenceResult {
  std::vector<InfluenceScore> scores;
  double prediction = 0.0;
  CgResult solve;
  /// Only for NCF exact mode.
  std::optional<CgResult> network_solve;
};

/// R_t = R_{u_t} u R_{i_t}, ascending record index, with each record tagged
/// by the side(s) it shares with the test pair.
std::vector<std::pair<Index, Side>> interacting_points(const Dataset& train, UserItem test);

InfluenceResult influence_basic_mf(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                   const InfluenceOptions& opts);

InfluenceResult influence_fia_mf(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                 const InfluenceOptions& opts);

enum class NcfMode { kApprox, kExact };

InfluenceResult influence_fia_ncf(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                  const InfluenceOptions& opts, NcfMode mode);

/// Full-parameter estimator for NCF, used as the benchmark baseline.
InfluenceResult influence_basic_ncf(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                    const InfluenceOptions& opts);

/// Dispatch on model kind: fast estimator unless `basic`; `exact` only
/// affects NCF.
InfluenceResult compute_influence(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                  const InfluenceOptions& opts, bool basic = false, bool exact = false);

namespace detail {
/// Change of the test squared loss when z is removed, from the basic MF
/// estimator: 2 (g - y_t) dg(z). Kept for parity checks only.
std::vector<double> test_loss_influence_mf(const TestCase& tc, const Dataset& train, const ModelParams& params,
                                           const InfluenceOptions& opts);
}  // namespace detail

}  // namespace lfm
