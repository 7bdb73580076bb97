#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lfm/dataset.hpp"
#include "lfm/params.hpp"

namespace lfm {

inline double squared_loss(double prediction, double y) {
  const double e = prediction - y;
  return e * e;
}

/// Model output g(u, i, theta) for either model kind.
double predict(const ModelParams& params, Index user, Index item);

/// Sum of squared residuals over `rows` of `data`; adds
/// `scale * d/dtheta (g - y)^2` into `grad` (sized like params). The L2
/// term is not included.
double accumulate_data_gradient(const ModelParams& params, const Dataset& data,
                                std::span<const Index> rows, double scale, Vector& grad);

/// (1/n) sum (g - y)^2 + l2 * ||theta||^2 over the regularized coordinates.
double objective(const ModelParams& params, const Dataset& train, double l2);
/// Dense gradient of `objective`.
Vector objective_gradient(const ModelParams& params, const Dataset& train, double l2);

double rmse(const ModelParams& params, const Dataset& data);
double rmse(const ModelParams& params, std::span<const IndexedRating> data);

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::int64_t step = 0;

  static AdamState zeros(Index size) {
    return {Vector::Zero(static_cast<Eigen::Index>(size)), Vector::Zero(static_cast<Eigen::Index>(size)), 0};
  }
};

/// Bias-corrected Adam update, in place.
void adam_step(Vector& params, const Vector& grads, AdamState& state, const Hyperparams& hp);

struct EpochReport {
  Index epoch = 0;  // 1-based
  double train_rmse = 0.0;
};

struct TrainingLog {
  std::vector<double> epoch_rmse;
  Index final_epoch = 0;
  double final_rmse = 0.0;
};

struct TrainResult {
  ModelParams params;
  TrainingLog log;
};

using EpochCallback = std::function<void(const EpochReport&)>;

/// Mini-batch Adam on `objective` with seeded init and shuffling. Returned
/// parameters are rounded to float32. Throws Error(kNumeric) naming the
/// epoch and batch if the loss stops being finite.
TrainResult train(ModelKind kind, const Dataset& train_set, const Hyperparams& hp,
                  const NcfArchitecture& arch = {}, const EpochCallback& on_epoch = {});

}  // namespace lfm
