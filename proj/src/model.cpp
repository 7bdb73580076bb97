#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "lfm/error.hpp"
#include "lfm/mf.hpp"
#include "lfm/ncf.hpp"
#include "lfm/params.hpp"
#include "lfm/train.hpp"

namespace lfm {

std::string to_string(ModelKind kind) { return kind == ModelKind::kMf ? "mf" : "ncf"; }

std::string to_string(Activation act) {
  switch (act) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "identity";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "mf") return ModelKind::kMf;
  if (s == "ncf") return ModelKind::kNcf;
  throw Error(ErrorKind::kConfig, "unknown model kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw Error(ErrorKind::kConfig, "unknown activation '" + s + "'");
}

NcfArchitecture NcfArchitecture::tower(Index dim, const std::vector<Index>& hidden, Activation act) {
  NcfArchitecture arch;
  arch.widths.push_back(2 * dim);
  for (Index w : hidden) {
    arch.widths.push_back(w);
    arch.hidden_activations.push_back(act);
  }
  arch.widths.push_back(1);
  return arch;
}

NcfArchitecture NcfArchitecture::default_for(Index dim) { return tower(dim, {2 * dim, dim}, Activation::kRelu); }

void NcfArchitecture::validate(Index dim) const {
  if (widths.size() < 3) throw Error(ErrorKind::kConfig, "NCF needs at least one hidden layer");
  if (widths.front() != 2 * dim) throw Error(ErrorKind::kConfig, "NCF input width must be 2K");
  if (widths.back() != 1) throw Error(ErrorKind::kConfig, "NCF output width must be 1");
  if (hidden_activations.size() != widths.size() - 2) {
    throw Error(ErrorKind::kConfig, "need one activation per hidden layer");
  }
  for (Index w : widths) {
    if (w == 0) throw Error(ErrorKind::kConfig, "layer widths must be positive");
  }
}

void Hyperparams::validate() const {
  if (dim < 1) throw Error(ErrorKind::kConfig, "K must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::kConfig, "batch size must be >= 1");
  if (!(learning_rate > 0)) throw Error(ErrorKind::kConfig, "learning rate must be > 0");
  if (!(l2 >= 0)) throw Error(ErrorKind::kConfig, "l2 must be >= 0");
  if (!(adam_beta1 > 0 && adam_beta1 < 1) || !(adam_beta2 > 0 && adam_beta2 < 1)) {
    throw Error(ErrorKind::kConfig, "Adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0)) throw Error(ErrorKind::kConfig, "Adam epsilon must be > 0");
}

ModelParams ModelParams::mf(Index users, Index items, Index dim) {
  ModelParams p;
  p.kind_ = ModelKind::kMf;
  p.users_ = users;
  p.items_ = items;
  p.dim_ = dim;
  p.layout();
  return p;
}

ModelParams ModelParams::ncf(Index users, Index items, Index dim, NcfArchitecture arch) {
  // Degenerate towers (no hidden layer) are accepted here for hand-built
  // test models; training and the CLI call validate().
  if (arch.widths.size() < 2 || arch.widths.front() != 2 * dim || arch.widths.back() != 1) {
    throw Error(ErrorKind::kConfig, "NCF widths must run from 2K to 1");
  }
  ModelParams p;
  p.kind_ = ModelKind::kNcf;
  p.users_ = users;
  p.items_ = items;
  p.dim_ = dim;
  p.arch_ = std::move(arch);
  p.layout();
  return p;
}

void ModelParams::layout() {
  Index offset = embedding_size();
  regularized_.clear();
  regularized_.emplace_back(0, offset);
  layer_offsets_.clear();
  for (Index l = 0; l < arch_.num_layers(); ++l) {
    layer_offsets_.push_back(offset);
    const Index w = arch_.widths[l] * arch_.widths[l + 1];
    regularized_.emplace_back(offset, offset + w);
    offset += w + arch_.widths[l + 1];
  }
  values_ = Vector::Zero(static_cast<Eigen::Index>(offset));
}

double ModelParams::regularized_norm2() const {
  double s = 0.0;
  for (auto [a, b] : regularized_) s += values_.segment(a, b - a).squaredNorm();
  return s;
}

void ModelParams::add_regularized(const Vector& v, double scale, Vector& out) const {
  for (auto [a, b] : regularized_) out.segment(a, b - a) += scale * v.segment(a, b - a);
}

void ModelParams::snap_to_float() { values_ = values_.cast<float>().cast<double>(); }

bool ModelParams::operator==(const ModelParams& o) const {
  return kind_ == o.kind_ && users_ == o.users_ && items_ == o.items_ && dim_ == o.dim_ && arch_ == o.arch_ &&
         values_.size() == o.values_.size() &&
         std::equal(values_.data(), values_.data() + values_.size(), o.values_.data());
}

ModelParams init_params(ModelKind kind, Index users, Index items, const Hyperparams& hp,
                        const NcfArchitecture& arch) {
  ModelParams p = kind == ModelKind::kMf ? ModelParams::mf(users, items, hp.dim)
                                         : ModelParams::ncf(users, items, hp.dim, arch);
  std::mt19937_64 rng(hp.seed);
  std::normal_distribution<float> normal(0.0f, 0.01f);
  for (auto [a, b] : p.regularized_ranges()) {
    for (Index c = a; c < b; ++c) p.values()(static_cast<Eigen::Index>(c)) = normal(rng);
  }
  return p;
}

double predict(const ModelParams& params, Index user, Index item) {
  if (params.kind() == ModelKind::kMf) return mf_predict(params.user(user), params.item(item));
  return ncf_forward(user, item, params).output();
}

double accumulate_data_gradient(const ModelParams& params, const Dataset& data, std::span<const Index> rows,
                                double scale, Vector& grad) {
  if (params.kind() == ModelKind::kNcf) return ncf_accumulate_data_gradient(params, data, rows, scale, grad);
  const auto k = static_cast<Eigen::Index>(params.dim());
  double sse = 0.0;
  for (Index r : rows) {
    const auto& z = data.record(r);
    auto p = params.user(z.user);
    auto q = params.item(z.item);
    const double e = p.dot(q) - z.rating;
    sse += e * e;
    grad.segment(static_cast<Eigen::Index>(params.user_offset(z.user)), k) += (2.0 * scale * e) * q;
    grad.segment(static_cast<Eigen::Index>(params.item_offset(z.item)), k) += (2.0 * scale * e) * p;
  }
  return sse;
}

namespace {

void check_dims(const ModelParams& params, const Dataset& data) {
  if (params.num_users() != data.num_users() || params.num_items() != data.num_items()) {
    throw Error(ErrorKind::kInternal, "parameter dimensions do not match the dataset");
  }
}

std::vector<Index> all_rows(const Dataset& data) {
  std::vector<Index> rows(data.size());
  std::iota(rows.begin(), rows.end(), Index{0});
  return rows;
}

}  // namespace

double objective(const ModelParams& params, const Dataset& train, double l2) {
  check_dims(params, train);
  double sse = 0.0;
  for (const auto& z : train.records()) sse += squared_loss(predict(params, z.user, z.item), z.rating);
  const double mean = train.size() == 0 ? 0.0 : sse / static_cast<double>(train.size());
  return mean + l2 * params.regularized_norm2();
}

Vector objective_gradient(const ModelParams& params, const Dataset& train, double l2) {
  check_dims(params, train);
  Vector grad = Vector::Zero(params.values().size());
  if (train.size() > 0) {
    auto rows = all_rows(train);
    accumulate_data_gradient(params, train, rows, 1.0 / static_cast<double>(train.size()), grad);
  }
  params.add_regularized(params.values(), 2.0 * l2, grad);
  return grad;
}

double rmse(const ModelParams& params, std::span<const IndexedRating> data) {
  if (data.empty()) return 0.0;
  double sse = 0.0;
  for (const auto& z : data) sse += squared_loss(predict(params, z.user, z.item), z.rating);
  return std::sqrt(sse / static_cast<double>(data.size()));
}

double rmse(const ModelParams& params, const Dataset& data) { return rmse(params, data.records()); }

void adam_step(Vector& params, const Vector& grads, AdamState& state, const Hyperparams& hp) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw Error(ErrorKind::kInternal, "adam_step: shape mismatch");
  }
  ++state.step;
  const double b1 = hp.adam_beta1;
  const double b2 = hp.adam_beta2;
  state.first_moment = b1 * state.first_moment + (1.0 - b1) * grads;
  state.second_moment = b2 * state.second_moment + (1.0 - b2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  params.array() -= hp.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + hp.adam_eps);
}

TrainResult train(ModelKind kind, const Dataset& train_set, const Hyperparams& hp, const NcfArchitecture& arch,
                  const EpochCallback& on_epoch) {
  hp.validate();
  if (train_set.size() == 0) throw Error(ErrorKind::kConfig, "training set is empty");
  if (kind == ModelKind::kNcf) arch.validate(hp.dim);

  TrainResult result{init_params(kind, train_set.num_users(), train_set.num_items(), hp, arch), {}};
  ModelParams& params = result.params;
  AdamState state = AdamState::zeros(params.size());
  Vector grad(params.values().size());

  // Shuffling uses its own stream so init and batch order stay independent.
  std::mt19937_64 shuffle_rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Index> order = all_rows(train_set);
  const Index n = train_set.size();
  Index plateau = 0;

  for (Index epoch = 1; epoch <= hp.epochs; ++epoch) {
    if (hp.batch_size < n) std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sse = 0.0;
    Index batch_no = 0;
    for (Index start = 0; start < n; start += hp.batch_size, ++batch_no) {
      const Index end = std::min(n, start + hp.batch_size);
      std::span<const Index> batch(order.data() + start, end - start);
      grad.setZero();
      const double batch_sse =
          accumulate_data_gradient(params, train_set, batch, 1.0 / static_cast<double>(batch.size()), grad);
      if (!std::isfinite(batch_sse) || !grad.allFinite()) {
        throw Error(ErrorKind::kNumeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                             std::to_string(batch_no) + " (seed " + std::to_string(hp.seed) + ")");
      }
      sse += batch_sse;
      params.add_regularized(params.values(), 2.0 * hp.l2, grad);
      adam_step(params.values(), grad, state, hp);
    }
    const double epoch_rmse = std::sqrt(sse / static_cast<double>(n));
    auto& log = result.log;
    const double previous = log.epoch_rmse.empty() ? epoch_rmse : log.epoch_rmse.back();
    log.epoch_rmse.push_back(epoch_rmse);
    log.final_epoch = epoch;
    if (on_epoch) on_epoch({epoch, epoch_rmse});
    spdlog::debug("epoch {} train rmse {:.6f}", epoch, epoch_rmse);
    if (hp.until_converged) {
      plateau = (epoch > 1 && std::abs(previous - epoch_rmse) < 1e-4) ? plateau + 1 : 0;
      if (plateau >= 3) break;
    }
  }
  params.snap_to_float();
  result.log.final_rmse = rmse(params, train_set);
  return result;
}

}  // namespace lfm
