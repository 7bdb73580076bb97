#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lfm/dataset.hpp"

namespace lfm {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ModelKind { kMf, kNcf };
enum class Activation { kIdentity, kRelu, kTanh };

std::string to_string(ModelKind kind);
std::string to_string(Activation act);
ModelKind parse_model_kind(const std::string& s);
Activation parse_activation(const std::string& s);

/// MLP tower on top of the concatenated embeddings. `widths` runs from the
/// input (2K) to the scalar output; `hidden_activations` has one entry per
/// hidden layer. The output layer is always affine.
struct NcfArchitecture {
  std::vector<Index> widths;
  std::vector<Activation> hidden_activations;

  static NcfArchitecture tower(Index dim, const std::vector<Index>& hidden, Activation act);
  /// [2K, K] relu
  static NcfArchitecture default_for(Index dim);

  Index num_layers() const { return widths.empty() ? 0 : widths.size() - 1; }
  Activation activation(Index layer) const {
    return layer < hidden_activations.size() ? hidden_activations[layer] : Activation::kIdentity;
  }
  void validate(Index dim) const;
  bool operator==(const NcfArchitecture&) const = default;
};

struct Hyperparams {
  Index dim = 8;
  double learning_rate = 0.001;
  Index batch_size = 3000;
  double l2 = 0.001;
  Index epochs = 50;
  std::uint64_t seed = 42;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool until_converged = false;

  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

/// All model parameters in one flat vector:
///
///   [user embeddings | item embeddings | W_1 b_1 | W_2 b_2 | ...]
///
/// Embedding rows are K contiguous values, user u at u*K, item i at
/// (users + i)*K. Weights are row-major (out x in). MF has no layers.
class ModelParams {
 public:
  ModelParams() = default;
  static ModelParams mf(Index users, Index items, Index dim);
  static ModelParams ncf(Index users, Index items, Index dim, NcfArchitecture arch);

  ModelKind kind() const { return kind_; }
  Index num_users() const { return users_; }
  Index num_items() const { return items_; }
  Index dim() const { return dim_; }
  const NcfArchitecture& architecture() const { return arch_; }

  Index size() const { return values_.size(); }
  Index embedding_size() const { return (users_ + items_) * dim_; }
  Index network_size() const { return size() - embedding_size(); }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }

  Index user_offset(Index u) const { return u * dim_; }
  Index item_offset(Index i) const { return (users_ + i) * dim_; }
  Index weight_offset(Index layer) const { return layer_offsets_.at(layer); }
  Index bias_offset(Index layer) const {
    return layer_offsets_.at(layer) + arch_.widths[layer] * arch_.widths[layer + 1];
  }

  Eigen::Map<Vector> user(Index u) { return {values_.data() + user_offset(u), as_eigen(dim_)}; }
  Eigen::Map<const Vector> user(Index u) const { return {values_.data() + user_offset(u), as_eigen(dim_)}; }
  Eigen::Map<Vector> item(Index i) { return {values_.data() + item_offset(i), as_eigen(dim_)}; }
  Eigen::Map<const Vector> item(Index i) const { return {values_.data() + item_offset(i), as_eigen(dim_)}; }

  Eigen::Map<RowMatrix> weight(Index l) {
    return {values_.data() + weight_offset(l), out_rows(l), in_cols(l)};
  }
  Eigen::Map<const RowMatrix> weight(Index l) const {
    return {values_.data() + weight_offset(l), out_rows(l), in_cols(l)};
  }
  Eigen::Map<Vector> bias(Index l) { return {values_.data() + bias_offset(l), out_rows(l)}; }
  Eigen::Map<const Vector> bias(Index l) const { return {values_.data() + bias_offset(l), out_rows(l)}; }

  /// Half-open coordinate ranges covered by the L2 penalty (all embeddings
  /// and weight matrices; biases are excluded).
  const std::vector<std::pair<Index, Index>>& regularized_ranges() const { return regularized_; }
  /// Sum of squares over the regularized coordinates.
  double regularized_norm2() const;
  /// out += scale * v restricted to regularized coordinates.
  void add_regularized(const Vector& v, double scale, Vector& out) const;

  /// Rounds every value to the nearest float32. Checkpoints store float32.
  void snap_to_float();

  bool operator==(const ModelParams& o) const;

 private:
  static Eigen::Index as_eigen(Index n) { return static_cast<Eigen::Index>(n); }
  Eigen::Index out_rows(Index l) const { return as_eigen(arch_.widths[l + 1]); }
  Eigen::Index in_cols(Index l) const { return as_eigen(arch_.widths[l]); }
  void layout();

  ModelKind kind_ = ModelKind::kMf;
  Index users_ = 0;
  Index items_ = 0;
  Index dim_ = 0;
  NcfArchitecture arch_;
  std::vector<Index> layer_offsets_;
  std::vector<std::pair<Index, Index>> regularized_;
  Vector values_;
};

/// Normal(0, 0.01^2) embeddings and weights, zero biases, drawn at float32
/// precision from `seed`.
ModelParams init_params(ModelKind kind, Index users, Index items, const Hyperparams& hp,
                        const NcfArchitecture& arch);

}  // namespace lfm
