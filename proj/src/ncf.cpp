#include "lfm/ncf.hpp"

#include "lfm/error.hpp"

namespace lfm {

namespace {

using Matrix = Eigen::MatrixXd;

Eigen::Index eidx(Index i) { return static_cast<Eigen::Index>(i); }

template <typename T>
typename T::PlainObject activate(Activation act, const T& pre) {
  switch (act) {
    case Activation::kRelu: return pre.cwiseMax(0.0);
    case Activation::kTanh: return pre.array().tanh().matrix();
    case Activation::kIdentity: break;
  }
  return pre;
}

// First derivative of the activation, from pre- and post-activation values.
template <typename T>
typename T::PlainObject first_derivative(Activation act, const T& pre, const T& post) {
  switch (act) {
    case Activation::kRelu: return (pre.array() > 0.0).template cast<double>().matrix();
    case Activation::kTanh: return (1.0 - post.array().square()).matrix();
    case Activation::kIdentity: break;
  }
  return T::PlainObject::Ones(pre.rows(), pre.cols());
}

// Second derivative. relu uses the almost-everywhere value 0.
template <typename T>
typename T::PlainObject second_derivative(Activation act, const T& pre, const T& post) {
  if (act == Activation::kTanh) return (-2.0 * post.array() * (1.0 - post.array().square())).matrix();
  return T::PlainObject::Zero(pre.rows(), pre.cols());
}

void require_ncf(const ModelParams& params) {
  if (params.kind() != ModelKind::kNcf) throw Error(ErrorKind::kInternal, "expected an NCF model");
}

// Network-block coordinates of layer l (relative to embedding_size()).
Index net_weight_offset(const ModelParams& p, Index l) { return p.weight_offset(l) - p.embedding_size(); }
Index net_bias_offset(const ModelParams& p, Index l) { return p.bias_offset(l) - p.embedding_size(); }

// Backpropagates d(out)/d(g) = dout through a cached forward pass.
void backprop(const ForwardCache& cache, const ModelParams& params, double dout, Vector& d_input,
              Vector& d_network) {
  const auto& arch = params.architecture();
  const Index layers = arch.num_layers();
  d_network = Vector::Zero(eidx(params.network_size()));
  Vector da = Vector::Constant(1, dout);
  for (Index l = layers; l-- > 0;) {
    Vector ds = first_derivative(arch.activation(l), cache.pre[l], cache.post[l + 1]).cwiseProduct(da);
    const auto rows = eidx(arch.widths[l + 1]);
    const auto cols = eidx(arch.widths[l]);
    Eigen::Map<RowMatrix>(d_network.data() + net_weight_offset(params, l), rows, cols) +=
        ds * cache.post[l].transpose();
    d_network.segment(eidx(net_bias_offset(params, l)), rows) += ds;
    da = params.weight(l).transpose() * ds;
  }
  d_input = std::move(da);
}

void add_network_penalty(const ModelParams& params, double l2, Vector& d_network) {
  const auto& arch = params.architecture();
  for (Index l = 0; l < arch.num_layers(); ++l) {
    const auto n = eidx(arch.widths[l] * arch.widths[l + 1]);
    d_network.segment(eidx(net_weight_offset(params, l)), n) +=
        2.0 * l2 * params.values().segment(eidx(params.weight_offset(l)), n);
  }
}

// Adds Hess((g - y)^2) . d for one example into (hu, hi, hnet). The
// direction is (du, di) on the example's user/item rows plus `dnet` on the
// network block (nullptr means zero). `hnet` may be nullptr when the
// network block of the product is not needed.
void example_hvp(const IndexedRating& z, const ModelParams& params, const Vector& du, const Vector& di,
                 const Vector* dnet, Vector& hu, Vector& hi, Vector* hnet) {
  const auto& arch = params.architecture();
  const Index layers = arch.num_layers();
  const auto k = eidx(params.dim());
  const ForwardCache cache = ncf_forward(z.user, z.item, params);

  // R-forward.
  std::vector<Vector> rpre(layers), rpost(layers + 1);
  rpost[0].resize(2 * k);
  rpost[0] << du, di;
  for (Index l = 0; l < layers; ++l) {
    Vector rs = params.weight(l) * rpost[l];
    if (dnet != nullptr) {
      const auto rows = eidx(arch.widths[l + 1]);
      const auto cols = eidx(arch.widths[l]);
      Eigen::Map<const RowMatrix> vw(dnet->data() + net_weight_offset(params, l), rows, cols);
      rs += vw * cache.post[l] + dnet->segment(eidx(net_bias_offset(params, l)), rows);
    }
    rpost[l + 1] = first_derivative(arch.activation(l), cache.pre[l], cache.post[l + 1]).cwiseProduct(rs);
    rpre[l] = std::move(rs);
  }

  // Reverse pass and its R-derivative.
  const double e = cache.output() - z.rating;
  Vector da = Vector::Constant(1, 2.0 * e);
  Vector rda = Vector::Constant(1, 2.0 * rpost[layers](0));
  for (Index l = layers; l-- > 0;) {
    const Activation act = arch.activation(l);
    const Vector d1 = first_derivative(act, cache.pre[l], cache.post[l + 1]);
    const Vector d2 = second_derivative(act, cache.pre[l], cache.post[l + 1]);
    const Vector ds = d1.cwiseProduct(da);
    const Vector rds = d2.cwiseProduct(rpre[l]).cwiseProduct(da) + d1.cwiseProduct(rda);
    const auto rows = eidx(arch.widths[l + 1]);
    const auto cols = eidx(arch.widths[l]);
    if (hnet != nullptr) {
      Eigen::Map<RowMatrix>(hnet->data() + net_weight_offset(params, l), rows, cols) +=
          rds * cache.post[l].transpose() + ds * rpost[l].transpose();
      hnet->segment(eidx(net_bias_offset(params, l)), rows) += rds;
    }
    Vector next_rda = params.weight(l).transpose() * rds;
    if (dnet != nullptr) {
      Eigen::Map<const RowMatrix> vw(dnet->data() + net_weight_offset(params, l), rows, cols);
      next_rda += vw.transpose() * ds;
    }
    da = params.weight(l).transpose() * ds;
    rda = std::move(next_rda);
  }
  hu += rda.head(k);
  hi += rda.tail(k);
}

}  // namespace

ForwardCache ncf_forward(Index user, Index item, const ModelParams& params) {
  require_ncf(params);
  if (user >= params.num_users() || item >= params.num_items()) {
    throw Error(ErrorKind::kInternal, "ncf_forward: index out of range");
  }
  const auto& arch = params.architecture();
  const auto k = eidx(params.dim());
  ForwardCache cache;
  cache.user = user;
  cache.item = item;
  cache.post.reserve(arch.num_layers() + 1);
  cache.pre.reserve(arch.num_layers());
  Vector z0(2 * k);
  z0 << params.user(user), params.item(item);
  cache.post.push_back(std::move(z0));
  for (Index l = 0; l < arch.num_layers(); ++l) {
    Vector s = params.weight(l) * cache.post[l] + params.bias(l);
    cache.post.push_back(activate(arch.activation(l), s));
    cache.pre.push_back(std::move(s));
  }
  return cache;
}

NcfGradient ncf_output_gradient(const ForwardCache& cache, const ModelParams& params) {
  require_ncf(params);
  Vector d_input, d_network;
  backprop(cache, params, 1.0, d_input, d_network);
  const auto k = eidx(params.dim());
  return NcfGradient{d_input.head(k), d_input.tail(k), std::move(d_network)};
}

NcfGradient ncf_backward(const IndexedRating& z, const ForwardCache& cache, const ModelParams& params,
                         double l2) {
  require_ncf(params);
  const double e = cache.output() - z.rating;
  Vector d_input, d_network;
  backprop(cache, params, 2.0 * e, d_input, d_network);
  const auto k = eidx(params.dim());
  NcfGradient g{d_input.head(k) + 2.0 * l2 * params.user(z.user), d_input.tail(k) + 2.0 * l2 * params.item(z.item),
                std::move(d_network)};
  add_network_penalty(params, l2, g.network);
  return g;
}

Index HvpSubset::size(const ModelParams& params) const {
  switch (kind) {
    case Kind::kEmbeddingsOf: return 2 * params.dim();
    case Kind::kNetworkOnly: return params.network_size();
    case Kind::kFull: return params.size();
  }
  return 0;
}

Vector ncf_hvp(const Vector& v, std::span<const Index> points, const Dataset& train, const ModelParams& params,
               HvpSubset subset, double l2, double damping) {
  require_ncf(params);
  if (v.size() != eidx(subset.size(params))) throw Error(ErrorKind::kInternal, "ncf_hvp: v has the wrong size");
  if (points.empty()) throw Error(ErrorKind::kColdStart, "no interacting training points");
  const auto k = eidx(params.dim());
  const Vector zero_k = Vector::Zero(k);
  Vector out = Vector::Zero(v.size());
  Vector hu(k), hi(k);

  switch (subset.kind) {
    case HvpSubset::Kind::kEmbeddingsOf: {
      for (Index r : points) {
        const auto& z = train.record(r);
        const bool su = z.user == subset.pair.user;
        const bool si = z.item == subset.pair.item;
        if (!su && !si) throw Error(ErrorKind::kInternal, "ncf_hvp: point does not touch the test pair");
        hu.setZero();
        hi.setZero();
        example_hvp(z, params, su ? Vector(v.head(k)) : zero_k, si ? Vector(v.tail(k)) : zero_k, nullptr, hu, hi,
                    nullptr);
        if (su) out.head(k) += hu;
        if (si) out.tail(k) += hi;
      }
      out /= static_cast<double>(points.size());
      out += 2.0 * l2 * v;
      break;
    }
    case HvpSubset::Kind::kNetworkOnly: {
      for (Index r : points) {
        hu.setZero();
        hi.setZero();
        example_hvp(train.record(r), params, zero_k, zero_k, &v, hu, hi, &out);
      }
      out /= static_cast<double>(points.size());
      const auto& arch = params.architecture();
      for (Index l = 0; l < arch.num_layers(); ++l) {
        const auto n = eidx(arch.widths[l] * arch.widths[l + 1]);
        const auto off = eidx(net_weight_offset(params, l));
        out.segment(off, n) += 2.0 * l2 * v.segment(off, n);
      }
      break;
    }
    case HvpSubset::Kind::kFull: {
      const auto emb = eidx(params.embedding_size());
      const Vector vnet = v.tail(v.size() - emb);
      Vector hnet = Vector::Zero(vnet.size());
      for (Index r : points) {
        const auto& z = train.record(r);
        const auto uo = eidx(params.user_offset(z.user));
        const auto io = eidx(params.item_offset(z.item));
        hu.setZero();
        hi.setZero();
        example_hvp(z, params, v.segment(uo, k), v.segment(io, k), &vnet, hu, hi, &hnet);
        out.segment(uo, k) += hu;
        out.segment(io, k) += hi;
      }
      out.tail(hnet.size()) += hnet;
      out /= static_cast<double>(points.size());
      params.add_regularized(v, 2.0 * l2, out);
      break;
    }
  }
  out += damping * v;
  return out;
}

double ncf_accumulate_data_gradient(const ModelParams& params, const Dataset& data, std::span<const Index> rows,
                                    double scale, Vector& grad) {
  require_ncf(params);
  const auto& arch = params.architecture();
  const Index layers = arch.num_layers();
  const auto k = eidx(params.dim());
  const auto b = eidx(rows.size());
  if (b == 0) return 0.0;

  // Buffers persist per thread so repeated full-batch epochs do not
  // reallocate.
  struct Workspace {
    std::vector<Matrix> pre, post;
    Matrix da, da_next, ds;
    Vector y;
  };
  thread_local Workspace ws;
  ws.pre.resize(layers);
  ws.post.resize(layers + 1);
  ws.post[0].resize(2 * k, b);
  ws.y.resize(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto& z = data.record(rows[static_cast<Index>(j)]);
    ws.post[0].col(j).head(k) = params.user(z.user);
    ws.post[0].col(j).tail(k) = params.item(z.item);
    ws.y(j) = z.rating;
  }
  for (Index l = 0; l < layers; ++l) {
    Matrix& pre = ws.pre[l];
    Matrix& post = ws.post[l + 1];
    pre.resize(eidx(arch.widths[l + 1]), b);
    pre.noalias() = params.weight(l) * ws.post[l];
    pre.colwise() += params.bias(l);
    post.resize(pre.rows(), b);
    switch (arch.activation(l)) {
      case Activation::kRelu: post = pre.cwiseMax(0.0); break;
      case Activation::kTanh: post = pre.array().tanh().matrix(); break;
      case Activation::kIdentity: post = pre; break;
    }
  }
  ws.da.resize(1, b);
  ws.da = ws.post[layers].row(0) - ws.y.transpose();
  const double sse = ws.da.squaredNorm();
  ws.da *= 2.0 * scale;

  for (Index l = layers; l-- > 0;) {
    const Matrix& pre = ws.pre[l];
    const Matrix& post = ws.post[l + 1];
    ws.ds.resize(pre.rows(), b);
    switch (arch.activation(l)) {
      case Activation::kRelu: ws.ds = (pre.array() > 0.0).select(ws.da, 0.0); break;
      case Activation::kTanh: ws.ds = ((1.0 - post.array().square()) * ws.da.array()).matrix(); break;
      case Activation::kIdentity: ws.ds = ws.da; break;
    }
    const auto out_w = eidx(arch.widths[l + 1]);
    const auto in_w = eidx(arch.widths[l]);
    Eigen::Map<RowMatrix>(grad.data() + params.weight_offset(l), out_w, in_w).noalias() +=
        ws.ds * ws.post[l].transpose();
    grad.segment(eidx(params.bias_offset(l)), out_w) += ws.ds.rowwise().sum();
    ws.da_next.resize(in_w, b);
    ws.da_next.noalias() = params.weight(l).transpose() * ws.ds;
    std::swap(ws.da, ws.da_next);
  }
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto& z = data.record(rows[static_cast<Index>(j)]);
    grad.segment(eidx(params.user_offset(z.user)), k) += ws.da.col(j).head(k);
    grad.segment(eidx(params.item_offset(z.item)), k) += ws.da.col(j).tail(k);
  }
  return sse;
}

}  // namespace lfm
