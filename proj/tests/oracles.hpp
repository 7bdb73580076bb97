#pragma once

// Reference computations for tests. Nothing here calls into the library's
// math; parameters are read straight from the documented flat layout.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Rating {
  std::size_t u = 0;
  std::size_t i = 0;
  double y = 0.0;
};

struct MfShape {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t k = 0;
  std::size_t size() const { return (users + items) * k; }
  std::size_t p(std::size_t u) const { return u * k; }
  std::size_t q(std::size_t i) const { return (users + i) * k; }
};

inline double mf_pred(const Vec& th, const MfShape& s, std::size_t u, std::size_t i) {
  double g = 0.0;
  for (std::size_t c = 0; c < s.k; ++c) g += th(s.p(u) + c) * th(s.q(i) + c);
  return g;
}

/// (1/n) sum (g - y)^2 + l2 ||theta||^2
inline double mf_objective(const Vec& th, const MfShape& s, const std::vector<Rating>& data, double l2) {
  double sse = 0.0;
  for (const auto& r : data) {
    const double e = mf_pred(th, s, r.u, r.i) - r.y;
    sse += e * e;
  }
  return sse / static_cast<double>(data.size()) + l2 * th.squaredNorm();
}

/// Per-example loss L(z) = (g - y)^2 + l2 ||theta||^2.
inline double mf_example_loss(const Vec& th, const MfShape& s, const Rating& r, double l2) {
  const double e = mf_pred(th, s, r.u, r.i) - r.y;
  return e * e + l2 * th.squaredNorm();
}

/// Dense gradient of L(z) written out by hand.
inline Vec mf_example_grad(const Vec& th, const MfShape& s, const Rating& r, double l2) {
  Vec g = 2.0 * l2 * th;
  const double e = mf_pred(th, s, r.u, r.i) - r.y;
  for (std::size_t c = 0; c < s.k; ++c) {
    g(s.p(r.u) + c) += 2.0 * e * th(s.q(r.i) + c);
    g(s.q(r.i) + c) += 2.0 * e * th(s.p(r.u) + c);
  }
  return g;
}

/// Dense Hessian of the objective, assembled entry by entry:
/// (1/n) sum_z Hess (g_z - y_z)^2 + 2 l2 I.
inline Mat mf_dense_hessian(const Vec& th, const MfShape& s, const std::vector<Rating>& data, double l2) {
  const auto p = static_cast<Eigen::Index>(s.size());
  Mat h = Mat::Zero(p, p);
  const double w = 1.0 / static_cast<double>(data.size());
  for (const auto& r : data) {
    const double e = mf_pred(th, s, r.u, r.i) - r.y;
    for (std::size_t a = 0; a < s.k; ++a) {
      for (std::size_t b = 0; b < s.k; ++b) {
        const double pa = th(s.p(r.u) + a), pb = th(s.p(r.u) + b);
        const double qa = th(s.q(r.i) + a), qb = th(s.q(r.i) + b);
        h(s.p(r.u) + a, s.p(r.u) + b) += w * 2.0 * qa * qb;
        h(s.q(r.i) + a, s.q(r.i) + b) += w * 2.0 * pa * pb;
        // d2/dp_a dq_b of (p.q - y)^2 = 2 (q_a p_b + e [a == b])
        const double cross = 2.0 * (qa * pb + (a == b ? e : 0.0));
        h(s.p(r.u) + a, s.q(r.i) + b) += w * cross;
        h(s.q(r.i) + b, s.p(r.u) + a) += w * cross;
      }
    }
  }
  h.diagonal().array() += 2.0 * l2;
  return h;
}

/// Independent NCF: theta laid out as [users*K | items*K | W_0 b_0 | ...],
/// weights row-major out x in, hidden activations per layer, identity out.
struct NcfShape {
  MfShape emb;
  std::vector<std::size_t> widths;
  std::vector<int> acts;  // 0 identity, 1 relu, 2 tanh for hidden layers
  std::size_t weight(std::size_t l) const {
    std::size_t off = emb.size();
    for (std::size_t j = 0; j < l; ++j) off += widths[j] * widths[j + 1] + widths[j + 1];
    return off;
  }
  std::size_t bias(std::size_t l) const { return weight(l) + widths[l] * widths[l + 1]; }
  std::size_t size() const { return weight(widths.size() - 1); }
};

inline double ncf_pred(const Vec& th, const NcfShape& s, std::size_t u, std::size_t i) {
  std::vector<double> x;
  for (std::size_t c = 0; c < s.emb.k; ++c) x.push_back(th(s.emb.p(u) + c));
  for (std::size_t c = 0; c < s.emb.k; ++c) x.push_back(th(s.emb.q(i) + c));
  for (std::size_t l = 0; l + 1 < s.widths.size(); ++l) {
    std::vector<double> y(s.widths[l + 1]);
    for (std::size_t o = 0; o < y.size(); ++o) {
      double a = th(s.bias(l) + o);
      for (std::size_t j = 0; j < x.size(); ++j) a += th(s.weight(l) + o * s.widths[l] + j) * x[j];
      const int act = l < s.acts.size() ? s.acts[l] : 0;
      y[o] = act == 2 ? std::tanh(a) : act == 1 ? std::max(a, 0.0) : a;
    }
    x = std::move(y);
  }
  return x[0];
}

/// L2 over embeddings and weights, biases excluded.
inline double ncf_penalty(const Vec& th, const NcfShape& s) {
  double sum = 0.0;
  for (std::size_t c = 0; c < s.emb.size(); ++c) sum += th(c) * th(c);
  for (std::size_t l = 0; l + 1 < s.widths.size(); ++l) {
    for (std::size_t c = s.weight(l); c < s.bias(l); ++c) sum += th(c) * th(c);
  }
  return sum;
}

inline double ncf_objective(const Vec& th, const NcfShape& s, const std::vector<Rating>& data, double l2) {
  double sse = 0.0;
  for (const auto& r : data) {
    const double e = ncf_pred(th, s, r.u, r.i) - r.y;
    sse += e * e;
  }
  return sse / static_cast<double>(data.size()) + l2 * ncf_penalty(th, s);
}

/// Central difference d f / d x_c.
inline double fd_partial(const std::function<double(const Vec&)>& f, const Vec& x, Eigen::Index c, double h) {
  Vec a = x, b = x;
  a(c) += h;
  b(c) -= h;
  return (f(a) - f(b)) / (2.0 * h);
}

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) g(c) = fd_partial(f, x, c, h);
  return g;
}

/// Dense FD Hessian from second differences of f, symmetrized.
inline Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  const Eigen::Index p = x.size();
  Mat H(p, p);
  const double f0 = f(x);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = a; b < p; ++b) {
      double v;
      if (a == b) {
        Vec xp = x, xm = x;
        xp(a) += h;
        xm(a) -= h;
        v = (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
      } else {
        Vec pp = x, pm = x, mp = x, mm = x;
        pp(a) += h, pp(b) += h;
        pm(a) += h, pm(b) -= h;
        mp(a) -= h, mp(b) += h;
        mm(a) -= h, mm(b) -= h;
        v = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
      }
      H(a, b) = H(b, a) = v;
    }
  }
  return H;
}

/// Jacobian of a vector function by central differences (Hessian when g is
/// a gradient), symmetrized.
inline Mat fd_jacobian_sym(const std::function<Vec(const Vec&)>& g, const Vec& x, double h) {
  const Eigen::Index p = x.size();
  Mat J(p, p);
  for (Eigen::Index c = 0; c < p; ++c) {
    Vec a = x, b = x;
    a(c) += h;
    b(c) -= h;
    J.col(c) = (g(a) - g(b)) / (2.0 * h);
  }
  return 0.5 * (J + J.transpose());
}

inline double rel_err(double got, double want, double floor = 1e-12) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

/// max_i |got_i - want_i| / max(|want_i|, floor)
inline double max_elementwise_rel(const Vec& got, const Vec& want, double floor = 1e-12) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < want.size(); ++i) worst = std::max(worst, rel_err(got(i), want(i), floor));
  return worst;
}

inline double vec_rel(const Vec& got, const Vec& want) {
  const double d = want.norm();
  return (got - want).norm() / (d > 0 ? d : 1.0);
}

inline Vec random_vec(Eigen::Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vec v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

/// Sample Pearson r written out from the definition.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace oracle
