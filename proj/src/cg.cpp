#include "lfm/cg.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "lfm/error.hpp"

namespace lfm {

void CgConfig::validate() const {
  if (!(tolerance > 0)) throw Error(ErrorKind::kConfig, "CG tolerance must be > 0");
  if (!(damping >= 0)) throw Error(ErrorKind::kConfig, "damping must be >= 0");
  if (max_iterations < 1) throw Error(ErrorKind::kConfig, "CG needs at least one iteration");
}

CgResult solve_inverse_hvp(const Vector& b, const LinearOperator& hvp, const CgConfig& cfg) {
  cfg.validate();
  CgResult result;
  result.solution = Vector::Zero(b.size());
  const double b_norm = b.norm();
  if (!std::isfinite(b_norm)) throw Error(ErrorKind::kNumeric, "CG right-hand side is not finite");
  if (b_norm == 0.0) {
    result.converged = true;
    return result;
  }
  auto apply = [&](const Vector& v) -> Vector { return hvp(v) + cfg.damping * v; };

  Vector x = Vector::Zero(b.size());
  Vector r = b;
  Vector p = r;
  double rr = r.squaredNorm();
  double best = 1.0;
  result.relative_residual = 1.0;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Vector ap = apply(p);
    const double curvature = p.dot(ap);
    if (!std::isfinite(curvature)) throw Error(ErrorKind::kNumeric, "non-finite value during CG");
    if (curvature <= 0.0) {
      result.nonpositive_curvature = true;
      spdlog::warn("CG hit non-positive curvature at iteration {}; damping may be too small", it);
      break;
    }
    const double alpha = rr / curvature;
    x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    if (!std::isfinite(rr_next)) throw Error(ErrorKind::kNumeric, "non-finite value during CG");
    const double rel = std::sqrt(rr_next) / b_norm;
    result.iterations = it;
    if (rel < best) {
      best = rel;
      result.solution = x;
      result.relative_residual = rel;
    }
    if (rel <= cfg.tolerance) {
      result.converged = true;
      break;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  if (!result.converged) {
    spdlog::warn("CG stopped after {} iterations at relative residual {:.3e}", result.iterations,
                 result.relative_residual);
  }
  return result;
}

}  // namespace lfm
