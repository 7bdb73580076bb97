#pragma once

#include <functional>

#include "lfm/params.hpp"

namespace lfm {

struct CgConfig {
  int max_iterations = 100;
  double tolerance = 1e-8;  // relative residual ||A t - b|| / ||b||
  double damping = 1e-6;

  void validate() const;
};

struct CgResult {
  Vector solution;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  bool nonpositive_curvature = false;
};

/// v -> H v. The solver adds cfg.damping * v itself.
using LinearOperator = std::function<Vector(const Vector&)>;

/// Conjugate gradients on (H + damping I) t = b, i.e. the minimizer of
/// 1/2 t^T (H + damping I) t - b^T t. Stops on the relative residual or at
/// max_iterations, returning the iterate with the smallest residual seen.
/// Throws Error(kNumeric) if the iteration produces non-finite values.
CgResult solve_inverse_hvp(const Vector& b, const LinearOperator& hvp, const CgConfig& cfg);

}  // namespace lfm
