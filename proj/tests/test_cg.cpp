#include <doctest.h>

#include <limits>
#include <random>

#include "lfm/cg.hpp"
#include "lfm/error.hpp"
#include "oracles.hpp"

using namespace lfm;
using oracle::Mat;
using oracle::Vec;

TEST_CASE("identity operator solves in one step") {
  std::mt19937_64 rng(1);
  Vec b = oracle::random_vec(10, rng);
  CgConfig cfg;
  cfg.damping = 0.0;
  auto res = solve_inverse_hvp(b, [](const Vector& v) { return v; }, cfg);
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  CHECK(oracle::vec_rel(res.solution, b) <= 1e-14);
}

TEST_CASE("zero operator with damping") {
  Vec b(3);
  b << 1.0, -2.0, 0.5;
  CgConfig cfg;
  cfg.damping = 0.5;
  auto res = solve_inverse_hvp(b, [](const Vector& v) { return Vector(Vector::Zero(v.size())); }, cfg);
  CHECK(res.converged);
  CHECK(oracle::vec_rel(res.solution, 2.0 * b) <= 1e-14);
}

TEST_CASE("zero right-hand side") {
  CgConfig cfg;
  auto res = solve_inverse_hvp(Vector::Zero(4), [](const Vector& v) { return v; }, cfg);
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.solution.isZero());
}

TEST_CASE("random SPD systems match a dense solve") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Mat a(50, 50);
    for (auto& x : a.reshaped()) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    Mat h = a * a.transpose() + 0.5 * Mat::Identity(50, 50);
    Vec b = oracle::random_vec(50, rng);
    CgConfig cfg;
    cfg.damping = 0.01;
    cfg.tolerance = 1e-12;
    cfg.max_iterations = 500;
    auto res = solve_inverse_hvp(b, [&](const Vector& v) { return Vector(h * v); }, cfg);
    Vec want = (h + 0.01 * Mat::Identity(50, 50)).ldlt().solve(b);
    CHECK(res.converged);
    CHECK(oracle::vec_rel(res.solution, want) <= 1e-8);
    CHECK(!res.nonpositive_curvature);
  }
}

TEST_CASE("iteration cap keeps the best iterate") {
  std::mt19937_64 rng(3);
  Mat a(30, 30);
  for (auto& x : a.reshaped()) x = std::uniform_real_distribution<double>(-1, 1)(rng);
  Mat h = a * a.transpose() + 1e-3 * Mat::Identity(30, 30);
  Vec b = oracle::random_vec(30, rng);
  CgConfig cfg;
  cfg.max_iterations = 3;
  cfg.tolerance = 1e-14;
  auto res = solve_inverse_hvp(b, [&](const Vector& v) { return Vector(h * v); }, cfg);
  CHECK(!res.converged);
  CHECK(res.iterations == 3);
  const double actual = ((h + cfg.damping * Mat::Identity(30, 30)) * res.solution - b).norm() / b.norm();
  CHECK(actual == doctest::Approx(res.relative_residual).epsilon(1e-8));
  CHECK(res.relative_residual < 1.0);
}

TEST_CASE("indefinite operator is flagged") {
  Vec b(2);
  b << 1.0, 0.0;
  CgConfig cfg;
  cfg.damping = 0.0;
  auto res = solve_inverse_hvp(b, [](const Vector& v) { return Vector(-v); }, cfg);
  CHECK(res.nonpositive_curvature);
  CHECK(!res.converged);
}

TEST_CASE("non-finite values throw") {
  CgConfig cfg;
  Vec b = Vec::Ones(3);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_inverse_hvp(b, [&](const Vector& v) { return Vector(v * nan); }, cfg), Error);
  b(1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve_inverse_hvp(b, [](const Vector& v) { return v; }, cfg), Error);
}

TEST_CASE("config validation") {
  CgConfig cfg;
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.tolerance = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.damping = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
