#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "varfa/optim.hpp"

#include <cmath>
#include <limits>

using namespace varfa;
using doctest::Approx;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  CounterRng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = 2.0 * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("first Adam step moves by the learning rate") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, 1, 1.0);
  ParamList<double> params{param("x", x)};
  GradientBundle<double> g;
  g.set("x", Eigen::MatrixXd::Constant(1, 1, 2.0));
  AdamState<double> state;
  adam_step(params, g, state, 0.05);
  // m_hat = 2, v_hat = 4 -> step = 0.05 * 2 / (2 + 1e-8)
  CHECK(x(0, 0) - 1.0 == Approx(-0.05 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));
  CHECK(state.step == 1);
}

TEST_CASE("Adam matches a scalar transcription of the update rule") {
  double x_ref = 0.3, m = 0.0, v = 0.0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, 1, 0.3);
  ParamList<double> params{param("x", x)};
  AdamState<double> state;
  for (int t = 1; t <= 25; ++t) {
    const double grad = std::sin(3.0 * t) + 2.0 * x_ref;
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    x_ref -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    GradientBundle<double> g;
    g.set("x", Eigen::MatrixXd::Constant(1, 1, std::sin(3.0 * t) + 2.0 * x(0, 0)));
    adam_step(params, g, state, 0.01);
    CHECK(x(0, 0) == Approx(x_ref).epsilon(1e-12));
  }
}

TEST_CASE("zero gradient leaves parameters but counts the step") {
  Eigen::MatrixXd x = random_matrix(3, 2, 1);
  const Eigen::MatrixXd before = x;
  ParamList<double> params{param("x", x)};
  GradientBundle<double> g;
  g.set("x", Eigen::MatrixXd::Zero(3, 2));
  AdamState<double> state;
  adam_step(params, g, state, 0.05);
  CHECK(x == before);
  CHECK(state.step == 1);
}

TEST_CASE("identical calls from identical state agree bitwise") {
  Eigen::MatrixXd a = random_matrix(4, 3, 2), b = a;
  Eigen::VectorXd va = random_matrix(5, 1, 3), vb = va;
  ParamList<double> pa{param("a", a), param("v", va)}, pb{param("a", b), param("v", vb)};
  AdamState<double> sa, sb;
  for (int t = 0; t < 3; ++t) {
    GradientBundle<double> g;
    g.set("a", random_matrix(4, 3, 10 + t));
    g.set("v", random_matrix(5, 1, 20 + t));
    adam_step(pa, g, sa, 0.05);
    adam_step(pb, g, sb, 0.05);
  }
  CHECK(a == b);
  CHECK(va == vb);
}

TEST_CASE("bad gradients are rejected before anything changes") {
  Eigen::MatrixXd x = random_matrix(2, 2, 4), y = random_matrix(2, 1, 5);
  const Eigen::MatrixXd x0 = x, y0 = y;
  ParamList<double> params{param("x", x), param("y", y)};
  AdamState<double> state;

  GradientBundle<double> nan_grad;
  nan_grad.set("x", Eigen::MatrixXd::Zero(2, 2));
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 1);
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  nan_grad.set("y", bad);
  try {
    adam_step(params, nan_grad, state, 0.05);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("'y'") != std::string::npos);
  }
  CHECK(x == x0);
  CHECK(y == y0);
  CHECK(state.step == 0);

  GradientBundle<double> wrong_shape;
  wrong_shape.set("x", Eigen::MatrixXd::Zero(2, 2));
  wrong_shape.set("y", Eigen::MatrixXd::Zero(1, 2));
  CHECK_THROWS_AS(adam_step(params, wrong_shape, state, 0.05), NumericError);

  GradientBundle<double> missing;
  missing.set("x", Eigen::MatrixXd::Zero(2, 2));
  CHECK_THROWS_AS(adam_step(params, missing, state, 0.05), NumericError);
  CHECK_THROWS_AS(adam_step(params, nan_grad, state, 0.0), ConfigError);
}

TEST_CASE("Adam descends a convex quadratic") {
  Eigen::MatrixXd x = random_matrix(6, 1, 6);
  Eigen::MatrixXd A = random_matrix(6, 6, 7);
  const Eigen::MatrixXd H = A.transpose() * A + Eigen::MatrixXd::Identity(6, 6);
  auto f = [&] { return 0.5 * (x.transpose() * H * x)(0, 0); };
  const double start = f();
  ParamList<double> params{param("x", x)};
  AdamState<double> state;
  for (int t = 0; t < 50; ++t) {
    GradientBundle<double> g;
    g.set("x", H * x);
    adam_step(params, g, state, 0.05);
  }
  CHECK(f() < start);
}

TEST_CASE("prox examples") {
  CHECK(prox_nonneg_l1(0.5, 0.2) == Approx(0.3));
  CHECK(prox_nonneg_l1(-0.5, 0.2) == 0.0);
  CHECK(prox_nonneg_l1(0.1, 0.2) == 0.0);
  Eigen::MatrixXd x(1, 3);
  x << 0.5, -0.5, 0.1;
  const Eigen::MatrixXd p = prox_nonneg_l1(x, 0.2);
  CHECK(p(0, 0) == Approx(0.3));
  CHECK(p(0, 1) == 0.0);
  CHECK(p(0, 2) == 0.0);
  apply_prox_nonneg_l1(x, 0.2);
  CHECK(x == p);
}

TEST_CASE("prox is nonnegative, monotone and idempotent at zero threshold") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Eigen::MatrixXd x = random_matrix(4, 5, seed);
    const Eigen::MatrixXd y = x + random_matrix(4, 5, seed + 1000).cwiseAbs();
    const double t = 0.05 * static_cast<double>(seed % 7);
    const Eigen::MatrixXd px = prox_nonneg_l1(x, t), py = prox_nonneg_l1(y, t);
    CHECK((px.array() >= 0.0).all());
    CHECK((px.array() <= py.array()).all());
    const Eigen::MatrixXd p0 = prox_nonneg_l1(x, 0.0);
    CHECK(prox_nonneg_l1(p0, 0.0) == p0);
  }
}

TEST_CASE("prox keeps views into the parameter valid") {
  Eigen::MatrixXd M = random_matrix(3, 3, 8);
  const double* storage = M.data();
  ParamList<double> params{param("M", M)};
  apply_prox_nonneg_l1(M, 0.1);
  CHECK(M.data() == storage);
  CHECK(params[0].value == M);
}

TEST_CASE("finite differences are exact on a quadratic") {
  Eigen::MatrixXd x = random_matrix(5, 2, 9);
  ParamList<double> params{param("x", x)};
  GradientBundle<double> g;
  g.set("x", 2.0 * x);
  const auto report = finite_diff_check<double>([&] { return x.squaredNorm(); }, params, g, 1e-5);
  CHECK(report.checked == 10);
  CHECK(report.max_rel_error < 1e-8);
}

TEST_CASE("finite differences flag a wrong gradient and a non-finite objective") {
  Eigen::MatrixXd x = random_matrix(3, 1, 10);
  ParamList<double> params{param("x", x)};
  GradientBundle<double> g;
  g.set("x", 3.0 * x);
  const auto report = finite_diff_check<double>([&] { return x.squaredNorm(); }, params, g, 1e-5);
  CHECK(report.max_rel_error > 0.3);
  CHECK(report.worst_param == "x");
  CHECK_THROWS_AS(finite_diff_check<double>([] { return std::nan(""); }, params, g, 1e-5), NumericError);
  CHECK_THROWS_AS(finite_diff_check<double>([&] { return x.squaredNorm(); }, params, g, 0.0), ConfigError);
}

TEST_CASE("finite differences subsample large parameter sets") {
  Eigen::MatrixXd x = random_matrix(30, 30, 11);
  ParamList<double> params{param("x", x)};
  GradientBundle<double> g;
  g.set("x", 2.0 * x);
  const Eigen::MatrixXd before = x;
  const auto report = finite_diff_check<double>([&] { return x.squaredNorm(); }, params, g, 1e-5, 150, 3);
  CHECK(report.checked == 150);
  CHECK(x == before);
}
