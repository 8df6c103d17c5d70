#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <urdusum/numerics.hpp>
#include <urdusum/rng.hpp>

using namespace urdusum;
using Catch::Approx;

TEST_CASE("matmul") {
  const Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(matmul(a, Matrix::identity(3)) == a);
  CHECK(matmul(Matrix::from_rows({{1, 2}, {3, 4}}), Matrix::from_rows({{1}, {1}})) == Matrix::from_rows({{3}, {7}}));
  CHECK_THROWS_AS(matmul(a, Matrix(2, 2)), ShapeMismatch);
  CHECK_THROWS_AS(Matrix::from_rows({{1, 2}, {3}}), ShapeMismatch);
}

TEST_CASE("vector kernels agree with matmul") {
  Rng rng(1);
  Matrix w(4, 3);
  for (double& v : w.values()) v = rng.uniform(-1, 1);
  const Vector x{0.5, -1.0, 2.0};
  const Matrix y = matmul(w, Matrix::column(x));
  Vector acc(4, 1.0);
  gemv_acc(w, x, acc);
  for (std::size_t i = 0; i < 4; ++i) CHECK(acc[i] == Approx(1.0 + y(i, 0)));

  const Vector z{1.0, 2.0, 3.0, 4.0};
  Vector t(3, 0.0);
  gemv_t_acc(w, z, t);
  for (std::size_t j = 0; j < 3; ++j) {
    double expect = 0.0;
    for (std::size_t i = 0; i < 4; ++i) expect += w(i, j) * z[i];
    CHECK(t[j] == Approx(expect));
  }

  Matrix g(2, 2);
  outer_acc(g, Vector{1, 2}, Vector{3, 4});
  CHECK(g == Matrix::from_rows({{3, 4}, {6, 8}}));
  CHECK(dot(Vector{1, 2, 3}, Vector{4, 5, 6}) == 32.0);
}

TEST_CASE("softmax") {
  const Vector half = softmax(Vector{0.0, 0.0});
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);
  const Vector p = softmax(Vector{std::log(1.0), std::log(3.0)});
  CHECK(p[0] == Approx(0.25).epsilon(1e-14));
  CHECK(p[1] == Approx(0.75).epsilon(1e-14));
  SECTION("shift invariance and normalization") {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
      Vector v(1 + rng.below(10));
      for (double& x : v) x = rng.uniform(-20, 20);
      const double c = rng.uniform(-500, 500);
      Vector shifted = v;
      for (double& x : shifted) x += c;
      const Vector a = softmax(v);
      const Vector b = softmax(shifted);
      double sum = 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) {
        CHECK(a[k] == Approx(b[k]).margin(1e-12));
        sum += a[k];
      }
      CHECK(sum == Approx(1.0).epsilon(1e-12));
      const Vector ls = log_softmax(v);
      for (std::size_t k = 0; k < v.size(); ++k) CHECK(std::exp(ls[k]) == Approx(a[k]).margin(1e-12));
    }
  }
  SECTION("large logits stay finite") {
    const Vector p2 = softmax(Vector{1000.0, 1000.0, -1000.0});
    CHECK(p2[0] == Approx(0.5));
    CHECK(p2[2] == 0.0);
  }
  CHECK_THROWS_AS(softmax(Vector{}), InvalidArgument);
}

TEST_CASE("cross_entropy") {
  CHECK(cross_entropy(Vector{0.0, 1.0, 0.0}, 1) < 1e-11);
  CHECK(cross_entropy(Vector(8, 0.125), 3) == Approx(std::log(8.0)).epsilon(1e-10));
  CHECK(cross_entropy(Vector{0.25, 0.75}, 1) == Approx(0.2876820724517809).epsilon(1e-10));
  CHECK(std::isfinite(cross_entropy(Vector{1.0, 0.0}, 1)));
  CHECK_THROWS_AS(cross_entropy(Vector{0.5, 0.5}, 2), IndexOutOfRange);
}

TEST_CASE("elementwise activations") {
  const Matrix m = Matrix::from_rows({{0.0, std::log(3.0)}});
  const Matrix s = elementwise(Activation::sigmoid, m);
  CHECK(s(0, 0) == 0.5);
  CHECK(s(0, 1) == Approx(0.75).epsilon(1e-14));
  CHECK(elementwise(Activation::tanh, m)(0, 0) == 0.0);
}

TEST_CASE("grad_check") {
  const LossFn square = [](std::span<const Matrix> p) { return p[0](0, 0) * p[0](0, 0); };
  const std::vector<Matrix> theta{Matrix::from_rows({{3.0}})};
  SECTION("exact derivative") {
    const std::vector<Matrix> g{Matrix::from_rows({{6.0}})};
    CHECK(grad_check(square, theta, g, 1e-5) < 1e-9);
  }
  SECTION("doubled derivative reports 0.5") {
    const std::vector<Matrix> g{Matrix::from_rows({{12.0}})};
    CHECK(grad_check(square, theta, g, 1e-5) == Approx(0.5).epsilon(1e-6));
  }
  SECTION("no parameters") { CHECK(grad_check([](std::span<const Matrix>) { return 1.0; }, {}, {}, 1e-5) == 0.0); }
  SECTION("multi-tensor loss with sampling") {
    const LossFn f = [](std::span<const Matrix> p) {
      double s = 0.0;
      for (const auto& m : p)
        for (double v : m.values()) s += std::sin(v) * v;
      return s;
    };
    Rng rng(3);
    std::vector<Matrix> params{Matrix(30, 20), Matrix(5, 1)};
    std::vector<Matrix> grads{Matrix(30, 20), Matrix(5, 1)};
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t i = 0; i < params[t].size(); ++i) {
        const double v = params[t].values()[i] = rng.uniform(-2, 2);
        grads[t].values()[i] = std::cos(v) * v + std::sin(v);
      }
    CHECK(grad_check(f, params, grads, 1e-5) < 1e-6);
    CHECK(grad_check(f, params, grads, 1e-5, {.max_per_tensor = 10, .seed = 4}) < 1e-6);
  }
  SECTION("shape and step errors") {
    CHECK_THROWS_AS(grad_check(square, theta, std::vector<Matrix>{Matrix(2, 1)}, 1e-5), ShapeMismatch);
    CHECK_THROWS_AS(grad_check(square, theta, std::vector<Matrix>{Matrix(1, 1)}, 0.0), InvalidArgument);
    const LossFn nan = [](std::span<const Matrix>) { return std::nan(""); };
    CHECK_THROWS_AS(grad_check(nan, theta, std::vector<Matrix>{Matrix(1, 1)}, 1e-5), NonFiniteLoss);
  }
}
