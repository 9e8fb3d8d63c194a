#include <doctest.h>

#include "nester/tensor.hpp"

#include <cmath>

using namespace nester;

namespace {

Mat random_mat(Index rows, Index cols, std::mt19937_64& rng, Real lo = -1.0, Real hi = 1.0) {
  std::uniform_real_distribution<Real> dist(lo, hi);
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("matmul identity and hand arithmetic") {
  Mat id = Mat::Identity(2, 2);
  Mat b(2, 2);
  b << 3, 4, 5, 6;
  Tensor r = matmul(Tensor::from_mat(id), Tensor::from_mat(b));
  CHECK(r.value() == b);

  Mat a(1, 2);
  a << 1, 2;
  Mat c(2, 1);
  c << 3, 4;
  CHECK(matmul(Tensor::from_mat(a), Tensor::from_mat(c)).item() == doctest::Approx(11.0));
}

TEST_CASE("matmul dimension mismatch names both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  bool threw = false;
  try {
    matmul(a, b);
  } catch (const ShapeError& e) {
    threw = true;
    std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x2") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("matmul associativity on random 3-chains") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = Tensor::from_mat(random_mat(3, 4, rng));
    Tensor b = Tensor::from_mat(random_mat(4, 5, rng));
    Tensor c = Tensor::from_mat(random_mat(5, 2, rng));
    Mat left = matmul(matmul(a, b), c).value();
    Mat right = matmul(a, matmul(b, c)).value();
    Real denom = std::max(left.cwiseAbs().maxCoeff(), 1e-12);
    CHECK((left - right).cwiseAbs().maxCoeff() / denom < 1e-9);
  }
}

TEST_CASE("activation examples") {
  Mat x(1, 3);
  x << -1, 0, 2;
  Mat r = activate(Tensor::from_mat(x), Activation::relu).value();
  CHECK(r(0, 0) == 0.0);
  CHECK(r(0, 1) == 0.0);
  CHECK(r(0, 2) == 2.0);

  Mat z(1, 2);
  z << 0, 0;
  Mat s = activate(Tensor::from_mat(z), Activation::softmax_lastaxis).value();
  CHECK(s(0, 0) == doctest::Approx(0.5));
  CHECK(s(0, 1) == doctest::Approx(0.5));

  Mat l(1, 2);
  l << std::log(2.0), std::log(2.0);
  CHECK(activate(Tensor::from_mat(l), Activation::logsumexp_lastaxis).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one; logsumexp dominates the max") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Mat x = random_mat(4, 6, rng, -8, 8);
    Mat s = softmax_lastaxis(Tensor::from_mat(x)).value();
    for (Index r = 0; r < s.rows(); ++r) {
      CHECK(std::abs(s.row(r).sum() - 1.0) < 1e-9);
    }
    Mat l = logsumexp_lastaxis(Tensor::from_mat(x)).value();
    for (Index r = 0; r < x.rows(); ++r) {
      CHECK(l(r, 0) >= x.row(r).maxCoeff());
    }
  }
}

TEST_CASE("gradient_check on a quadratic") {
  Mat p0(1, 2);
  p0 << 1, 2;
  Tensor p = Tensor::from_mat(p0, true);
  auto loss = [&]() { return sum_all(cmul(p, p)); };
  Real err = gradient_check(loss, {p}, 1e-5);
  CHECK(err < 1e-6);
  p.zero_grad();
  Tensor l = loss();
  l.backward();
  CHECK(p.grad()(0, 0) == doctest::Approx(2.0));
  CHECK(p.grad()(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("gradient_check on a constant loss") {
  Tensor p = Tensor::from_mat(Mat::Ones(1, 3), true);
  Tensor c = Tensor::scalar(3.0);
  auto loss = [&]() { return add(scale(sum_all(p), 0.0), sum_all(c)); };
  CHECK(gradient_check(loss, {p}, 1e-5) == 0.0);
}

TEST_CASE("gradient_check rejects non-finite losses") {
  Tensor p = Tensor::from_mat(Mat::Zero(1, 1), true);
  auto loss = [&]() { return Tensor::scalar(std::numeric_limits<Real>::quiet_NaN()); };
  CHECK_THROWS_AS(gradient_check(loss, {p}, 1e-5), NumericError);
}

TEST_CASE("every op used in losses passes finite differences") {
  std::mt19937_64 rng(17);
  Tensor w = Tensor::from_mat(random_mat(3, 4, rng), true);
  Tensor u = Tensor::from_mat(random_mat(5, 3, rng), true);
  Tensor b = Tensor::from_mat(random_mat(1, 4, rng), true);

  auto check = [&](const std::function<Tensor()>& loss) {
    CHECK(gradient_check(loss, {w, u, b}, 1e-5) < 1e-4);
  };

  check([&] { return sum_all(tanh_op(add_rowvec(matmul(u, w), b))); });
  check([&] { return sum_all(sigmoid(matmul(u, w))); });
  Tensor cell_w = Tensor::from_mat(random_mat(5, 4, rng));
  check([&] { return sum_all(cmul(softmax_lastaxis(matmul(u, w)), cell_w)); });
  check([&] { return sum_all(logsumexp_lastaxis(matmul(u, w))); });
  check([&] { return sum_all(log_clamped(add(cmul(w, w), Tensor::from_mat(Mat::Constant(3, 4, 0.2))), 1e-12)); });
  check([&] { return sum_all(concat_cols(transpose(w), slice_rows(u, 0, 4))); });

  // ReLU: redraw until every pre-activation clears the kink by more than
  // the finite-difference step can move it.
  std::mt19937_64 r2(23);
  Tensor w2, u2;
  do {
    w2 = Tensor::from_mat(random_mat(3, 4, r2), true);
    u2 = Tensor::from_mat(random_mat(5, 3, r2), true);
  } while ((u2.value() * w2.value()).cwiseAbs().minCoeff() < 1e-2);
  CHECK(gradient_check([&] { return sum_all(relu(matmul(u2, w2))); }, {w2, u2}, 1e-5) < 1e-4);
  check([&] { return pick_sum(matmul(u, w), {0, 5, 5, 19}); });
  check([&] { return sum_all(gather_rows(u, {0, 2, 2, 4})); });
  check([&] { return sum_all(slice_cols(reshape(w, {4, 3}), 1, 2)); });
  check([&] {
    return sum_all(masked_pick_lastaxis(softmax_lastaxis(matmul(u, w)), {0, 3, 1, 2, 0},
                                        {true, false, true, true, false}, {5, 1}));
  });
  check([&] {
    std::vector<Tensor> parts = {slice_rows(u, 0, 2), slice_rows(u, 3, 2)};
    return sum_all(cmul(concat_rows(parts), concat_rows(parts)));
  });
}

TEST_CASE("backward accumulates on leaves and resets interior nodes") {
  Tensor p = Tensor::from_mat(Mat::Ones(1, 2), true);
  Tensor mid = scale(p, 3.0);
  Tensor a = sum_all(mid);
  Tensor b = sum_all(cmul(mid, mid));
  p.zero_grad();
  a.backward();
  Mat after_a = p.grad();
  b.backward();  // shares `mid`; must not double-propagate a's gradient
  Mat total = p.grad();
  CHECK(after_a(0, 0) == doctest::Approx(3.0));
  // d(b)/dp = 2 * 9 * p = 18, plus the 3 already accumulated.
  CHECK(total(0, 0) == doctest::Approx(21.0));
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor::zeros({0, 2}), ShapeError);
  Tensor t = Tensor::zeros({2, 3, 4});
  CHECK(t.rows() == 6);
  CHECK(t.cols() == 4);
  CHECK(t.size() == 24);
  CHECK_THROWS_AS(t.item(), ShapeError);
  // deep chains tear down without stack overflow
  Tensor chain = Tensor::from_mat(Mat::Ones(1, 4), true);
  for (int i = 0; i < 200000; ++i) chain = scale(chain, 1.0);
  CHECK(chain.value()(0, 0) == 1.0);
}

}  // TEST_SUITE
