#include <catch2/catch_amalgamated.hpp>

#include "bcl/rng.hpp"
#include "bcl/tape.hpp"

using namespace bcl;

TEST_CASE("relu forward") {
  Tape t;
  int x = t.leaf(std::vector<double>{-1, 0, 2});
  int y = t.relu(x);
  CHECK(t.val(y).v == std::vector<double>{0, 0, 2});
}

TEST_CASE("softmax of equal logits is uniform") {
  Tape t;
  int x = t.leaf(std::vector<double>{0, 0});
  int y = t.softmax(x);
  CHECK(t.val(y).v[0] == Catch::Approx(0.5));
  CHECK(t.val(y).v[1] == Catch::Approx(0.5));
}

TEST_CASE("matmul against ones contracts rows") {
  Tape t;
  int a = t.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  int ones = t.constant(Tensor::matrix(3, 1, {1, 1, 1}));
  int y = t.matmul(a, ones);
  CHECK(t.val(y).v == std::vector<double>{6, 15});
}

TEST_CASE("matmul shape mismatch raises a structured error") {
  Tape t;
  int a = t.constant(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)));
  int b = t.constant(Tensor::matrix(4, 1, std::vector<double>(4, 1.0)));
  CHECK_THROWS_WITH(t.matmul(a, b), Catch::Matchers::ContainsSubstring("matmul") &&
                                        Catch::Matchers::ContainsSubstring("2x3") &&
                                        Catch::Matchers::ContainsSubstring("4x1"));
}

TEST_CASE("gradient of sum of squares") {
  Tape t;
  int x = t.leaf(std::vector<double>{1, 2});
  int y = t.sum(t.square(x));
  t.backward(y);
  CHECK(t.grad(x) == std::vector<double>{2, 4});
}

TEST_CASE("gradient of a constant w.r.t. a leaf is zero") {
  Tape t;
  int x = t.leaf(std::vector<double>{1, 2, 3});
  int c = t.constant_scalar(5.0);
  int y = t.add(c, t.constant_scalar(1.0));
  t.backward(y);
  CHECK(t.grad(x) == std::vector<double>{0, 0, 0});
}

TEST_CASE("softplus gradient at zero is one half") {
  Tape t;
  int x = t.leaf(std::vector<double>{0});
  int y = t.sum(t.softplus(x));
  t.backward(y);
  CHECK(t.grad(x)[0] == Catch::Approx(0.5));
}

TEST_CASE("grad_check on sum of squares") {
  Tape t;
  int x = t.leaf(std::vector<double>{0.7, -1.3, 2.1});
  int y = t.sum(t.square(x));
  CHECK(grad_check(t, y, x, 1e-5) < 1e-6);
}

TEST_CASE("grad_check is near exact for a linear graph") {
  Tape t;
  int x = t.leaf(std::vector<double>{0.5, -0.25, 4.0});
  int w = t.constant(Tensor::row({2.0, -1.0, 0.5}));
  int y = t.sum(t.mul(x, w));
  CHECK(grad_check(t, y, x, 1e-5) < 1e-9);
}

TEST_CASE("grad_check rejects non-scalar outputs") {
  Tape t;
  int x = t.leaf(std::vector<double>{1, 2});
  int y = t.square(x);
  CHECK_THROWS_AS(grad_check(t, y, x, 1e-5), TapeError);
}

TEST_CASE("backward after set_values requires a fresh forward") {
  Tape t;
  int x = t.leaf(std::vector<double>{1, 2});
  int y = t.sum(t.square(x));
  t.set_values(x, {3, 4});
  CHECK_THROWS_AS(t.backward(y), TapeError);
  t.forward();
  CHECK(t.scalar(y) == Catch::Approx(25.0));
  t.backward(y);
  CHECK(t.grad(x) == std::vector<double>{6, 8});
}

TEST_CASE("gradients accumulate when a leaf feeds multiple paths") {
  Tape t;
  int x = t.leaf(std::vector<double>{1.5});
  int y = t.add(t.sum(x), t.sum(t.square(x)));
  t.backward(y);
  CHECK(t.grad(x)[0] == Catch::Approx(1.0 + 3.0));
}

TEST_CASE("evaluate is bitwise deterministic") {
  Tape t;
  int x = t.leaf(std::vector<double>{0.1234567, -2.7182818, 3.1415926});
  int y = t.sum(t.softplus(t.mul(t.tanh_(x), t.sigmoid(x))));
  double first = t.scalar(y);
  t.forward();
  CHECK(t.scalar(y) == first);
  t.forward();
  CHECK(t.scalar(y) == first);
}

TEST_CASE("tensor seed backward matches manual contraction") {
  Tape t;
  int x = t.leaf(std::vector<double>{1, 2, 3});
  int y = t.square(x);
  t.backward(y, Tensor::row({1.0, 0.5, 0.0}));
  CHECK(t.grad(x) == std::vector<double>{2.0, 2.0, 0.0});
}

TEST_CASE("every primitive matches central finite differences (property)") {
  int tested = 0;
  int attempt = 0;
  while (tested < 100 && attempt < 400) {
    Rng rng(1000 + attempt);
    ++attempt;
    Tape t;
    int n = 2 + static_cast<int>(rng.index(4));
    auto rand_vec = [&](int len) {
      std::vector<double> v(len);
      for (auto& x : v) {
        x = rng.uniform(0.2, 1.5);
        if (rng.uniform() < 0.5) x = -x;
      }
      return v;
    };
    int a = t.leaf(rand_vec(n));
    int b = t.leaf(rand_vec(n));
    int cur = a;
    bool relu_near_kink = false;
    int depth = 3 + static_cast<int>(rng.index(4));
    for (int d = 0; d < depth; ++d) {
      switch (rng.index(12)) {
        case 0: cur = t.add(cur, b); break;
        case 1: cur = t.mul(cur, b); break;
        case 2: {
          for (double x : t.val(cur).v)
            if (std::fabs(x) < 1e-3) relu_near_kink = true;
          cur = t.relu(cur);
          break;
        }
        case 3: cur = t.sigmoid(cur); break;
        case 4: cur = t.softplus(cur); break;
        case 5: cur = t.tanh_(cur); break;
        case 6: cur = t.log_(t.add(t.square(cur), t.constant(Tensor::row(std::vector<double>(n, 0.5))))); break;
        case 7: cur = t.exp_(t.scale(cur, 0.3)); break;
        case 8: cur = t.softmax(cur); break;
        case 9: cur = t.square(cur); break;
        case 10: cur = t.sub(cur, b); break;
        case 11: cur = t.concat(t.slice(cur, 0, {n / 2}), t.slice(cur, n / 2, {n - n / 2})); break;
      }
    }
    if (relu_near_kink) continue;
    int root;
    switch (rng.index(3)) {
      case 0: root = t.sum(cur); break;
      case 1: root = t.mean(cur); break;
      default: root = t.l2norm(cur); break;
    }
    if (!std::isfinite(t.scalar(root)) || std::fabs(t.scalar(root)) > 1e6) continue;

    // hand-rolled central differences; coordinates whose true gradient is
    // below FD resolution are not informative and are skipped
    t.forward();
    t.backward(root);
    double worst = 0.0;
    for (int leaf : {a, b}) {
      std::vector<double> analytic = t.grad(leaf);
      for (size_t i = 0; i < analytic.size(); ++i) {
        const double step = 1e-5;
        std::vector<double> v = t.val(leaf).v;
        double keep = v[i];
        v[i] = keep + step;
        t.set_values(leaf, v);
        t.forward();
        double up = t.scalar(root);
        v[i] = keep - step;
        t.set_values(leaf, v);
        t.forward();
        double dn = t.scalar(root);
        v[i] = keep;
        t.set_values(leaf, v);
        t.forward();
        double fd = (up - dn) / (2 * step);
        if (std::max(std::fabs(fd), std::fabs(analytic[i])) < 1e-6) continue;
        worst = std::max(worst, std::fabs(fd - analytic[i]) / std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-8}));
      }
    }
    INFO("attempt " << attempt << " worst rel err " << worst);
    CHECK(worst < 1e-4);
    ++tested;
  }
  CHECK(tested >= 100);
}

TEST_CASE("matmul and add_row finite differences") {
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    Tape t;
    int m = 2 + static_cast<int>(rng.index(2));
    int k = 2 + static_cast<int>(rng.index(2));
    int c = 1 + static_cast<int>(rng.index(3));
    int A = t.leaf(Tensor::matrix(m, k, rng.normal_vec(m * k)));
    int B = t.leaf(Tensor::matrix(k, c, rng.normal_vec(k * c)));
    int bias = t.leaf(rng.normal_vec(c));
    int y = t.l2norm(t.add_row(t.matmul(A, B), bias));
    CHECK(grad_check(t, y, A, 1e-6) < 1e-6);
    CHECK(grad_check(t, y, B, 1e-6) < 1e-6);
    CHECK(grad_check(t, y, bias, 1e-6) < 1e-6);
  }
}

TEST_CASE("slice_cols forward and backward") {
  Tape t;
  int a = t.leaf(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  int s = t.slice_cols(a, 1, 3);
  CHECK(t.val(s).v == std::vector<double>{2, 3, 5, 6});
  int y = t.sum(s);
  t.backward(y);
  CHECK(t.grad(a) == std::vector<double>{0, 1, 1, 0, 1, 1});
}
