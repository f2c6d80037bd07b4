#include <functional>

#include "cslt/autograd.hpp"
#include "doctest.h"

using namespace cslt;
using Var64 = Var<double>;
using Mat64 = Mat<double>;

namespace {

Mat64 random_mat(Rng& rng, int r, int c, double scale = 1.0) {
  Mat64 m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.gaussian() * scale;
  return m;
}

// Central finite differences against the analytic gradient of a scalar graph.
void check_grad(std::vector<Var64*> leaves, const std::function<Var64()>& build,
                double tol = 1e-6) {
  for (auto* l : leaves) l->zero_grad();
  auto loss = build();
  loss.backward();
  std::vector<Mat64> analytic;
  for (auto* l : leaves) analytic.push_back(l->grad());

  const double h = 1e-6;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& value = leaves[li]->val();
    for (int i = 0; i < value.rows(); ++i)
      for (int j = 0; j < value.cols(); ++j) {
        double keep = value(i, j);
        value(i, j) = keep + h;
        double up = build().val()(0, 0);
        value(i, j) = keep - h;
        double down = build().val()(0, 0);
        value(i, j) = keep;
        double fd = (up - down) / (2 * h);
        double a = analytic[li](i, j);
        double denom = std::max({std::abs(fd), std::abs(a), 1e-8});
        INFO("leaf=", li, " entry=(", i, ",", j, ") fd=", fd, " analytic=", a);
        REQUIRE(std::abs(fd - a) / denom < tol);
      }
  }
}

// Reduce any matrix to a scalar through fixed random projections so gradients
// reach every entry.
Var64 to_scalar(const Var64& m, const Mat64& left, const Mat64& right) {
  auto l = Var64::constant(left);
  auto r = Var64::constant(right);
  return matmul(matmul(l, m), r);
}

}  // namespace

TEST_CASE("autograd: matmul, add, bias, scale") {
  Rng rng(1);
  auto a = Var64::leaf(random_mat(rng, 3, 4));
  auto b = Var64::leaf(random_mat(rng, 4, 5));
  auto c = Var64::leaf(random_mat(rng, 3, 5));
  auto bias = Var64::leaf(random_mat(rng, 1, 5));
  Mat64 l = random_mat(rng, 1, 3), r = random_mat(rng, 5, 1);

  check_grad({&a, &b, &c, &bias}, [&] {
    auto y = add(matmul(a, b), c);
    y = add_rowvec(y, bias);
    y = scale(y, 1.7);
    return to_scalar(y, l, r);
  });
}

TEST_CASE("autograd: relu and gelu") {
  Rng rng(2);
  auto a = Var64::leaf(random_mat(rng, 4, 6));
  Mat64 l = random_mat(rng, 1, 4), r = random_mat(rng, 6, 1);
  check_grad({&a}, [&] { return to_scalar(relu(a), l, r); }, 1e-5);
  check_grad({&a}, [&] { return to_scalar(gelu(a), l, r); }, 1e-5);
}

TEST_CASE("autograd: layernorm") {
  Rng rng(3);
  auto a = Var64::leaf(random_mat(rng, 5, 7));
  auto gamma = Var64::leaf(random_mat(rng, 1, 7, 0.5));
  auto beta = Var64::leaf(random_mat(rng, 1, 7, 0.5));
  Mat64 l = random_mat(rng, 1, 5), r = random_mat(rng, 7, 1);
  check_grad({&a, &gamma, &beta},
             [&] { return to_scalar(layernorm(a, gamma, beta), l, r); }, 1e-5);
}

TEST_CASE("autograd: causal softmax masks the future") {
  Rng rng(4);
  auto scores = Var64::leaf(random_mat(rng, 5, 5));
  auto p = causal_softmax(scores, 0);
  for (int i = 0; i < 5; ++i) {
    double row_sum = p.val().row(i).sum();
    CHECK(row_sum == doctest::Approx(1.0));
    for (int j = i + 1; j < 5; ++j) CHECK(p.val()(i, j) == 0.0);
  }

  Mat64 l = random_mat(rng, 1, 5), r = random_mat(rng, 5, 1);
  check_grad({&scores}, [&] { return to_scalar(causal_softmax(scores, 0), l, r); }, 1e-5);

  // offset form used by incremental decoding: 2 queries against 6 keys
  auto s2 = Var64::leaf(random_mat(rng, 2, 6));
  CHECK(causal_softmax(s2, 4).val()(0, 5) == 0.0);
  CHECK(causal_softmax(s2, 4).val()(1, 5) > 0.0);
  Mat64 l2 = random_mat(rng, 1, 2), r2 = random_mat(rng, 6, 1);
  check_grad({&s2}, [&] { return to_scalar(causal_softmax(s2, 4), l2, r2); }, 1e-5);
}

TEST_CASE("autograd: slicing and concatenation") {
  Rng rng(5);
  auto a = Var64::leaf(random_mat(rng, 3, 8));
  auto b = Var64::leaf(random_mat(rng, 2, 8));
  Mat64 l = random_mat(rng, 1, 5), r = random_mat(rng, 8, 1);
  check_grad({&a, &b}, [&] {
    auto joined = concat_rows<double>({a, b});
    return to_scalar(joined, l, r);
  });

  Mat64 l2 = random_mat(rng, 1, 3), r2 = random_mat(rng, 4, 1);
  check_grad({&a}, [&] { return to_scalar(cols(a, 2, 4), l2, r2); });

  Mat64 l3 = random_mat(rng, 1, 3), r3 = random_mat(rng, 8, 1);
  check_grad({&a}, [&] {
    auto h1 = cols(a, 0, 4);
    auto h2 = cols(a, 4, 4);
    return to_scalar(concat_cols<double>({h2, h1}), l3, r3);
  });

  check_grad({&a}, [&] { return to_scalar(transpose(transpose(a)), l3, r3); });
}

TEST_CASE("autograd: gather_rows accumulates repeated indices") {
  Rng rng(6);
  auto table = Var64::leaf(random_mat(rng, 6, 4));
  std::vector<int> idx = {2, 0, 2, 5};
  Mat64 l = random_mat(rng, 1, 4), r = random_mat(rng, 4, 1);
  check_grad({&table}, [&] { return to_scalar(gather_rows(table, idx), l, r); });
}

TEST_CASE("autograd: im2col and maxpool over time") {
  Rng rng(7);
  auto a = Var64::leaf(random_mat(rng, 7, 3));
  Mat64 l = random_mat(rng, 1, 7), r = random_mat(rng, 15, 1);
  check_grad({&a}, [&] { return to_scalar(im2col_rows(a, 5, 2), l, r); });

  Mat64 lp = random_mat(rng, 1, 3), rp = random_mat(rng, 3, 1);
  check_grad({&a}, [&] { return to_scalar(maxpool_rows(a, 2, 2), lp, rp); }, 1e-5);
  CHECK(maxpool_rows(a, 2, 2).val().rows() == 3);  // floor(7/2)
}

TEST_CASE("autograd: masked cross entropy") {
  Rng rng(8);
  auto logits = Var64::leaf(random_mat(rng, 4, 9));
  std::vector<int> targets = {3, 1, 0, 7};
  std::vector<char> mask = {0, 1, 1, 1};
  check_grad({&logits}, [&] { return cross_entropy_masked(logits, targets, mask); }, 1e-5);

  // uniform logits give ln(V)
  auto flat = Var64::leaf(Mat64::Zero(2, 128000));
  std::vector<int> t2 = {5, 77};
  std::vector<char> m2 = {1, 1};
  auto loss = cross_entropy_masked(flat, t2, m2);
  CHECK(loss.val()(0, 0) == doctest::Approx(std::log(128000.0)).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy_masked(logits, targets, std::vector<char>{0, 0, 0, 0}),
                  DataError);
}

TEST_CASE("autograd: masked positions do not affect the loss") {
  Rng rng(9);
  auto logits = Var64::leaf(random_mat(rng, 4, 9));
  std::vector<int> targets = {3, 1, 0, 7};
  std::vector<char> mask = {0, 1, 1, 1};
  double before = cross_entropy_masked(logits, targets, mask).val()(0, 0);
  auto perturbed = targets;
  perturbed[0] = 8;  // masked position
  double after = cross_entropy_masked(logits, perturbed, mask).val()(0, 0);
  CHECK(before == after);
}

TEST_CASE("autograd: bf16 cast rounds values and passes gradients through") {
  float x = 1.00048828125f;  // not representable in bf16
  float rounded = bf16_round(x);
  CHECK(rounded != x);
  CHECK(std::abs(rounded - x) < 0.01f);
  CHECK(bf16_round(1.0f) == 1.0f);
  CHECK(bf16_round(-2.5f) == -2.5f);

  Rng rng(10);
  auto a = Var64::leaf(random_mat(rng, 2, 3));
  auto y = bf16_cast(a);
  Mat64 l = random_mat(rng, 1, 2), r = random_mat(rng, 3, 1);
  auto loss = to_scalar(y, l, r);
  loss.backward();
  // straight-through: gradient equals the projection outer product
  Mat64 expected = l.transpose() * r.transpose();
  CHECK((a.grad() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("autograd: composite MLP block end to end") {
  Rng rng(11);
  auto x = Var64::constant(random_mat(rng, 3, 4));
  auto w1 = Var64::leaf(random_mat(rng, 4, 6, 0.5));
  auto b1 = Var64::leaf(random_mat(rng, 1, 6, 0.1));
  auto w2 = Var64::leaf(random_mat(rng, 6, 5, 0.5));
  auto b2 = Var64::leaf(random_mat(rng, 1, 5, 0.1));
  auto gamma = Var64::leaf(Mat64::Ones(1, 5));
  auto beta = Var64::leaf(Mat64::Zero(1, 5));
  std::vector<int> targets = {2, 0, 4};
  std::vector<char> mask = {1, 0, 1};

  check_grad({&w1, &b1, &w2, &b2, &gamma, &beta}, [&] {
    auto h = gelu(add_rowvec(matmul(x, w1), b1));
    auto y = add_rowvec(matmul(h, w2), b2);
    y = layernorm(y, gamma, beta);
    return cross_entropy_masked(y, targets, mask);
  }, 1e-5);
}
