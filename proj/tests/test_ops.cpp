#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "clnet/ops.hpp"
#include "oracles.hpp"

using namespace clnet;

namespace {

TensorF random_tensor(std::vector<int> shape, std::mt19937_64& rng, float lo = -1.0f,
                      float hi = 1.0f) {
  std::uniform_real_distribution<float> d(lo, hi);
  TensorF t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

template <typename S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template <typename S>
bool bit_equal(const Tensor<S>& a, const Tensor<S>& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("conv2d single multiply-add") {
  TensorF x({1, 1, 1}, {2.0f});
  TensorF w({1, 1, 1, 1}, {3.0f});
  TensorF b({1}, {1.0f});
  auto y = conv2d(x, w, b, Pad{0, 0});
  CHECK(y.shape() == std::vector<int>{1, 1, 1});
  CHECK(y[0] == doctest::Approx(7.0f));
}

TEST_CASE("conv2d zero kernels give zero output of the contracted shape") {
  std::mt19937_64 rng(7);
  auto x = random_tensor({3, 5, 6}, rng);
  TensorF w({4, 3, 3, 3});
  TensorF b({4});
  auto y = conv2d(x, w, b, Pad{1, 1});
  CHECK(y.shape() == std::vector<int>{4, 5, 6});
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0f);
}

TEST_CASE("conv2d matches the naive six-loop reference") {
  std::mt19937_64 rng(11);
  auto x = random_tensor({2, 4, 4}, rng);
  auto w = random_tensor({3, 2, 3, 3}, rng);
  auto b = random_tensor({3}, rng);
  auto got = conv2d(x, w, b, Pad{1, 1});
  auto want = oracle::conv2d(x, w, b, 1, 1);
  CHECK(max_abs_diff(got, want) < 1e-6);
}

TEST_CASE("conv2d rejects channel mismatch with a shape diagnostic") {
  TensorF x({2, 4, 4});
  TensorF w({3, 5, 3, 3});
  TensorF b({3});
  CHECK_THROWS_AS(conv2d(x, w, b, Pad{1, 1}), ShapeError);
  CHECK_THROWS_AS(conv2d(x, TensorF({3, 2, 2, 2}), TensorF({3}), Pad{0, 0}), ShapeError);  // even kernel
  CHECK_THROWS_AS(conv2d(x, TensorF({3, 2, 3, 3}), TensorF({7}), Pad{1, 1}), ShapeError);  // bad bias
}

TEST_CASE("conv2d is deterministic and linear in its input") {
  std::mt19937_64 rng(13);
  auto wf = random_tensor({3, 2, 3, 3}, rng);
  auto x1f = random_tensor({2, 6, 6}, rng);
  auto a = conv2d(x1f, wf, TensorF({3}), Pad{1, 1});
  auto b = conv2d(x1f, wf, TensorF({3}), Pad{1, 1});
  CHECK(bit_equal(a, b));

  // Linearity is a property of the operator; verified in 64-bit mode.
  auto w = wf.cast<double>();
  TensorD zero_bias({3});
  auto x1 = x1f.cast<double>();
  auto x2 = random_tensor({2, 6, 6}, rng).cast<double>();

  TensorD sum({2, 6, 6});
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = x1[i] + x2[i];
  auto y_sum = conv2d(sum, w, zero_bias, Pad{1, 1});
  auto y1 = conv2d(x1, w, zero_bias, Pad{1, 1});
  auto y2 = conv2d(x2, w, zero_bias, Pad{1, 1});
  for (std::size_t i = 0; i < y_sum.size(); ++i) {
    CHECK(std::abs(y_sum[i] - (y1[i] + y2[i])) < 1e-6);
  }

  TensorD scaled({2, 6, 6});
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = 2.5 * x1[i];
  auto y_scaled = conv2d(scaled, w, zero_bias, Pad{1, 1});
  for (std::size_t i = 0; i < y_scaled.size(); ++i) {
    CHECK(std::abs(y_scaled[i] - 2.5 * y1[i]) < 1e-6);
  }
}

TEST_CASE("pointwise_conv mixes channels per location") {
  TensorF x({2, 1, 1}, {1.0f, 2.0f});
  TensorF w({1, 2, 1, 1}, {0.5f, 0.25f});
  TensorF b({1});
  auto y = pointwise_conv(x, w, b);
  CHECK(y.shape() == std::vector<int>{1, 1, 1});
  CHECK(y[0] == doctest::Approx(1.0f));
}

TEST_CASE("pointwise_conv with an identity kernel is the identity") {
  std::mt19937_64 rng(17);
  auto x = random_tensor({3, 4, 5}, rng);
  TensorF w({3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) w.at(c, c, 0, 0) = 1.0f;
  TensorF b({3});
  auto y = pointwise_conv(x, w, b);
  CHECK(bit_equal(x, y));
}

TEST_CASE("pointwise_conv rejects a spatial kernel") {
  CHECK_THROWS_AS(pointwise_conv(TensorF({2, 4, 4}), TensorF({3, 2, 3, 3}), TensorF({3})),
                  ShapeError);
}

TEST_CASE("pointwise_conv is strictly location-local") {
  std::mt19937_64 rng(19);
  auto x = random_tensor({2, 8, 8}, rng);
  auto w = random_tensor({4, 2, 1, 1}, rng);
  auto b = random_tensor({4}, rng);
  auto base = pointwise_conv(x, w, b);
  for (int mi = 0; mi < 8; ++mi) {
    for (int ni = 0; ni < 8; ++ni) {
      auto pert = x;
      pert.at(0, mi, ni) += 1.0f;
      auto y = pointwise_conv(pert, w, b);
      for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 8; ++i) {
          for (int j = 0; j < 8; ++j) {
            if (i == mi && j == ni) continue;
            CHECK(y.at(c, i, j) == base.at(c, i, j));
          }
        }
      }
    }
  }
}

TEST_CASE("fully_connected basics") {
  {
    TensorF x({2}, {1.0f, 1.0f});
    TensorF w({1, 2}, {1.0f, -1.0f});
    TensorF b({1});
    auto y = fully_connected(x, w, b);
    CHECK(y[0] == doctest::Approx(0.0f));
  }
  {
    std::mt19937_64 rng(23);
    auto x = random_tensor({5}, rng);
    TensorF w({5, 5});
    for (int i = 0; i < 5; ++i) w.at(i, i) = 1.0f;
    auto y = fully_connected(x, w, TensorF({5}));
    CHECK(bit_equal(x, y));
  }
}

TEST_CASE("fully_connected matches the naive matvec oracle") {
  std::mt19937_64 rng(29);
  auto x = random_tensor({8}, rng);
  auto w = random_tensor({4, 8}, rng);
  auto b = random_tensor({4}, rng);
  auto got = fully_connected(x, w, b);
  auto want = oracle::matvec(x, w, b);
  CHECK(max_abs_diff(got, want) < 1e-6);
  CHECK_THROWS_AS(fully_connected(random_tensor({7}, rng), w, b), ShapeError);
}

TEST_CASE("global_avg_pool") {
  auto c7 = TensorF::full({3, 4, 4}, 7.0f);
  auto z = global_avg_pool(c7);
  for (int i = 0; i < 3; ++i) CHECK(z[static_cast<std::size_t>(i)] == doctest::Approx(7.0f));

  TensorF q({1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  CHECK(global_avg_pool(q)[0] == doctest::Approx(2.5f));

  std::mt19937_64 rng(31);
  auto x = random_tensor({4, 32, 32}, rng);
  CHECK(max_abs_diff(global_avg_pool(x), oracle::global_avg_pool(x)) < 1e-6);
}

TEST_CASE("channel_pool avg and max") {
  {
    std::mt19937_64 rng(37);
    auto plane = random_tensor({1, 3, 3}, rng);
    TensorF x({2, 3, 3});
    for (int i = 0; i < 9; ++i) {
      x[static_cast<std::size_t>(i)] = plane[static_cast<std::size_t>(i)];
      x[9 + static_cast<std::size_t>(i)] = plane[static_cast<std::size_t>(i)];
    }
    auto avg = channel_pool(x, PoolMode::Avg);
    auto mx = channel_pool(x, PoolMode::Max);
    CHECK(max_abs_diff(avg, plane) < 1e-7);
    CHECK(bit_equal(mx, plane));
  }
  {
    TensorF x({2, 1, 1}, {1.0f, -1.0f});
    CHECK(channel_pool(x, PoolMode::Avg)[0] == doctest::Approx(0.0f));
    CHECK(channel_pool(x, PoolMode::Max)[0] == doctest::Approx(1.0f));
  }
  {
    std::mt19937_64 rng(41);
    auto x = random_tensor({8, 16, 16}, rng);
    CHECK(max_abs_diff(channel_pool(x, PoolMode::Avg), oracle::channel_pool(x, false)) < 1e-6);
    CHECK(max_abs_diff(channel_pool(x, PoolMode::Max), oracle::channel_pool(x, true)) < 1e-6);
  }
}

TEST_CASE("activation pins") {
  CHECK(hard_sigmoid(0.0f) == 0.5f);
  CHECK(hard_sigmoid(3.0f) == 1.0f);
  CHECK(hard_sigmoid(-3.0f) == 0.0f);
  CHECK(hard_sigmoid(-10.0f) == 0.0f);
  CHECK(hard_sigmoid(10.0f) == 1.0f);
  CHECK(sigmoid(0.0f) == 0.5f);
  TensorF x({2}, {-1.0f, 2.0f});
  auto y = activations(x, Act::Relu);
  CHECK(y[0] == 0.0f);
  CHECK(y[1] == 2.0f);
}

TEST_CASE("elementwise_scale_broadcast") {
  std::mt19937_64 rng(43);
  auto x = random_tensor({3, 4, 4}, rng);

  auto ones = elementwise_scale_broadcast(x, TensorF::full({3}, 1.0f));
  CHECK(bit_equal(ones, x));
  auto zeros = elementwise_scale_broadcast(x, TensorF({1, 4, 4}));
  for (std::size_t i = 0; i < zeros.size(); ++i) CHECK(zeros[i] == 0.0f);

  auto sc = random_tensor({3}, rng);
  CHECK(max_abs_diff(elementwise_scale_broadcast(x, sc), oracle::scale_broadcast(x, sc)) < 1e-6);
  auto sp = random_tensor({1, 4, 4}, rng);
  CHECK(max_abs_diff(elementwise_scale_broadcast(x, sp), oracle::scale_broadcast(x, sp)) < 1e-6);

  CHECK_THROWS_AS(elementwise_scale_broadcast(x, TensorF({4})), ShapeError);
  CHECK_THROWS_AS(elementwise_scale_broadcast(x, TensorF({2, 4, 4})), ShapeError);
}

TEST_CASE("mse_loss") {
  std::mt19937_64 rng(47);
  auto a = random_tensor({4, 5}, rng);
  CHECK(mse_loss(a, a) == 0.0f);

  auto b = a;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += 1.0f;
  CHECK(mse_loss(a, b) == doctest::Approx(1.0f));

  auto c = random_tensor({4, 5}, rng);
  CHECK(std::abs(static_cast<double>(mse_loss(a, c)) - oracle::mse(a, c)) < 1e-6);
  CHECK_THROWS_AS(mse_loss(a, TensorF({5, 4})), ShapeError);
}

TEST_CASE("batched kernels agree bit-for-bit with per-sample calls") {
  std::mt19937_64 rng(53);
  const int B = 3;
  auto w = random_tensor({4, 2, 3, 3}, rng);
  auto b = random_tensor({4}, rng);
  TensorF batch({B, 2, 6, 6});
  std::vector<TensorF> singles;
  for (int i = 0; i < B; ++i) {
    auto s = random_tensor({2, 6, 6}, rng);
    std::copy(s.data(), s.data() + s.size(), batch.data() + static_cast<std::size_t>(i) * s.size());
    singles.push_back(std::move(s));
  }
  auto yb = detail::conv2d_batched(batch, w, &b, Pad{1, 1});
  for (int i = 0; i < B; ++i) {
    auto ys = conv2d(singles[static_cast<std::size_t>(i)], w, b, Pad{1, 1});
    for (std::size_t k = 0; k < ys.size(); ++k) {
      CHECK(yb[static_cast<std::size_t>(i) * ys.size() + k] == ys[k]);
    }
  }

  auto dw = random_tensor({7, 2 * 6 * 6}, rng);
  auto db = random_tensor({7}, rng);
  auto flat = batch.reshaped({B, 2 * 6 * 6});
  auto fb = detail::dense_batched(flat, dw, &db);
  for (int i = 0; i < B; ++i) {
    TensorF xi({2 * 6 * 6});
    std::copy(flat.data() + static_cast<std::size_t>(i) * xi.size(),
              flat.data() + static_cast<std::size_t>(i + 1) * xi.size(), xi.data());
    auto yi = fully_connected(xi, dw, db);
    for (std::size_t k = 0; k < yi.size(); ++k) {
      CHECK(fb[static_cast<std::size_t>(i) * yi.size() + k] == yi[k]);
    }
  }
}
