#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "clnet/io_util.hpp"
#include "clnet/pipeline.hpp"

using namespace clnet;

namespace {

TensorF random_sample(int na, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  TensorF t({2, na, na});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

}  // namespace

TEST_CASE("encode honors the codeword length contract") {
  auto model = assemble_clnet<float>(EtaRatio{1, 4}, 32, 32);
  std::mt19937_64 rng(1);
  auto ha = random_sample(32, rng);
  auto cw = encode(ha, *model);
  CHECK(cw.v.size() == 512);
  CHECK(cw.model_id == "clnet");

  auto again = encode(ha, *model);
  CHECK(std::equal(cw.v.begin(), cw.v.end(), again.v.begin()));

  CHECK_THROWS_AS(encode(TensorF({2, 16, 16}), *model), ShapeError);
}

TEST_CASE("distinct inputs produce distinct codewords") {
  ModelInfo info;
  info.na = 16;
  info.c = 8;
  info.cprime = 4;
  auto model = assemble<float>(info);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    auto a = random_sample(16, rng);
    auto b = random_sample(16, rng);
    auto ca = encode(a, *model);
    auto cb = encode(b, *model);
    CHECK_FALSE(std::equal(ca.v.begin(), ca.v.end(), cb.v.begin()));
  }
}

TEST_CASE("decode returns a unit-interval estimate and matches the composite") {
  ModelInfo info;
  info.na = 16;
  info.c = 8;
  info.cprime = 4;
  auto model = assemble<float>(info);
  std::mt19937_64 rng(3);
  auto ha = random_sample(16, rng);
  auto cw = encode(ha, *model);
  auto est = decode(cw, *model);
  CHECK(est.shape() == std::vector<int>{2, 16, 16});
  for (std::size_t i = 0; i < est.size(); ++i) {
    CHECK(est[i] >= 0.0f);
    CHECK(est[i] <= 1.0f);
  }

  auto composite = model->forward_batch(ha.reshaped({1, 2, 16, 16}));
  for (std::size_t i = 0; i < est.size(); ++i) CHECK(est[i] == composite[i]);

  Codeword bad = cw;
  bad.v.resize(16);
  CHECK_THROWS_AS(decode(bad, *model), ShapeError);
}

TEST_CASE("an untrained model tracks the constant-half predictor") {
  ModelInfo info;
  info.na = 16;
  info.c = 8;
  info.cprime = 4;
  info.seed = 5;
  auto model = assemble<float>(info);
  std::mt19937_64 rng(4);
  std::vector<double> model_ratios, half_ratios;
  for (int i = 0; i < 100; ++i) {
    auto ha = random_sample(16, rng);
    auto est = decode(encode(ha, *model), *model);
    auto half = TensorF::full({2, 16, 16}, 0.5f);
    model_ratios.push_back(nmse(ha, est).linear);
    half_ratios.push_back(nmse(ha, half).linear);
  }
  const double m = aggregate_nmse(model_ratios).linear;
  const double h = aggregate_nmse(half_ratios).linear;
  CHECK(m < 2.0 * h);
  CHECK(m > 0.5 * h);
}

TEST_CASE("nmse oracle values") {
  std::mt19937_64 rng(5);
  auto h = random_sample(8, rng);

  CHECK(nmse(h, h).linear == doctest::Approx(0.0));
  CHECK(nmse(h, h).db == doctest::Approx(kNmseDbFloor));

  auto zero = TensorF({2, 8, 8});
  CHECK(nmse(h, zero).linear == doctest::Approx(1.0));
  CHECK(nmse(h, zero).db == doctest::Approx(0.0).epsilon(1e-9));

  auto half = h;
  for (std::size_t i = 0; i < half.size(); ++i) half[i] *= 0.5f;
  auto r = nmse(h, half);
  CHECK(r.linear == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(r.db == doctest::Approx(-6.0206).epsilon(0.002));

  CHECK_THROWS_AS(nmse(zero, h), std::invalid_argument);
  CHECK_THROWS_AS(nmse(h, TensorF({2, 4, 4})), ShapeError);
}

TEST_CASE("nmse scale law holds for random scalings") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> alpha_d(-1.5f, 1.5f);
  for (int i = 0; i < 50; ++i) {
    auto h = random_sample(8, rng);
    const float alpha = alpha_d(rng);
    auto scaled = h;
    for (std::size_t k = 0; k < scaled.size(); ++k) scaled[k] *= alpha;
    const double want = (1.0 - alpha) * (1.0 - alpha);
    CHECK(nmse(h, scaled).linear == doctest::Approx(want).epsilon(1e-4));
  }
}

TEST_CASE("nmse is invariant to a shared permutation of entries") {
  std::mt19937_64 rng(7);
  auto truth = random_sample(8, rng);
  auto est = random_sample(8, rng);
  const auto base = nmse(truth, est).linear;

  std::vector<std::size_t> perm(truth.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  TensorF pt({2, 8, 8}), pe({2, 8, 8});
  for (std::size_t i = 0; i < perm.size(); ++i) {
    pt[i] = truth[perm[i]];
    pe[i] = est[perm[i]];
  }
  CHECK(nmse(pt, pe).linear == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("codeword files round-trip bit-exactly") {
  ModelInfo info;
  info.na = 16;
  info.c = 8;
  info.cprime = 4;
  info.eta = EtaRatio{1, 8};
  auto model = assemble<float>(info);
  std::mt19937_64 rng(8);
  std::vector<Codeword> cws;
  for (int i = 0; i < 5; ++i) cws.push_back(encode(random_sample(16, rng), *model));

  const auto path = (std::filesystem::temp_directory_path() / "clnet_codewords.bin").string();
  write_codewords(path, cws, 16);
  auto back = read_codewords(path);
  REQUIRE(back.size() == cws.size());
  for (std::size_t i = 0; i < cws.size(); ++i) {
    CHECK(back[i].model_id == cws[i].model_id);
    CHECK(back[i].eta == cws[i].eta);
    REQUIRE(back[i].v.size() == cws[i].v.size());
    for (std::size_t k = 0; k < cws[i].v.size(); ++k) CHECK(back[i].v[k] == cws[i].v[k]);
  }

  // Declared eta disagreeing with the vector length is rejected at write.
  auto wrong = cws;
  wrong[2].v.resize(10);
  CHECK_THROWS_AS(write_codewords(path, wrong, 16), std::invalid_argument);

  // Distinct read-side diagnostics.
  write_file(path, "");
  CHECK_THROWS_AS(read_codewords(path), MalformedHeader);
  write_codewords(path, cws, 16);
  std::string bytes = read_file(path);
  bytes[bytes.find('\n') + 3] ^= 0x11;
  write_file(path, bytes);
  CHECK_THROWS_AS(read_codewords(path), ChecksumMismatch);
  std::filesystem::remove(path);
}

TEST_CASE("evaluate reports the mean of per-sample ratios") {
  MultipathSpec spec = MultipathSpec::indoor();
  spec.nc = 64;
  spec.nt = 16;
  spec.na = 16;
  spec.seed = 10;
  auto data = generate_dataset(spec, 30, "indoor");
  ModelInfo info;
  info.na = 16;
  info.c = 8;
  info.cprime = 4;
  auto model = assemble<float>(info);

  auto rep = evaluate(*model, data, "test");
  CHECK(rep.count == data.hdr.n_test);
  CHECK(static_cast<int>(rep.per_sample_linear.size()) == rep.count);
  double s = 0.0;
  for (double v : rep.per_sample_linear) s += v;
  CHECK(rep.linear == doctest::Approx(s / rep.count).epsilon(1e-12));

  CHECK_THROWS_AS(evaluate(*model, data, "nope"), std::invalid_argument);
}
