#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "clnet/blocks.hpp"
#include "clnet/flops.hpp"
#include "oracles.hpp"

using namespace clnet;

namespace {

// Test-side recount: independent per-kind formulas walked over the graph.
std::int64_t walker_total_flops(const std::vector<LayerDesc>& layers) {
  std::int64_t total = 0;
  for (const auto& d : layers) {
    std::int64_t n = 1;
    for (int e : d.out_shape) n *= e;
    switch (d.kind) {
      case LayerKind::Conv: {
        std::int64_t hw = 1;
        for (std::size_t i = 1; i < d.out_shape.size(); ++i) hw *= d.out_shape[i];
        total += 2LL * d.cout * d.cin * d.kh * d.kw * hw;
        break;
      }
      case LayerKind::Dense:
        total += 2LL * d.din * d.dout;
        break;
      case LayerKind::GlobalAvgPool:
      case LayerKind::ChannelAvgPool:
      case LayerKind::ChannelMaxPool:
        total += d.in_elems;
        break;
      case LayerKind::Activation:
        total += d.act == Act::Sigmoid ? 4 * n : (d.act == Act::HardSigmoid ? 3 * n : n);
        break;
      case LayerKind::Scale:
      case LayerKind::Add:
        total += n;
        break;
      default:
        break;
    }
  }
  return total;
}

FlopReport report_for(const std::string& arch, EtaRatio eta) {
  ModelInfo info;
  info.arch = arch;
  info.eta = eta;
  info.c = arch == "crnet-base" ? 2 : 32;
  auto model = assemble<float>(info);
  return audit_layers(arch, eta, model->layers());
}

}  // namespace

TEST_CASE("count_layer pins the stated convention") {
  LayerDesc dense{.name = "fc", .kind = LayerKind::Dense, .out_shape = {512}, .din = 2048,
                  .dout = 512, .bias = true};
  auto row = count_layer(dense);
  CHECK(row.macs == 1048576);
  CHECK(row.flops == 2097152);
  CHECK(row.params == 2048 * 512 + 512);

  LayerDesc conv{.name = "pw", .kind = LayerKind::Conv, .out_shape = {32, 32, 32}, .cin = 2,
                 .cout = 32, .kh = 1, .kw = 1, .bias = true};
  auto crow = count_layer(conv);
  CHECK(crow.macs == 65536);
  CHECK(crow.flops == 131072);

  LayerDesc unshaped{.name = "broken", .kind = LayerKind::Conv, .out_shape = {4, 4, 4}};
  CHECK_THROWS_AS(count_layer(unshaped), std::invalid_argument);
}

TEST_CASE("activation costs follow the per-element convention") {
  LayerDesc relu{.name = "r", .kind = LayerKind::Activation, .act = Act::Relu, .out_shape = {10}};
  CHECK(count_layer(relu).flops == 10);
  LayerDesc hs{.name = "h", .kind = LayerKind::Activation, .act = Act::HardSigmoid,
               .out_shape = {10}};
  CHECK(count_layer(hs).flops == 30);
  CHECK(count_layer(hs).transcendentals == 0);
  LayerDesc sg{.name = "s", .kind = LayerKind::Activation, .act = Act::Sigmoid, .out_shape = {10}};
  CHECK(count_layer(sg).flops == 40);
  CHECK(count_layer(sg).transcendentals == 10);
}

TEST_CASE("report totals equal the sum of rows") {
  auto rep = report_for("clnet", EtaRatio{1, 4});
  std::int64_t flops = 0, macs = 0, params = 0, tr = 0;
  for (const auto& r : rep.rows) {
    flops += r.flops;
    macs += r.macs;
    params += r.params;
    tr += r.transcendentals;
  }
  CHECK(rep.total_flops == flops);
  CHECK(rep.total_macs == macs);
  CHECK(rep.total_params == params);
  CHECK(rep.total_transcendentals == tr);

  // Parameter audit agrees with the live model.
  auto model = assemble_clnet<float>(EtaRatio{1, 4});
  CHECK(model->param_count() == rep.total_params);
}

TEST_CASE("full audit equals an independent graph-walking recount") {
  for (const char* arch : {"clnet", "crnet-base"}) {
    auto rep = report_for(arch, EtaRatio{1, 4});
    ModelInfo info;
    info.arch = arch;
    info.c = std::string(arch) == "crnet-base" ? 2 : 32;
    auto model = assemble<float>(info);
    CHECK(rep.total_flops == walker_total_flops(model->layers()));
  }
}

TEST_CASE("analytic MAC counts equal instrumented multiply counters") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  auto rand_t = [&](std::vector<int> shape) {
    TensorF t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(rng);
    return t;
  };
  {
    auto x = rand_t({3, 6, 5});
    auto w = rand_t({4, 3, 3, 3});
    auto b = rand_t({4});
    std::int64_t mults = 0;
    oracle::conv2d(x, w, b, 1, 1, &mults);
    LayerDesc desc{.name = "c", .kind = LayerKind::Conv, .out_shape = {4, 6, 5}, .cin = 3,
                   .cout = 4, .kh = 3, .kw = 3, .bias = true};
    CHECK(count_layer(desc).macs == mults);
  }
  {
    auto x = rand_t({24});
    auto w = rand_t({7, 24});
    auto b = rand_t({7});
    std::int64_t mults = 0;
    oracle::matvec(x, w, b, &mults);
    LayerDesc desc{.name = "d", .kind = LayerKind::Dense, .out_shape = {7}, .din = 24, .dout = 7,
                   .bias = true};
    CHECK(count_layer(desc).macs == mults);
  }
}

TEST_CASE("flop comparison basics") {
  auto a = report_for("clnet", EtaRatio{1, 4});
  CHECK(flop_reduction(a, a) == doctest::Approx(0.0));

  auto doubled = a;
  doubled.total_flops *= 2;
  CHECK(flop_reduction(a, doubled) == doctest::Approx(0.5));

  auto other = report_for("clnet", EtaRatio{1, 8});
  CHECK_THROWS_AS(flop_reduction(a, other), std::invalid_argument);
}

TEST_CASE("lite model undercuts the baseline at every ratio, and more so as eta shrinks") {
  double prev = -1.0;
  double sum = 0.0;
  for (int den : {4, 8, 16, 32, 64}) {
    auto lite = report_for("clnet", EtaRatio{1, den});
    auto base = report_for("crnet-base", EtaRatio{1, den});
    CHECK(base.total_flops > lite.total_flops);
    const double red = flop_reduction(lite, base);
    CHECK(red > prev);
    prev = red;
    sum += red;
  }
  const double avg = sum / 5.0;
  CHECK(avg > 0.15);
  CHECK(avg < 0.35);
}

TEST_CASE("total flops grow with eta for both architectures") {
  for (const char* arch : {"clnet", "crnet-base"}) {
    std::int64_t prev = 0;
    for (int den : {64, 32, 16, 8, 4}) {
      auto rep = report_for(arch, EtaRatio{1, den});
      CHECK(rep.total_flops > prev);
      prev = rep.total_flops;
    }
  }
}

TEST_CASE("transcendental census") {
  {
    // All-hard gates and a hard output: nothing transcendental.
    std::vector<LayerDesc> layers{
        {.name = "g1", .kind = LayerKind::Activation, .act = Act::HardSigmoid, .out_shape = {32}},
        {.name = "g2", .kind = LayerKind::Activation, .act = Act::HardSigmoid,
         .out_shape = {1, 32, 32}},
        {.name = "out", .kind = LayerKind::Activation, .act = Act::HardSigmoid,
         .out_shape = {2, 32, 32}},
    };
    CHECK(transcendental_census(layers) == 0);
  }
  {
    // Stock configuration: hard gates, sigmoid output -> 2 * Na^2 per pass.
    auto model = assemble_clnet<float>(EtaRatio{1, 4});
    CHECK(transcendental_census(model->layers()) == 2 * 32 * 32);
  }
  {
    // Sigmoid-gated variant exceeds the hard-gated one at every eta.
    for (int den : {4, 8, 16, 32, 64}) {
      auto hard = assemble_clnet<float>(EtaRatio{1, den}, 32, 32, Gate::HardSigmoid);
      auto soft = assemble_clnet<float>(EtaRatio{1, den}, 32, 32, Gate::Sigmoid);
      CHECK(transcendental_census(soft->layers()) > transcendental_census(hard->layers()));
    }
  }
}

TEST_CASE("csv and summary render every row") {
  auto rep = report_for("clnet", EtaRatio{1, 16});
  const auto csv = report_csv(rep);
  CHECK(csv.find("encoder.input") != std::string::npos);
  CHECK(csv.find("decoder.sigmoid") != std::string::npos);
  CHECK(csv.find("TOTAL") != std::string::npos);
  const auto sum = report_summary(rep);
  CHECK(sum.find("eta=1/16") != std::string::npos);
}
