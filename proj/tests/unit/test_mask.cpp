#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "modviz/common/errors.hpp"
#include "modviz/explain/mask.hpp"
#include "support.hpp"

using namespace modviz;
using namespace modviz::explain;
using grad::Tensor;

namespace {

models::ModelSpec small_lenet(std::size_t n_x) {
  auto s = models::build_lenet(n_x, 4);
  s.lenet.conv1 = 6;
  s.lenet.conv2 = 5;
  s.lenet.dense1 = 16;
  s.lenet.dense2 = 8;
  return s;
}

Tensor<double> row(const Tensor<double>& batch, std::size_t b) {
  const std::size_t per = batch.dim(1) * batch.dim(2);
  return Tensor<double>({1, batch.dim(1), batch.dim(2)},
                        std::vector<double>(batch.ptr() + b * per, batch.ptr() + (b + 1) * per));
}

}  // namespace

TEST_CASE("mask blend identities") {
  std::mt19937_64 rng(1);
  const auto x = testing::random_tensor({2, 16}, rng);
  const std::vector<double> zeros(16, 0.0), ones(16, 1.0), half(16, 0.5);
  CHECK(apply_mask<double>(x, zeros, 0.3) == x);
  const auto full = apply_mask<double>(x, ones, 0.3);
  for (double v : full.vec()) CHECK(v == 0.3);
  const auto h = apply_mask<double>(x, half, 0.3);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(h[i] == doctest::Approx(0.5 * x[i] + 0.15).epsilon(1e-15));

  const auto xb = testing::random_tensor({3, 2, 4}, rng);
  std::vector<double> wb(12);
  for (std::size_t i = 0; i < wb.size(); ++i) wb[i] = static_cast<double>(i % 4) / 3.0;
  const auto m = apply_mask<double>(xb, wb, -1.0);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 4; ++i) {
        const double w = wb[b * 4 + i], xv = xb[(b * 2 + c) * 4 + i];
        CHECK(m[(b * 2 + c) * 4 + i] == doctest::Approx((1 - w) * xv - w).epsilon(1e-15));
      }
  CHECK_THROWS_AS(apply_mask<double>(x, std::vector<double>(15, 0.0), 0.0), ShapeError);
}

TEST_CASE("objective terms and their gradient") {
  std::mt19937_64 rng(2);
  auto model = models::make_classifier<double>(small_lenet(16), 3);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  MaskConfig cfg;
  cfg.lambda1 = 0.01;
  cfg.lambda2 = 0.02;
  for (int trial = 0; trial < 20; ++trial) {
    cfg.p = 1.0 + trial % 3;
    const auto x = testing::random_tensor({1, 2, 16}, rng);
    std::vector<double> w(16);
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = i && std::abs(u(rng) - w[i - 1]) < 0.02 ? w[i - 1] + 0.03 : u(rng);
    for (auto& v : w) v = std::clamp(v, 0.0, 1.0);
    const int target = trial % 4;

    std::vector<double> g;
    const auto t = mask_objective<double>(*model, x, w, target, cfg, &g);
    double l1 = 0.0, tv = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      l1 += std::abs(w[i]);
      if (i) tv += std::pow(std::abs(w[i] - w[i - 1]), cfg.p);
    }
    const auto probs = models::predict(*model, apply_mask<double>(x, w, cfg.xi)).front().probs;
    CHECK(t.l1 == doctest::Approx(cfg.lambda1 * l1).epsilon(1e-12));
    CHECK(t.tv == doctest::Approx(cfg.lambda2 * tv).epsilon(1e-12));
    CHECK(t.prob == doctest::Approx(probs[target]).epsilon(1e-12));
    CHECK(t.objective == doctest::Approx(t.prob + t.l1 + t.tv).epsilon(1e-12));

    std::vector<double> numeric(w.size());
    double diff = 0.0, norm_a = 0.0, norm_n = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto wp = w, wm = w;
      wp[i] += 1e-6;
      wm[i] -= 1e-6;
      numeric[i] = (mask_objective<double>(*model, x, wp, target, cfg).objective -
                    mask_objective<double>(*model, x, wm, target, cfg).objective) / 2e-6;
      diff += (numeric[i] - g[i]) * (numeric[i] - g[i]);
      norm_a += g[i] * g[i];
      norm_n += numeric[i] * numeric[i];
    }
    CAPTURE(trial);
    CHECK(std::sqrt(diff) / std::max({std::sqrt(norm_a), std::sqrt(norm_n), 1e-12}) < 1e-3);
  }
}

TEST_CASE("optimize_mask: never worse than the start, bounded, rows independent") {
  std::mt19937_64 rng(3);
  auto model = models::make_classifier<double>(small_lenet(16), 5);
  const auto input = testing::random_tensor({5, 2, 16}, rng);
  MaskConfig cfg;
  cfg.iterations = 60;
  const auto res = optimize_mask<double>(*model, input, cfg);
  REQUIRE(res.size() == 5);
  const auto preds = models::predict(*model, input);
  for (std::size_t b = 0; b < 5; ++b) {
    const auto& r = res[b];
    CHECK(r.trace.entries.size() == cfg.iterations + 1);
    CHECK(r.cav.method == "mask");
    CHECK(r.cav.target_class == preds[b].j_star);
    CHECK(r.unmasked_prob == doctest::Approx(preds[b].probs[preds[b].j_star]).epsilon(1e-12));
    const double start = r.trace.entries.front().terms.objective;
    const double best = r.trace.entries[r.trace.best].terms.objective;
    CHECK(best <= start);
    for (const auto& e : r.trace.entries) CHECK(best <= e.terms.objective);
    for (double w : r.cav.w) CHECK((w >= 0.0 && w <= 1.0));
    // The returned mask evaluates to the recorded best objective.
    const auto again = mask_objective<double>(*model, row(input, b), r.cav.w, r.cav.target_class, cfg);
    CHECK(again.objective == doctest::Approx(best).epsilon(1e-9));

    const auto alone = optimize_mask<double>(*model, row(input, b), cfg).front();
    for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(alone.cav.w[i] - r.cav.w[i]) < 1e-12);
  }
  CHECK(res[0].trace.to_csv().rfind("iteration,objective,prob,l1,tv\n", 0) == 0);
}

TEST_CASE("optimize_mask: a stronger sparsity weight gives sparser masks") {
  std::mt19937_64 rng(4);
  auto model = models::make_classifier<double>(small_lenet(16), 7);
  const auto input = testing::random_tensor({8, 2, 16}, rng);
  double prev = 2.0;
  for (double l1 : {0.0, 1e-2, 0.1, 1.0}) {
    MaskConfig cfg;
    cfg.lambda1 = l1;
    cfg.iterations = 100;
    double mean = 0.0;
    for (const auto& r : optimize_mask<double>(*model, input, cfg))
      for (double w : r.cav.w) mean += w / (8.0 * 16.0);
    CAPTURE(l1);
    CHECK(mean <= prev + 1e-12);
    prev = mean;
  }
}

TEST_CASE("mask config validation, text round trip, deletion-value mean") {
  MaskConfig bad;
  bad.p = 0.5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = MaskConfig{};
  bad.step = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = MaskConfig{};
  bad.init = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = MaskConfig{};
  bad.lambda2 = -1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);

  MaskConfig c;
  c.xi = -0.25;
  c.iterations = 17;
  const auto back = MaskConfig::from_kv(c.to_kv(), MaskConfig{});
  CHECK(back.xi == -0.25);
  CHECK(back.iterations == 17);
  CHECK(back.to_kv().to_string() == c.to_kv().to_string());

  signal::Dataset ds;
  for (int i = 0; i < 3; ++i) {
    signal::RadioSample s;
    s.iq = {{1.0f, 2.0f}, {3.0f, -2.0f}};
    s.split = i == 2 ? signal::Split::Test : signal::Split::Train;
    ds.samples.push_back(s);
  }
  CHECK(input_channel_mean(ds, signal::Split::Train, models::InputFormat::IQ) == doctest::Approx(1.0));
  CHECK_THROWS_AS(input_channel_mean(ds, signal::Split::Val, models::InputFormat::IQ), InvalidArgument);
}

namespace {

models::ModelSpec tiny_lstm(std::size_t n_x) {
  auto s = models::build_lstm(n_x, 4);
  s.lstm.hidden = 4;
  s.lstm.dense = 6;
  return s;
}

}  // namespace

TEST_CASE("frozen tiny LSTM: objective gradient, zero mask, TV zero iff constant") {
  std::mt19937_64 rng(5);
  auto model = models::make_classifier<double>(tiny_lstm(12), 2);
  MaskConfig cfg;
  cfg.lambda1 = 0.05;
  cfg.lambda2 = 0.1;
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 20; ++trial) {
    cfg.p = trial % 2 ? 2.0 : 3.0;
    const auto x = testing::random_tensor({1, 2, 12}, rng);
    std::vector<double> w(12);
    for (auto& v : w) v = u(rng);
    std::vector<double> g;
    const auto t = mask_objective<double>(*model, x, w, 1, cfg, &g);
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto wp = w, wm = w;
      wp[i] += 1e-6;
      wm[i] -= 1e-6;
      const double n = (mask_objective<double>(*model, x, wp, 1, cfg).objective -
                        mask_objective<double>(*model, x, wm, 1, cfg).objective) / 2e-6;
      diff += (n - g[i]) * (n - g[i]);
      norm += n * n;
    }
    CHECK(std::sqrt(diff) < 1e-3 * std::sqrt(norm));
    CHECK(t.tv > 0.0);

    const std::vector<double> zero(12, 0.0), flat(12, 0.7);
    const auto z = mask_objective<double>(*model, x, zero, 1, cfg);
    CHECK(z.objective == doctest::Approx(models::predict(*model, x).front().probs[1]).epsilon(1e-12));
    CHECK(mask_objective<double>(*model, x, flat, 1, cfg).tv == 0.0);
  }
}

TEST_CASE("hand-sized objective terms") {
  auto model = models::make_classifier<double>(tiny_lstm(4), 1);
  const Tensor<double> x({1, 2, 4}, 0.3);
  MaskConfig cfg;
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 1.0;
  cfg.p = 3.0;
  const std::vector<double> w{0, 0.5, 0.5, 1};
  CHECK(mask_objective<double>(*model, x, w, 0, cfg).tv == doctest::Approx(0.25));
  MaskConfig l1;
  l1.lambda1 = 0.1;
  const Tensor<double> x2({1, 2, 2}, 0.3);
  auto m2 = models::make_classifier<double>(tiny_lstm(2), 1);
  CHECK(mask_objective<double>(*m2, x2, std::vector<double>{0.2, 0.3}, 0, l1).l1 == doctest::Approx(0.05));
  const Tensor<double> one({1, 2, 1}, std::vector<double>{1.0, -1.0});
  const auto phi = apply_mask<double>(one, std::vector<double>{1.0}, 0.01);
  CHECK(phi.vec() == grad::AlignedVector<double>{0.01, 0.01});
}

TEST_CASE("a stronger smoothness weight does not roughen the mask") {
  std::mt19937_64 rng(6);
  auto model = models::make_classifier<double>(tiny_lstm(16), 3);
  const auto input = testing::random_tensor({6, 2, 16}, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double l2 : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    MaskConfig cfg;
    cfg.lambda2 = l2;
    cfg.iterations = 150;
    double rough = 0.0;
    for (const auto& r : optimize_mask<double>(*model, input, cfg))
      for (std::size_t i = 1; i < r.cav.w.size(); ++i) rough += std::pow(std::abs(r.cav.w[i] - r.cav.w[i - 1]), cfg.p);
    CAPTURE(l2);
    CHECK(rough <= prev + 1e-12);
    prev = rough;
  }
}

TEST_CASE("non-finite objective aborts with the iteration") {
  auto model = models::make_classifier<double>(tiny_lstm(8), 1);
  Tensor<double> x({1, 2, 8}, 0.5);
  x[3] = std::nan("");
  try {
    optimize_mask<double>(*model, x, MaskConfig{});
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}
