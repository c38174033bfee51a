#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "modviz/common/errors.hpp"
#include "modviz/models/checkpoint.hpp"
#include "modviz/signal/dataset.hpp"
#include "modviz/train/metrics.hpp"
#include "modviz/train/reports.hpp"
#include "modviz/train/trainer.hpp"
#include "support.hpp"

using namespace modviz;
using namespace modviz::train;
using signal::Split;

namespace {

// Label-only dataset: samples carry a constant 8-point waveform.
signal::Dataset labelled(std::size_t per_class, std::size_t n_classes, Split split = Split::Test) {
  signal::Dataset ds;
  for (std::size_t c = 0; c < n_classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      signal::RadioSample s;
      s.iq.assign(8, {1.0f, 0.0f});
      s.label = static_cast<int>(c);
      s.snr_db = static_cast<int>(i % 2) * 10;
      s.split = split;
      ds.samples.push_back(std::move(s));
    }
  return ds;
}

Predictor truth_predictor() {
  return [](std::span<const signal::RadioSample* const> b) {
    std::vector<int> out;
    for (const auto* s : b) out.push_back(s->label);
    return out;
  };
}

const signal::Dataset& small_task() {
  static const signal::Dataset ds = [] {
    signal::GenerationConfig g;
    g.schemes = {signal::Scheme::BPSK, signal::Scheme::QPSK, signal::Scheme::PAM4, signal::Scheme::GFSK};
    g.snr_min = 14;
    g.snr_max = 18;
    g.count_per_cell = 40;
    g.n_x = 32;
    return signal::generate_dataset(g, 3);
  }();
  return ds;
}

models::ModelSpec small_lenet() {
  auto spec = models::build_lenet(32, 11);
  spec.lenet.conv1 = 8;
  spec.lenet.conv2 = 8;
  spec.lenet.dense1 = 32;
  spec.lenet.dense2 = 16;
  return spec;
}

TrainConfig quick(std::size_t epochs, std::uint64_t seed = 1) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = seed;
  c.batch_size = 32;
  return c;
}

}  // namespace

TEST_CASE("confusion matrix: perfect predictor gives the identity") {
  const auto ds = labelled(7, 5);
  const auto r = evaluate(ds, Split::Test, truth_predictor(), 5);
  CHECK(r.accuracy == 1.0);
  CHECK(r.count == 35);
  const auto norm = r.confusion.row_normalized();
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(r.confusion.row_total(i) == 7);
    for (std::size_t j = 0; j < 5; ++j) CHECK(norm.at(i, j) == (i == j ? 1.0 : 0.0));
  }
  REQUIRE(r.per_snr.size() == 2);
  CHECK(r.per_snr.at(0).total + r.per_snr.at(10).total == 35);
}

TEST_CASE("confusion matrix properties on random predictions") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 9;
    ConfusionMatrix cm(n);
    std::vector<std::int64_t> per_class(n, 0);
    std::uniform_int_distribution<int> lab(0, static_cast<int>(n) - 2);  // last class never occurs as truth
    std::uniform_int_distribution<int> any(0, static_cast<int>(n) - 1);
    for (int i = 0; i < 500; ++i) {
      const int t = lab(rng);
      ++per_class[t];
      cm.add(t, any(rng));
    }
    const auto norm = cm.row_normalized();
    const auto empty = cm.empty_rows();
    for (std::size_t r = 0; r < n; ++r) {
      CHECK(cm.row_total(r) == per_class[r]);
      if (empty[r]) {
        CHECK(norm.row_sum(r) == 0.0);
      } else {
        CHECK(std::abs(norm.row_sum(r) - 1.0) < 1e-6);
      }
    }
    CHECK(empty[n - 1]);
    CHECK(cm.total() == 500);
  }
  ConfusionMatrix cm(3);
  CHECK_THROWS_AS(cm.add(3, 0), InvalidArgument);
}

TEST_CASE("relative confusion") {
  RealMatrix a(2), b(2);
  a.v = {0.9, 0.1, 0.2, 0.8};
  b.v = {0.8, 0.2, 0.3, 0.7};
  const auto d = relative_confusion(a, b);
  const double want[] = {0.1, -0.1, -0.1, 0.1};
  for (int i = 0; i < 4; ++i) CHECK(d.v[i] == doctest::Approx(want[i]).epsilon(1e-12));
  for (double v : relative_confusion(a, a).v) CHECK(v == 0.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 10;
    auto stochastic = [&] {
      RealMatrix m(n);
      for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) s += (m.at(r, c) = u(rng));
        for (std::size_t c = 0; c < n; ++c) m.at(r, c) /= s;
      }
      return m;
    };
    const auto rel = relative_confusion(stochastic(), stochastic());
    for (std::size_t r = 0; r < n; ++r) CHECK(std::abs(rel.row_sum(r)) < 1e-6);
  }
  CHECK_THROWS_AS(relative_confusion(RealMatrix(2), RealMatrix(3)), ShapeError);
}

TEST_CASE("evaluate: uniform random predictor on 11 balanced classes") {
  const auto ds = labelled(910, 11);  // 10010 samples
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> any(0, 10);
  const Predictor random = [&](std::span<const signal::RadioSample* const> b) {
    std::vector<int> out;
    for (std::size_t i = 0; i < b.size(); ++i) out.push_back(any(rng));
    return out;
  };
  const auto r = evaluate(ds, Split::Test, random, 11);
  CHECK(std::abs(r.accuracy - 1.0 / 11.0) < 0.02);
  CHECK_THROWS_AS(evaluate(ds, Split::Val, random, 11), InvalidArgument);
}

TEST_CASE("accuracy is invariant under a consistent relabeling") {
  std::mt19937_64 rng(4);
  auto ds = labelled(60, 6);
  std::uniform_int_distribution<int> any(0, 5);
  std::vector<int> fixed_pred(ds.samples.size());
  for (auto& p : fixed_pred) p = any(rng);
  // The stub answers from a table keyed by sample position.
  auto stub = [&](const std::vector<int>& perm) {
    return [&, perm](std::span<const signal::RadioSample* const> b) {
      std::vector<int> out;
      for (const auto* s : b) out.push_back(perm[fixed_pred[s - ds.samples.data()]]);
      return out;
    };
  };
  std::vector<int> identity(6);
  std::iota(identity.begin(), identity.end(), 0);
  const double base = evaluate(ds, Split::Test, stub(identity), 6).accuracy;
  for (int trial = 0; trial < 10; ++trial) {
    auto perm = identity;
    std::shuffle(perm.begin(), perm.end(), rng);
    auto relabelled = ds;
    for (auto& s : relabelled.samples) s.label = perm[s.label];
    const auto* base_ptr = relabelled.samples.data();
    const Predictor p = [&, perm](std::span<const signal::RadioSample* const> b) {
      std::vector<int> out;
      for (const auto* s : b) out.push_back(perm[fixed_pred[s - base_ptr]]);
      return out;
    };
    CHECK(evaluate(relabelled, Split::Test, p, 6).accuracy == base);
  }
}

TEST_CASE("train config validation and text round trip") {
  TrainConfig c;
  c.clip_norm = 2.5;
  c.dropout = 0.1;
  c.patience = 4;
  const auto back = TrainConfig::from_kv(c.to_kv());
  CHECK(back.clip_norm == 2.5);
  CHECK(back.dropout == 0.1);
  CHECK(back.patience == 4);
  CHECK(back.to_kv().to_string() == c.to_kv().to_string());

  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = TrainConfig{};
  bad.lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = TrainConfig{};
  bad.clip_norm = std::nan("");
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = TrainConfig{};
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("lr = 0 leaves every parameter unchanged after an epoch") {
  auto cfg = quick(1);
  cfg.lr = 0.0;
  const auto spec = small_lenet();
  const auto result = train::train(spec, small_task(), cfg);
  const auto fresh = models::snapshot(*models::make_classifier<float>(spec, cfg.seed), cfg.seed);
  REQUIRE(result.snapshot.tensors.size() == fresh.tensors.size());
  for (std::size_t i = 0; i < fresh.tensors.size(); ++i) CHECK(result.snapshot.tensors[i].second == fresh.tensors[i].second);
}

TEST_CASE("training lowers the loss, keeps the best epoch, and is bitwise reproducible") {
  const auto spec = small_lenet();
  std::vector<EpochRecord> seen;
  const auto a = train::train(spec, small_task(), quick(4), [&](const EpochRecord& r) { seen.push_back(r); });
  REQUIRE(a.history.epochs.size() == 4);
  CHECK(seen.size() == 4);
  CHECK(a.history.epochs[0].train_loss < a.history.init_loss);
  CHECK(a.history.best_val_accuracy >= a.history.epochs.back().val_accuracy);
  for (const auto& e : a.history.epochs) CHECK(a.history.best_val_accuracy >= e.val_accuracy);

  // The returned parameters are those that scored the best validation accuracy.
  auto best = models::instantiate<float>(a.snapshot);
  const auto val = evaluate(small_task(), Split::Val, model_predictor(*best), spec.n_y);
  CHECK(val.accuracy == doctest::Approx(a.history.best_val_accuracy).epsilon(1e-12));

  const auto b = train::train(spec, small_task(), quick(4));
  CHECK(models::encode_checkpoint(a.snapshot) == models::encode_checkpoint(b.snapshot));
  const auto c = train::train(spec, small_task(), quick(4, 2));
  CHECK(models::encode_checkpoint(a.snapshot) != models::encode_checkpoint(c.snapshot));
}

TEST_CASE("patience stops a run that cannot improve") {
  auto cfg = quick(10);
  cfg.lr = 0.0;
  cfg.patience = 2;
  const auto r = train::train(small_lenet(), small_task(), cfg);
  CHECK(r.history.stopped_early);
  CHECK(r.history.epochs.size() == 2);
  CHECK(r.history.best_epoch == 0);
}

TEST_CASE("non-finite loss aborts with epoch and batch context") {
  auto ds = small_task();
  for (auto& s : ds.samples)
    if (s.split == Split::Train) s.iq[3] = {std::nanf(""), 0.0f};
  try {
    train::train(small_lenet(), ds, quick(1));
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    const std::string what = e.what();
    CHECK(what.find("epoch 1") != std::string::npos);
    CHECK(what.find("batch") != std::string::npos);
  }
  auto wrong = small_task();
  CHECK_THROWS_AS(train::train(models::build_lenet(64, 11), wrong, quick(1)), ShapeError);
}

TEST_CASE("reports: matrix csv round trip, history lines, per-SNR table") {
  const std::vector<std::string> labels{"A", "B", "C"};
  ConfusionMatrix cm(3);
  cm.add(0, 0);
  cm.add(0, 1);
  cm.add(1, 1);
  const auto norm = cm.row_normalized();
  const auto parsed = parse_matrix_csv(matrix_csv(norm, labels));
  CHECK(parsed.labels == labels);
  CHECK(parsed.values.v == norm.v);
  CHECK_THROWS_AS(parse_matrix_csv(""), FormatError);
  CHECK_THROWS_AS(matrix_csv(norm, {"A", "B"}), InvalidArgument);

  const auto text = confusion_text(cm, labels);
  CHECK(text.find("C") != std::string::npos);
  CHECK(confusion_csv(cm, labels).find("A,B,C") != std::string::npos);

  TrainHistory h;
  h.epochs = {{1, 0.5, 0.6}, {2, 0.4, 0.7}};
  h.best_epoch = 2;
  h.best_val_accuracy = 0.7;
  const auto rep = history_report(models::build_lenet(32), TrainConfig{}, h);
  CHECK(rep.find("epoch,train_loss,val_accuracy") != std::string::npos);
  CHECK(rep.find("\n2,") != std::string::npos);

  const auto r = evaluate(labelled(4, 2), Split::Test, truth_predictor(), 2);
  const auto snr = per_snr_csv(r);
  CHECK(snr.find("snr_db,correct,total,accuracy") == 0);
  CHECK(snr.find("10,4,4,1") != std::string::npos);
}
