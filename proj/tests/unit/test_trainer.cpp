// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "vkg/checkpoint.hpp"
#include "vkg/errors.hpp"
#include "vkg/trainer.hpp"

using namespace vkg;

namespace {

struct TinyTask {
  std::vector<EncodedSample> samples;
  LmConfig lm;
  ProjectorConfig projector;
};

TinyTask tiny_task(std::size_t n) {
  SynthConfig sc;
  sc.n_samples = n;
  sc.d_vis = 8;
  sc.seed = 21;
  auto corpus = gen_synthetic(sc);
  auto vocab = build_vocab(corpus);
  TinyTask t;
  for (const auto& s : corpus) t.samples.push_back(encode(s, vocab));
  t.lm.vocab_size = vocab.size();
  t.lm.d_model = 16;
  t.lm.n_layers = 1;
  t.lm.n_heads = 2;
  t.lm.d_ff = 32;
  t.lm.max_seq_len = 160;
  t.projector.d_vis = 8;
  t.projector.d_lm = 16;
  t.projector.clip_length = 2;
  t.projector.prefix_length = 2;
  t.projector.n_layers = 1;
  t.projector.n_heads = 2;
  t.projector.ff_mult = 2;
  return t;
}

bool bit_identical(const ParamList& a, const ParamList& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].tensor.shape() != b[i].tensor.shape()) return false;
    if (!std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin())) return false;
  }
  return true;
}

double max_abs_diff(const ParamList& a, const ParamList& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].tensor.numel(); ++j)
      m = std::max(m, std::abs(a[i].tensor.data()[j] - b[i].tensor.data()[j]));
  return m;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("warmup schedule") {
    OptimHyper h;
    h.lr_peak = 2e-5;
    h.warmup_steps = 5000;
    CHECK(lr_at(0, h) == 0.0);
    CHECK(lr_at(5000, h) == 2e-5);
    CHECK(lr_at(2500, h) == doctest::Approx(1e-5).epsilon(1e-15));
    CHECK(lr_at(100000, h) == 2e-5);
    h.warmup_steps = 0;
    CHECK(lr_at(0, h) == 2e-5);
  }

  TEST_CASE("single AdamW step by hand") {
    OptimHyper h;
    h.weight_decay = 0.01;
    std::vector<double> p{1.0};
    const std::vector<double> g{1.0};
    AdamMoments st;
    adamw_step(p, g, st, h, 0.1, 1, true);
    // m_hat = v_hat = 1: p = 1 - 0.1 * (1 / (1 + 1e-8) + 0.01 * 1)
    CHECK(std::abs(p[0] - (1.0 - 0.1 * (1.0 / (1.0 + 1e-8) + 0.01))) < 1e-15);
    CHECK(std::abs(p[0] - 0.899) < 1e-6);
  }

  TEST_CASE("zero gradient without decay is a fixpoint") {
    OptimHyper h;
    h.weight_decay = 0.0;
    std::vector<double> p{0.5, -2.0, 3.0};
    const std::vector<double> g(3, 0.0);
    AdamMoments st;
    for (std::size_t s = 1; s <= 5; ++s) adamw_step(p, g, st, h, 0.1, s, true);
    CHECK(p == std::vector<double>{0.5, -2.0, 3.0});
  }

  TEST_CASE("zero gradient with decay shrinks geometrically") {
    OptimHyper h;
    h.weight_decay = 0.1;
    std::vector<double> p{2.0, -4.0};
    const std::vector<double> g(2, 0.0);
    AdamMoments st;
    adamw_step(p, g, st, h, 0.5, 1, true);
    CHECK(p[0] == doctest::Approx(2.0 * (1 - 0.05)).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(-4.0 * (1 - 0.05)).epsilon(1e-15));
    std::vector<double> q{2.0};
    AdamMoments st2;
    adamw_step(q, std::vector<double>{0.0}, st2, h, 0.5, 1, false);
    CHECK(q[0] == 2.0);
  }

  TEST_CASE("non-finite gradients abort before any update") {
    OptimHyper h;
    std::vector<double> p{1.0, 2.0};
    AdamMoments st;
    CHECK_THROWS_AS(adamw_step(p, std::vector<double>{0.1, NAN}, st, h, 0.1, 1, true), NonFiniteGradient);
    CHECK(p == std::vector<double>{1.0, 2.0});

    auto a = Tensor::parameter({2}, {1.0, 2.0});
    AdamW opt({{"a", a, true}}, h);
    backward(sum_all(mul(a, Tensor::from({2}, {INFINITY, 1.0}))));
    CHECK_THROWS_AS(opt.step(0.1), NonFiniteGradient);
    CHECK(a.data()[0] == 1.0);
    CHECK(opt.steps_taken() == 0);
  }

  TEST_CASE("global norm clipping") {
    OptimHyper h;
    h.clip_norm = 1.0;
    h.weight_decay = 0.0;
    auto a = Tensor::parameter({2}, {0.0, 0.0});
    AdamW opt({{"a", a, true}}, h);
    backward(sum_all(mul(a, Tensor::from({2}, {3.0, 4.0}))));
    CHECK(opt.step(0.1) == doctest::Approx(5.0));
    CHECK_FALSE(a.has_grad());
    // Adam's first step is sign-like regardless of scale.
    CHECK(a.data()[0] == doctest::Approx(-0.1).epsilon(1e-6));
  }

  TEST_CASE("regime names") {
    CHECK(regime_name(Regime::vlm_kg_frozen) == "vlm-kg-frozen");
    CHECK(parse_regime("vlm_kg_frozen") == Regime::vlm_kg_frozen);
    CHECK(parse_regime("llm-kg") == Regime::llm_kg);
    CHECK_FALSE(parse_regime("llm").has_value());
    CHECK_FALSE(regime_uses_projector(Regime::llm_kg));
    CHECK(regime_uses_projector(Regime::vlm_kg));
  }

  TEST_CASE("accumulating identical micro-batches equals one batch step") {
    auto task = tiny_task(3);
    const std::vector<EncodedSample> once{task.samples[0]};
    const std::vector<EncodedSample> twice{task.samples[0], task.samples[0]};
    for (Regime regime : {Regime::llm_kg, Regime::vlm_kg}) {
      TrainRun a;
      a.regime = regime;
      a.lm = task.lm;
      a.projector = task.projector;
      a.hyper.lr_peak = 1e-3;
      a.hyper.epochs = 1;
      a.hyper.batch_size = 1;
      a.hyper.grad_accum_steps = 2;
      a.train = twice;
      TrainRun b = a;
      b.hyper.grad_accum_steps = 1;
      b.train = once;
      TrainRun c = a;
      c.hyper.batch_size = 2;
      c.hyper.grad_accum_steps = 1;
      auto ra = train(a), rb = train(b), rc = train(c);
      CHECK(ra.report.steps == 1);
      CHECK(rb.report.steps == 1);
      CHECK(max_abs_diff(ra.lm.parameters(), rb.lm.parameters()) <= 1e-12);
      CHECK(max_abs_diff(rc.lm.parameters(), rb.lm.parameters()) <= 1e-12);
      if (regime == Regime::vlm_kg) {
        CHECK(max_abs_diff(ra.projector->parameters(), rb.projector->parameters()) <= 1e-12);
      }
    }
  }

  TEST_CASE("frozen regime leaves the LM untouched") {
    auto task = tiny_task(6);
    TrainRun run;
    run.regime = Regime::vlm_kg_frozen;
    run.lm = task.lm;
    run.projector = task.projector;
    run.hyper.lr_peak = 1e-2;
    run.hyper.epochs = 2;
    run.train = std::span(task.samples).first(4);
    run.val = std::span(task.samples).subspan(4);
    const auto start = init_lm(task.lm);
    run.init_lm = start;
    auto result = train(run);
    CHECK(bit_identical(result.lm.parameters(), start.parameters()));
    CHECK_FALSE(bit_identical(result.projector->parameters(), init_projector(task.projector).parameters()));

    // Checkpoint payloads of the LM match too.
    const auto dir = std::filesystem::temp_directory_path();
    save_model((dir / "vkg_frozen_a.ckpt").string(), Regime::llm_kg, start, nullptr);
    save_model((dir / "vkg_frozen_b.ckpt").string(), Regime::llm_kg, result.lm, nullptr);
    const auto ca = load_checkpoint(dir / "vkg_frozen_a.ckpt"), cb = load_checkpoint(dir / "vkg_frozen_b.ckpt");
    REQUIRE(ca.tensors.size() == cb.tensors.size());
    for (std::size_t i = 0; i < ca.tensors.size(); ++i) CHECK(ca.tensors[i].values == cb.tensors[i].values);
    std::filesystem::remove(dir / "vkg_frozen_a.ckpt");
    std::filesystem::remove(dir / "vkg_frozen_b.ckpt");
  }

  TEST_CASE("loss goes down and training is reproducible") {
    auto task = tiny_task(8);
    TrainRun run;
    run.regime = Regime::llm_kg;
    run.lm = task.lm;
    run.hyper.lr_peak = 3e-3;
    run.hyper.epochs = 50;
    run.hyper.batch_size = 2;
    run.hyper.grad_accum_steps = 1;
    run.train = std::span(task.samples).first(6);
    run.val = std::span(task.samples).subspan(6);
    run.seed = 4;
    std::size_t steps_seen = 0, epochs_seen = 0;
    run.on_step = [&](const TrainLogRow&) { ++steps_seen; };
    run.on_epoch = [&](std::size_t, double, double) { ++epochs_seen; };
    auto r = train(run);
    REQUIRE(r.report.epoch_train_loss.size() == 50);
    CHECK(r.report.epoch_train_loss[49] < r.report.epoch_train_loss[0]);
    CHECK(r.report.epoch_train_loss[49] < 0.5 * r.report.epoch_train_loss[0]);
    CHECK(r.report.steps == 150);
    CHECK(steps_seen == 150);
    CHECK(epochs_seen == 50);
    CHECK(r.log.size() == 150);
    CHECK(r.log.back().epoch == 50);

    run.hyper.epochs = 3;
    run.on_step = nullptr;
    run.on_epoch = nullptr;
    auto x = train(run), y = train(run);
    CHECK(bit_identical(x.lm.parameters(), y.lm.parameters()));
    CHECK(x.report.epoch_val_loss == y.report.epoch_val_loss);
  }

  TEST_CASE("mean loss matches per-sample losses") {
    auto task = tiny_task(4);
    auto lm = init_lm(task.lm);
    double s = 0.0;
    for (const auto& e : task.samples) s += sample_loss(lm, nullptr, e).item();
    CHECK(mean_loss(lm, nullptr, task.samples) == doctest::Approx(s / 4).epsilon(1e-14));
    CHECK(std::isnan(mean_loss(lm, nullptr, {})));
    auto proj = init_projector(task.projector);
    auto bare = task.samples[0];
    bare.image_features.reset();
    CHECK_THROWS_AS((void)sample_loss(lm, &proj, bare), MissingFeatures);
  }

  TEST_CASE("data and model mismatches are config errors") {
    auto task = tiny_task(3);
    TrainRun run;
    run.regime = Regime::vlm_kg;
    run.lm = task.lm;
    run.projector = task.projector;
    run.hyper.epochs = 1;
    run.train = task.samples;
    auto bad = task.projector;
    bad.d_vis = 9;
    run.projector = bad;
    CHECK_THROWS_AS((void)train(run), ConfigError);
    run.projector = task.projector;
    run.lm.vocab_size = 6;
    CHECK_THROWS_AS((void)train(run), ConfigError);
    run.lm = task.lm;
    run.lm.max_seq_len = 20;
    CHECK_THROWS_AS((void)train(run), ConfigError);
    run.lm = task.lm;
    run.projector.d_lm = 32;
    CHECK_THROWS_AS((void)train(run), ConfigError);
    run.projector = task.projector;
    run.hyper.batch_size = 0;
    CHECK_THROWS_AS((void)train(run), ConfigError);
  }

  TEST_CASE("model files keep regime and weights") {
    auto task = tiny_task(2);
    auto lm = init_lm(task.lm);
    auto proj = init_projector(task.projector);
    const auto path = (std::filesystem::temp_directory_path() / "vkg_model_rt.ckpt").string();
    save_model(path, Regime::vlm_kg, lm, &proj, {{"note", "x"}});
    auto back = load_model(path);
    CHECK(back.regime == Regime::vlm_kg);
    CHECK(back.lm.config == lm.config);
    REQUIRE(back.projector.has_value());
    CHECK(back.projector->config == proj.config);
    CHECK(back.meta.at("note") == "x");
    const auto a = lm.parameters(), b = back.lm.parameters();
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a[i].tensor.numel(); ++j)
        CHECK(b[i].tensor.data()[j] == static_cast<double>(static_cast<float>(a[i].tensor.data()[j])));
    std::filesystem::remove(path);
  }

  TEST_CASE("train log csv") {
    const auto path = (std::filesystem::temp_directory_path() / "vkg_log.csv").string();
    const TrainLogRow rows[] = {{1, 1, 1e-4, 2.5}, {2, 1, 1e-4, 2.25}};
    write_train_log_csv(path, rows);
    std::ifstream in(path);
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "step,epoch,lr,loss");
    CHECK(first == "1,1,0.0001,2.5");
    std::filesystem::remove(path);
  }
}
