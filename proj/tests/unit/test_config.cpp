// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "vkg/config.hpp"
#include "vkg/errors.hpp"

using namespace vkg;
using nlohmann::json;

TEST_SUITE("config") {
  TEST_CASE("defaults carry the published optimiser settings") {
    const auto c = default_run_config();
    CHECK(c.trainer.hyper.batch_size == 2);
    CHECK(c.trainer.hyper.grad_accum_steps == 2);
    CHECK(c.trainer.hyper.epochs == 5);
    CHECK(c.projector.clip_length == 64);
    CHECK(c.projector.prefix_length == 64);
    CHECK(c.projector.n_layers == 8);
    CHECK(c.lm.d_model == 128);
    CHECK(c.lm.n_layers == 4);
    CHECK(c.projector.d_lm == c.lm.d_model);
    CHECK_NOTHROW(validate(c));

    const auto llm = resolve_hyper(c, Regime::llm_kg);
    CHECK(llm.lr_peak == 1e-4);
    CHECK(llm.warmup_steps == 0);
    for (auto r : {Regime::vlm_kg, Regime::vlm_kg_frozen}) {
      const auto v = resolve_hyper(c, r);
      CHECK(v.lr_peak == 2e-5);
      CHECK(v.warmup_steps == 5000);
    }
    auto explicit_cfg = c;
    explicit_cfg.trainer.lr_peak = 3e-4;
    explicit_cfg.trainer.warmup_steps = 7;
    CHECK(resolve_hyper(explicit_cfg, Regime::vlm_kg).lr_peak == 3e-4);
    CHECK(resolve_hyper(explicit_cfg, Regime::vlm_kg).warmup_steps == 7);
  }

  TEST_CASE("json round trip") {
    auto c = default_run_config();
    c.seed = 17;
    c.corpus.n_val = 5;
    c.corpus.loss_mask = LossMaskMode::full_sequence;
    c.corpus.synth.image_only_fraction = 0.3;
    c.projector.output_slice = OutputSlice::prefix_positions;
    c.decoder.strategy = Strategy::top_p;
    c.decoder.p = 0.7;
    c.metrics.beta = 2.0;
    c.trainer.lr_peak = 1e-3;
    c.paths.corpus = "x.jsonl";
    const json doc = to_json(c);
    const auto back = run_config_from_json(doc);
    CHECK(to_json(back) == doc);
    CHECK(back.seed == 17);
    CHECK(back.projector.output_slice == OutputSlice::prefix_positions);
    CHECK(back.decoder.strategy == Strategy::top_p);
    CHECK(back.trainer.lr_peak == 1e-3);
    CHECK_FALSE(back.trainer.warmup_steps.has_value());
    CHECK(doc.at("trainer").at("warmup_steps").is_null());
    CHECK(run_config_from_json(json::object()).lm == default_run_config().lm);
  }

  TEST_CASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_AS((void)run_config_from_json(json{{"sede", 1}}), ConfigError);
    CHECK_THROWS_AS((void)run_config_from_json(json{{"lm", {{"d_modle", 64}}}}), ConfigError);
    CHECK_THROWS_AS((void)run_config_from_json(json{{"trainer", {{"epochs", -1}}}}), ConfigError);
    CHECK_THROWS_AS((void)run_config_from_json(json{{"trainer", {{"epochs", "five"}}}}), ConfigError);
    CHECK_THROWS_AS((void)run_config_from_json(json{{"decoder", {{"strategy", "nucleus"}}}}), ConfigError);
    CHECK_THROWS_AS((void)run_config_from_json(json{{"lm", {{"d_model", 65}}}}), ConfigError);
    CHECK_THROWS_AS((void)run_config_from_json(json{{"lm", 3}}), ConfigError);
    // d_lm must track d_model.
    CHECK_THROWS_AS((void)run_config_from_json(json{{"lm", {{"d_model", 64}}}}), ConfigError);
    CHECK_NOTHROW((void)run_config_from_json(json{{"lm", {{"d_model", 64}}}, {"projector", {{"d_lm", 64}}}}));
    CHECK_THROWS_AS((void)run_config_from_json(json{{"corpus", {{"d_vis", 16}}}}), ConfigError);
    CHECK_THROWS_AS((void)run_config_from_json(json{{"metrics", {{"beta", 0.0}}}}), ConfigError);
  }

  TEST_CASE("dotted overrides") {
    json doc = json::object();
    apply_override(doc, "trainer.lr_peak=1e-4");
    apply_override(doc, "trainer.epochs=3");
    apply_override(doc, "decoder.strategy=greedy");
    apply_override(doc, "paths.corpus=data/c.jsonl");
    apply_override(doc, "trainer.epochs=4");
    CHECK(doc.at("trainer").at("lr_peak") == 1e-4);
    CHECK(doc.at("trainer").at("epochs") == 4);
    CHECK(doc.at("decoder").at("strategy") == "greedy");
    CHECK(doc.at("paths").at("corpus") == "data/c.jsonl");
    const auto c = run_config_from_json(doc);
    CHECK(c.trainer.hyper.epochs == 4);
    CHECK(c.decoder.strategy == Strategy::greedy);

    CHECK_THROWS_AS(apply_override(doc, "no_equals"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "=3"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "a..b=3"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "trainer.epochs.x=3"), ConfigError);
  }

  TEST_CASE("files") {
    const auto path = std::filesystem::temp_directory_path() / "vkg_cfg_test.json";
    {
      std::ofstream out(path);
      out << R"({"seed": 3, "trainer": {"epochs": 2}})";
    }
    CHECK(run_config_from_json(read_json_file(path)).seed == 3);
    {
      std::ofstream out(path);
      out << "{ not json";
    }
    CHECK_THROWS_AS((void)read_json_file(path), ConfigError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS((void)read_json_file(path), IoError);
  }
}
