// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "vkg/errors.hpp"
#include "vkg/trainer.hpp"
#include "vkg/vision_features.hpp"

using namespace vkg;

namespace {

std::filesystem::path tmp(const char* name) { return std::filesystem::temp_directory_path() / name; }

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_SUITE("vision_features") {
  TEST_CASE("synthetic source is deterministic and matches the corpus") {
    SynthConfig cfg;
    cfg.n_samples = 12;
    const auto corpus = gen_synthetic(cfg);
    const auto src = FeatureSource::synthetic(cfg, corpus);
    CHECK(src.kind() == FeatureKind::synthetic);
    CHECK(src.d_vis() == cfg.d_vis);
    for (const auto& s : corpus) {
      CHECK(src.features_for(s.id) == src.features_for(s.id));
      CHECK(features_for(src, s.id) == *s.image_features);
    }
    CHECK_THROWS_AS((void)src.features_for("nope"), MissingFeatures);
    CHECK(src.ids().size() == 12);
  }

  TEST_CASE("512-wide file rows") {
    std::string text = "d_vis=512\n";
    for (const char* id : {"img1", "img2"}) {
      text += id;
      for (int i = 0; i < 512; ++i) text += " " + std::to_string(i * 0.5);
      text += "\n";
    }
    spit(tmp("vkg_feat512.txt"), text);
    const auto src = FeatureSource::load_file(tmp("vkg_feat512.txt"));
    CHECK(src.kind() == FeatureKind::file_backed);
    const auto v = src.features_for("img2");
    REQUIRE(v.size() == 512);
    CHECK(v[511] == 255.5);
    CHECK(src.contains("img1"));
    CHECK_FALSE(src.contains("img3"));
    CHECK_THROWS_AS((void)src.features_for("img3"), MissingFeatures);
    std::filesystem::remove(tmp("vkg_feat512.txt"));
  }

  TEST_CASE("save and load round trip at float precision") {
    SynthConfig cfg;
    cfg.n_samples = 5;
    const auto corpus = gen_synthetic(cfg);
    FeatureSource::synthetic(cfg, corpus).save(tmp("vkg_feat_rt.txt"));
    const auto back = FeatureSource::load_file(tmp("vkg_feat_rt.txt"));
    CHECK(back.d_vis() == cfg.d_vis);
    for (const auto& s : corpus) {
      const auto v = back.features_for(s.id);
      for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(v[i] == static_cast<double>(static_cast<float>((*s.image_features)[i])));
    }
    std::filesystem::remove(tmp("vkg_feat_rt.txt"));
  }

  TEST_CASE("malformed files") {
    spit(tmp("vkg_feat_bad.txt"), "dvis=2\na 1 2\n");
    CHECK_THROWS_AS((void)FeatureSource::load_file(tmp("vkg_feat_bad.txt")), FormatError);
    spit(tmp("vkg_feat_bad.txt"), "d_vis=2\na 1\n");
    CHECK_THROWS_AS((void)FeatureSource::load_file(tmp("vkg_feat_bad.txt")), FormatError);
    spit(tmp("vkg_feat_bad.txt"), "d_vis=2\na 1 x\n");
    CHECK_THROWS_AS((void)FeatureSource::load_file(tmp("vkg_feat_bad.txt")), FormatError);
    spit(tmp("vkg_feat_bad.txt"), "d_vis=2\na 1 2\na 3 4\n");
    CHECK_THROWS_AS((void)FeatureSource::load_file(tmp("vkg_feat_bad.txt")), FormatError);
    spit(tmp("vkg_feat_bad.txt"), "d_vis=0\n");
    CHECK_THROWS_AS((void)FeatureSource::load_file(tmp("vkg_feat_bad.txt")), FormatError);
    std::filesystem::remove(tmp("vkg_feat_bad.txt"));
    CHECK_THROWS_AS((void)FeatureSource::load_file(tmp("vkg_feat_bad.txt")), IoError);
    CHECK_THROWS_AS((void)FeatureSource::from_vectors(3, {{"a", {1.0, 2.0}}}), ShapeError);
  }

  TEST_CASE("either provider yields the same loss for the same vectors") {
    SynthConfig cfg;
    cfg.n_samples = 3;
    cfg.d_vis = 6;
    auto corpus = gen_synthetic(cfg);
    const auto synth = FeatureSource::synthetic(cfg, corpus);
    std::map<std::string, std::vector<double>> copy;
    for (const auto& s : corpus) copy[s.id] = synth.features_for(s.id);
    const auto file = FeatureSource::from_vectors(6, copy);

    const auto vocab = build_vocab(corpus);
    LmConfig lc;
    lc.vocab_size = vocab.size();
    lc.d_model = 8;
    lc.n_layers = 1;
    lc.n_heads = 2;
    lc.d_ff = 16;
    lc.max_seq_len = 160;
    ProjectorConfig pc;
    pc.d_vis = 6;
    pc.d_lm = 8;
    pc.clip_length = 2;
    pc.prefix_length = 1;
    pc.n_layers = 1;
    pc.n_heads = 2;
    const auto lm = init_lm(lc);
    const auto proj = init_projector(pc);
    for (auto s : corpus) {
      s.image_features = synth.features_for(s.id);
      const double a = sample_loss(lm, &proj, encode(s, vocab)).item();
      s.image_features = file.features_for(s.id);
      const double b = sample_loss(lm, &proj, encode(s, vocab)).item();
      CHECK(a == b);
    }
  }
}
