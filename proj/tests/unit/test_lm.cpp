// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vkg/errors.hpp"
#include "vkg/lm.hpp"

using namespace vkg;

namespace {

LmConfig small_cfg() {
  LmConfig c;
  c.vocab_size = 13;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 4;
  c.d_ff = 32;
  c.max_seq_len = 24;
  c.seed = 5;
  return c;
}

// Weights scaled up so that logits differ visibly between positions.
LmParams lively_lm(const LmConfig& cfg) {
  auto lm = init_lm(cfg);
  for (auto& p : lm.parameters()) {
    if (!p.decay) continue;
    for (auto& x : p.tensor.mutable_data()) x *= 20.0;
  }
  return lm;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST_SUITE("lm") {
  TEST_CASE("config validation") {
    LmConfig c = small_cfg();
    c.d_model = 64;
    c.n_heads = 8;
    CHECK(c.head_dim() == 8);
    CHECK_NOTHROW(validate(c));
    c.d_model = 65;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small_cfg();
    c.vocab_size = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    CHECK_THROWS_AS((void)init_lm(c), ConfigError);
  }

  TEST_CASE("initialisation is deterministic and follows the recipe") {
    auto a = init_lm(small_cfg()), b = init_lm(small_cfg());
    auto pa = a.parameters(), pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(same_values(pa[i].tensor, pb[i].tensor));

    const auto shapes = lm_param_shapes(small_cfg());
    REQUIRE(shapes.size() == pa.size());
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(shapes[i].first == pa[i].name);
      CHECK(shapes[i].second == pa[i].tensor.shape());
      if (pa[i].name.find("gain") != std::string::npos)
        for (double x : pa[i].tensor.data()) CHECK(x == 1.0);
      if (pa[i].decay) {
        for (double x : pa[i].tensor.data()) sq += x * x;
        n += pa[i].tensor.numel();
      }
    }
    CHECK(std::sqrt(sq / static_cast<double>(n)) == doctest::Approx(0.02).epsilon(0.05));

    auto c = small_cfg();
    c.seed = 6;
    CHECK_FALSE(same_values(init_lm(c).tok_emb, a.tok_emb));
  }

  TEST_CASE("empty prefix equals no prefix") {
    auto lm = lively_lm(small_cfg());
    PrefixedBatch plain{std::nullopt, {0, 5, 7, 2, 9}, {0, 1, 1, 1, 1}};
    PrefixedBatch empty = plain;
    empty.prefix = Tensor::zeros({0, 16});
    CHECK(same_values(lm_forward(lm, plain), lm_forward(lm, empty)));
    CHECK(same_values(lm_forward(lm, plain), lm_forward(lm, plain)));
  }

  TEST_CASE("changing future tokens leaves earlier logits alone") {
    auto lm = lively_lm(small_cfg());
    std::mt19937_64 g(8);
    std::uniform_int_distribution<int> tok(0, 12);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::int32_t> ids(10);
      for (auto& t : ids) t = tok(g);
      auto other = ids;
      const std::size_t cut = 3 + static_cast<std::size_t>(trial % 6);
      std::shuffle(other.begin() + static_cast<long>(cut), other.end(), g);
      other.back() = (other.back() + 1) % 13;
      const auto a = lm_forward(lm, PrefixedBatch{std::nullopt, ids, {}});
      const auto b = lm_forward(lm, PrefixedBatch{std::nullopt, other, {}});
      for (std::size_t r = 0; r < cut; ++r)
        for (std::size_t c = 0; c < 13; ++c) CHECK(a.at(r, c) == b.at(r, c));
      bool later_differs = false;
      for (std::size_t c = 0; c < 13; ++c) later_differs |= a.at(9, c) != b.at(9, c);
      CHECK(later_differs);
    }
  }

  TEST_CASE("logits ignore later prefix rows") {
    auto lm = lively_lm(small_cfg());
    std::mt19937_64 g(9);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> pv(4 * 16);
    for (auto& x : pv) x = n(g);
    const std::vector<std::int32_t> ids{0, 4, 4, 8};
    const double h = 1e-5;
    // Finite differences of each logit row with respect to each prefix row.
    const auto base = lm_forward(lm, PrefixedBatch{Tensor::from({4, 16}, pv), ids, {}});
    for (std::size_t j = 0; j < 4; ++j) {
      auto bumped = pv;
      for (std::size_t c = 0; c < 16; ++c) bumped[j * 16 + c] += (c % 3 == 0) ? h : -0.5 * h;
      const auto moved = lm_forward(lm, PrefixedBatch{Tensor::from({4, 16}, bumped), ids, {}});
      for (std::size_t t = 0; t < 8; ++t) {
        double diff = 0.0;
        for (std::size_t c = 0; c < 13; ++c) diff = std::max(diff, std::abs(moved.at(t, c) - base.at(t, c)) / h);
        if (t < j) CHECK(diff == 0.0);
        else CHECK(diff > 1e-6);
      }
    }
  }

  TEST_CASE("uniform logits give ln 4") {
    PrefixedBatch b{std::nullopt, {0, 1, 2, 3}, {0, 1, 1, 1}};
    CHECK(lm_loss(Tensor::zeros({4, 4}), b).item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(std::abs(lm_loss(Tensor::zeros({4, 4}), b).item() - 1.386294) < 1e-6);
  }

  TEST_CASE("saturated logits give near-zero loss") {
    const std::vector<std::int32_t> ids{0, 3, 1, 2};
    std::vector<double> v(4 * 4, 0.0);
    for (std::size_t t = 0; t + 1 < ids.size(); ++t) v[t * 4 + static_cast<std::size_t>(ids[t + 1])] = 1e4;
    CHECK(lm_loss(Tensor::from({4, 4}, v), PrefixedBatch{std::nullopt, ids, {1, 1, 1, 1}}).item() < 1e-3);
  }

  TEST_CASE("loss matches a per-position oracle, prefix rows skipped") {
    std::mt19937_64 g(10);
    std::normal_distribution<double> n(0.0, 2.0);
    std::uniform_int_distribution<int> tok(0, 6), bit(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t k = static_cast<std::size_t>(trial % 3), len = 6;
      std::vector<double> v((k + len) * 7);
      for (auto& x : v) x = n(g);
      PrefixedBatch b{std::nullopt, std::vector<std::int32_t>(len), std::vector<std::uint8_t>(len)};
      for (auto& t : b.token_ids) t = tok(g);
      for (auto& m : b.loss_mask) m = static_cast<std::uint8_t>(bit(g));
      b.loss_mask[len - 1] = 1;
      double sum = 0.0;
      int cnt = 0;
      for (std::size_t t = 1; t < len; ++t) {
        if (!b.loss_mask[t]) continue;
        std::vector<double> row(v.begin() + static_cast<long>((k + t - 1) * 7),
                                v.begin() + static_cast<long>((k + t) * 7));
        sum += oracle::naive_ce(row, b.token_ids[t]);
        ++cnt;
      }
      CHECK(std::abs(lm_loss(Tensor::from({k + len, 7}, v), b).item() - sum / cnt) <= 1e-10);
    }
  }

  TEST_CASE("loss and forward errors") {
    auto lm = init_lm(small_cfg());
    PrefixedBatch none{std::nullopt, {0, 1, 2}, {1, 0, 0}};
    CHECK_THROWS_AS((void)lm_loss(Tensor::zeros({3, 13}), none), EmptyMask);
    PrefixedBatch longer{std::nullopt, std::vector<std::int32_t>(25, 1), {}};
    CHECK_THROWS_AS((void)lm_forward(lm, longer), LengthError);
    PrefixedBatch pre{Tensor::zeros({20, 16}), std::vector<std::int32_t>(5, 1), {}};
    CHECK_THROWS_AS((void)lm_forward(lm, pre), LengthError);
    PrefixedBatch wide{Tensor::zeros({2, 15}), {1, 2}, {}};
    CHECK_THROWS_AS((void)lm_forward(lm, wide), ShapeError);
    PrefixedBatch mism{std::nullopt, {0, 1, 2}, {1, 1}};
    CHECK_THROWS_AS((void)lm_loss(Tensor::zeros({3, 13}), mism), ShapeError);
  }

  TEST_CASE("last log probs normalise") {
    auto lm = lively_lm(small_cfg());
    const auto logits = lm_forward(lm, PrefixedBatch{std::nullopt, {0, 3, 6}, {}});
    const auto lp = last_log_probs(logits);
    REQUIRE(lp.size() == 13);
    double s = 0.0;
    for (double x : lp) s += std::exp(x);
    CHECK(std::abs(s - 1.0) < 1e-12);
    std::vector<double> row(logits.data().end() - 13, logits.data().end());
    CHECK(std::abs(-lp[5] - oracle::naive_ce(row, 5)) < 1e-12);
  }

  TEST_CASE("clone is deep and trainable flag toggles") {
    auto lm = init_lm(small_cfg());
    auto c = lm.clone();
    c.tok_emb.mutable_data()[0] += 1.0;
    CHECK(c.tok_emb.data()[0] != lm.tok_emb.data()[0]);
    lm.set_trainable(false);
    for (const auto& p : lm.parameters()) CHECK_FALSE(p.tensor.requires_grad());
    lm.set_trainable(true);
    for (const auto& p : lm.parameters()) CHECK(p.tensor.requires_grad());
  }
}
