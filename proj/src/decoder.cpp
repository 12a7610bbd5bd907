// SPDX-License-Identifier: Apache-2.0
#include "vkg/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vkg/errors.hpp"
#include "vkg/rng.hpp"

namespace vkg {

namespace {

struct Hypothesis {
  std::vector<std::int32_t> tokens;
  double score = 0.0;
};

struct Finished {
  std::vector<std::int32_t> tokens;
  double score = 0.0;
  StopReason stop = StopReason::eos;
};

double rank_score(const Finished& f, bool normalize) {
  if (!normalize || f.tokens.empty()) return f.score;
  return f.score / static_cast<double>(f.tokens.size());
}

// Order by descending probability, then ascending id.
std::vector<std::int32_t> sorted_by_prob(std::span<const double> probs) {
  std::vector<std::int32_t> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::int32_t a, std::int32_t b) { return probs[a] > probs[b]; });
  return idx;
}

std::int32_t argmax_lowest(std::span<const double> v) {
  std::int32_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<std::int32_t>(i);
  }
  return best;
}

Generation greedy(const NextTokenLogProbs& next, const DecodeConfig& cfg, std::int32_t eos) {
  Generation g;
  for (std::size_t step = 0; step < cfg.max_new_tokens; ++step) {
    const auto lp = next(g.tokens);
    const auto tok = argmax_lowest(lp);
    g.tokens.push_back(tok);
    g.log_prob += lp[static_cast<std::size_t>(tok)];
    if (tok == eos) {
      g.stop = StopReason::eos;
      return g;
    }
  }
  g.stop = StopReason::length;
  return g;
}

Generation sample(const NextTokenLogProbs& next, const DecodeConfig& cfg, std::int32_t eos) {
  Rng rng(cfg.seed);
  Generation g;
  std::vector<double> probs;
  for (std::size_t step = 0; step < cfg.max_new_tokens; ++step) {
    const auto lp = next(g.tokens);
    probs.resize(lp.size());
    for (std::size_t i = 0; i < lp.size(); ++i) probs[i] = std::exp(lp[i]);
    const auto support =
        cfg.strategy == Strategy::top_k ? top_k_support(probs, cfg.k) : top_p_support(probs, cfg.p);
    double mass = 0.0;
    for (auto i : support) mass += probs[static_cast<std::size_t>(i)];
    double u = rng.uniform() * mass;
    std::int32_t tok = support.back();
    for (auto i : support) {
      u -= probs[static_cast<std::size_t>(i)];
      if (u < 0.0) {
        tok = i;
        break;
      }
    }
    g.tokens.push_back(tok);
    g.log_prob += lp[static_cast<std::size_t>(tok)];
    if (tok == eos) {
      g.stop = StopReason::eos;
      return g;
    }
  }
  g.stop = StopReason::length;
  return g;
}

// Active hypotheses are expanded by every token; candidates are ranked by
// cumulative log-prob (ties: earlier hypothesis, then lower token id). A
// candidate ending in eos is retired to the finished pool; the rest refill
// the beam up to beam_width. At the length cap the surviving beam joins the
// pool, and the best pooled hypothesis wins.
Generation beam(const NextTokenLogProbs& next, const DecodeConfig& cfg, std::int32_t eos) {
  struct Candidate {
    double score;
    std::size_t hyp;
    std::int32_t token;
  };
  std::vector<Hypothesis> active{Hypothesis{}};
  std::vector<Finished> pool;
  std::vector<Candidate> cands;
  for (std::size_t step = 0; step < cfg.max_new_tokens && !active.empty(); ++step) {
    cands.clear();
    for (std::size_t h = 0; h < active.size(); ++h) {
      const auto lp = next(active[h].tokens);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        cands.push_back({active[h].score + lp[v], h, static_cast<std::int32_t>(v)});
      }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    std::vector<Hypothesis> next_active;
    for (const auto& c : cands) {
      if (next_active.size() == cfg.beam_width) break;
      auto tokens = active[c.hyp].tokens;
      tokens.push_back(c.token);
      if (c.token == eos) {
        pool.push_back({std::move(tokens), c.score, StopReason::eos});
      } else {
        next_active.push_back({std::move(tokens), c.score});
      }
    }
    active = std::move(next_active);

    if (!cfg.length_normalization && !pool.empty() && !active.empty()) {
      // Extensions only lower a raw score, so nothing active can overtake the pool.
      double best_pool = pool.front().score;
      for (const auto& f : pool) best_pool = std::max(best_pool, f.score);
      if (active.front().score <= best_pool) active.clear();
    }
  }
  for (auto& h : active) pool.push_back({std::move(h.tokens), h.score, StopReason::length});

  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    const double a = rank_score(pool[i], cfg.length_normalization);
    const double b = rank_score(pool[best], cfg.length_normalization);
    if (a > b || (a == b && pool[i].tokens < pool[best].tokens)) best = i;
  }
  Generation g;
  g.tokens = std::move(pool[best].tokens);
  g.log_prob = pool[best].score;
  g.stop = pool[best].stop;
  return g;
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::greedy: return "greedy";
    case Strategy::beam: return "beam";
    case Strategy::top_k: return "top_k";
    case Strategy::top_p: return "top_p";
  }
  return "";
}

std::optional<Strategy> parse_strategy(std::string_view s) {
  for (auto st : {Strategy::greedy, Strategy::beam, Strategy::top_k, Strategy::top_p}) {
    if (s == strategy_name(st)) return st;
  }
  if (s == "top-k") return Strategy::top_k;
  if (s == "top-p") return Strategy::top_p;
  return std::nullopt;
}

void validate(const DecodeConfig& cfg) {
  if (cfg.beam_width < 1) throw ConfigError("decoder.beam_width must be >= 1");
  if (cfg.k < 1) throw ConfigError("decoder.k must be >= 1");
  if (!(cfg.p > 0.0 && cfg.p <= 1.0)) throw ConfigError("decoder.p must lie in (0, 1]");
  if (cfg.max_new_tokens < 1) throw ConfigError("decoder.max_new_tokens must be >= 1");
}

std::vector<std::int32_t> top_k_support(std::span<const double> probs, std::size_t k) {
  auto idx = sorted_by_prob(probs);
  idx.resize(std::min(k, idx.size()));
  return idx;
}

std::vector<std::int32_t> top_p_support(std::span<const double> probs, double p) {
  auto idx = sorted_by_prob(probs);
  double cum = 0.0;
  std::size_t keep = 0;
  while (keep < idx.size()) {
    cum += probs[static_cast<std::size_t>(idx[keep++])];
    if (cum >= p) break;
  }
  idx.resize(keep);
  return idx;
}

Generation decode_with(const NextTokenLogProbs& next, const DecodeConfig& cfg, std::int32_t eos) {
  validate(cfg);
  switch (cfg.strategy) {
    case Strategy::greedy: return greedy(next, cfg, eos);
    case Strategy::beam: return beam(next, cfg, eos);
    case Strategy::top_k:
    case Strategy::top_p: return sample(next, cfg, eos);
  }
  return greedy(next, cfg, eos);
}

namespace {

std::optional<Tensor> make_prefix(const ProjectorParams* projector, std::span<const double> features) {
  if (!projector) return std::nullopt;
  return project(*projector, features);
}

}  // namespace

Generation generate(const LmParams& lm, const ProjectorParams* projector, std::span<const double> features,
                    std::span<const std::int32_t> prompt, const DecodeConfig& cfg, std::int32_t eos) {
  validate(cfg);
  NoGradGuard no_grad;
  const auto prefix = make_prefix(projector, features);
  const std::size_t k = prefix ? prefix->rows() : 0;
  if (k + prompt.size() + cfg.max_new_tokens > lm.config.max_seq_len) {
    throw LengthError("prefix " + std::to_string(k) + " + prompt " + std::to_string(prompt.size()) +
                      " + max_new_tokens " + std::to_string(cfg.max_new_tokens) + " exceeds max_seq_len " +
                      std::to_string(lm.config.max_seq_len));
  }
  PrefixedBatch batch;
  batch.prefix = prefix;
  auto next = [&](std::span<const std::int32_t> generated) {
    batch.token_ids.assign(prompt.begin(), prompt.end());
    batch.token_ids.insert(batch.token_ids.end(), generated.begin(), generated.end());
    return last_log_probs(lm_forward(lm, batch));
  };
  return decode_with(next, cfg, eos);
}

double score_sequence(const LmParams& lm, const ProjectorParams* projector, std::span<const double> features,
                      std::span<const std::int32_t> prompt, std::span<const std::int32_t> continuation) {
  if (continuation.empty()) return 0.0;
  NoGradGuard no_grad;
  PrefixedBatch batch;
  batch.prefix = make_prefix(projector, features);
  const std::size_t k = batch.prefix ? batch.prefix->rows() : 0;
  if (prompt.empty()) throw LengthError("score_sequence needs a non-empty prompt");
  if (k + prompt.size() + continuation.size() > lm.config.max_seq_len) {
    throw LengthError("prompt and continuation exceed max_seq_len " + std::to_string(lm.config.max_seq_len));
  }
  batch.token_ids.assign(prompt.begin(), prompt.end());
  batch.token_ids.insert(batch.token_ids.end(), continuation.begin(), continuation.end());
  const Tensor logits = lm_forward(lm, batch);
  const std::size_t v = logits.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < continuation.size(); ++i) {
    // Row predicting continuation[i] sits just before it.
    const std::size_t row = k + prompt.size() - 1 + i;
    const auto r = logits.data().subspan(row * v, v);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double x : r) sum += std::exp(x - mx);
    total += r[static_cast<std::size_t>(continuation[i])] - mx - std::log(sum);
  }
  return total;
}

}  // namespace vkg
