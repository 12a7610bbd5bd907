// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used as test oracles. They share
// no code with the library beyond plain data types.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// -log softmax(row)[label] computed with long double.
inline double naive_ce(const std::vector<double>& row, int label) {
  long double mx = *std::max_element(row.begin(), row.end());
  long double s = 0;
  for (double x : row) s += std::exp(static_cast<long double>(x) - mx);
  return static_cast<double>(-(row[static_cast<std::size_t>(label)] - mx - std::log(s)));
}

using Tokens = std::vector<std::string>;

// Clipped n-gram matches by enumerating every candidate n-gram position and
// counting occurrences in both sequences directly.
inline std::pair<std::size_t, std::size_t> clipped_matches(const Tokens& cand, const Tokens& ref, std::size_t n) {
  if (cand.size() < n) return {0, 0};
  auto same = [&](const Tokens& a, std::size_t i, const Tokens& b, std::size_t j) {
    for (std::size_t t = 0; t < n; ++t)
      if (a[i + t] != b[j + t]) return false;
    return true;
  };
  std::size_t matched = 0;
  const std::size_t total = cand.size() - n + 1;
  std::vector<bool> counted(total, false);
  for (std::size_t i = 0; i < total; ++i) {
    if (counted[i]) continue;
    std::size_t in_cand = 0;
    for (std::size_t j = i; j < total; ++j) {
      if (same(cand, i, cand, j)) {
        ++in_cand;
        counted[j] = true;
      }
    }
    std::size_t in_ref = 0;
    for (std::size_t j = 0; j + n <= ref.size(); ++j) in_ref += same(cand, i, ref, j) ? 1 : 0;
    matched += std::min(in_cand, in_ref);
  }
  return {matched, total};
}

inline double bleu_from_counts(const std::vector<std::size_t>& m, const std::vector<std::size_t>& t, std::size_t c,
                               std::size_t r) {
  if (c == 0) return 0.0;
  double logs = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (t[i] == 0 || m[i] == 0) return 0.0;
    logs += std::log(static_cast<double>(m[i]) / static_cast<double>(t[i]));
  }
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  return bp * std::exp(logs / static_cast<double>(m.size()));
}

inline double sentence_bleu(const Tokens& cand, const Tokens& ref, std::size_t order) {
  std::vector<std::size_t> m, t;
  for (std::size_t n = 1; n <= order; ++n) {
    auto [a, b] = clipped_matches(cand, ref, n);
    m.push_back(a);
    t.push_back(b);
  }
  return bleu_from_counts(m, t, cand.size(), ref.size());
}

inline double corpus_bleu(const std::vector<Tokens>& cands, const std::vector<Tokens>& refs, std::size_t order) {
  std::vector<std::size_t> m(order, 0), t(order, 0);
  std::size_t c = 0, r = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    for (std::size_t n = 1; n <= order; ++n) {
      auto [a, b] = clipped_matches(cands[i], refs[i], n);
      m[n - 1] += a;
      t[n - 1] += b;
    }
    c += cands[i].size();
    r += refs[i].size();
  }
  return bleu_from_counts(m, t, c, r);
}

// Full (|a|+1) x (|b|+1) dynamic-programming table.
inline std::size_t lcs_full(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<std::size_t>> T(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      T[i][j] = a[i - 1] == b[j - 1] ? T[i - 1][j - 1] + 1 : std::max(T[i - 1][j], T[i][j - 1]);
  return T[a.size()][b.size()];
}

// Exponential enumeration of subsequences of the shorter side; only for tiny inputs.
inline std::size_t lcs_brute(const Tokens& a, const Tokens& b) {
  const Tokens& s = a.size() <= b.size() ? a : b;
  const Tokens& l = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
    std::size_t j = 0, len = 0;
    bool ok = true;
    for (std::size_t i = 0; i < s.size() && ok; ++i) {
      if (!(mask >> i & 1u)) continue;
      while (j < l.size() && l[j] != s[i]) ++j;
      if (j == l.size()) ok = false;
      else {
        ++j;
        ++len;
      }
    }
    if (ok) best = std::max(best, len);
  }
  return best;
}

inline Tokens random_tokens(std::mt19937_64& g, std::size_t max_len, int alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> tok(0, alphabet - 1);
  Tokens out(len(g));
  for (auto& t : out) t = std::string(1, static_cast<char>('a' + tok(g)));
  return out;
}

}  // namespace oracle
