#pragma once

// Brute-force reference for exact-match METEOR on short token lists. Walks
// every injective matching of equal tokens, keeps those of maximum size and
// returns the fewest chunks among them.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct Result {
  std::size_t m = 0;
  std::size_t chunks = 0;
  double score = 0.0;
};

inline std::size_t chunks_of(std::vector<std::pair<std::size_t, std::size_t>> pairs) {
  std::sort(pairs.begin(), pairs.end());
  std::size_t chunks = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool continues = i > 0 && pairs[i].first == pairs[i - 1].first + 1 &&
                           pairs[i].second == pairs[i - 1].second + 1;
    if (!continues) ++chunks;
  }
  return chunks;
}

inline double score_of(std::size_t m, std::size_t hyp_len, std::size_t ref_len, std::size_t chunks) {
  if (m == 0) return 0.0;
  const double p = static_cast<double>(m) / static_cast<double>(hyp_len);
  const double r = static_cast<double>(m) / static_cast<double>(ref_len);
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(chunks) / static_cast<double>(m);
  return fmean * (1.0 - 0.5 * frag * frag * frag);
}

inline Result meteor(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  std::vector<std::pair<std::size_t, std::size_t>> current;
  std::vector<bool> used(ref.size(), false);
  std::size_t best_m = 0;
  std::size_t best_chunks = std::numeric_limits<std::size_t>::max();

  auto walk = [&](auto&& self, std::size_t i) -> void {
    if (i == hyp.size()) {
      const std::size_t m = current.size();
      const std::size_t c = chunks_of(current);
      if (m > best_m || (m == best_m && c < best_chunks)) {
        best_m = m;
        best_chunks = c;
      }
      return;
    }
    self(self, i + 1);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (used[j] || hyp[i] != ref[j]) continue;
      used[j] = true;
      current.emplace_back(i, j);
      self(self, i + 1);
      current.pop_back();
      used[j] = false;
    }
  };
  walk(walk, 0);
  if (best_m == 0) return {0, 0, 0.0};
  return {best_m, best_chunks, score_of(best_m, hyp.size(), ref.size(), best_chunks)};
}

}  // namespace oracle
