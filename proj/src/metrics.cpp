#include "claimnorm/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include "claimnorm/error.hpp"
#include "claimnorm/textstats.hpp"

namespace claimnorm::metrics {

std::size_t count_chunks(std::span<const std::pair<std::size_t, std::size_t>> mapping) {
  std::size_t chunks = 0;
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    if (i == 0 || mapping[i].first != mapping[i - 1].first + 1 ||
        mapping[i].second != mapping[i - 1].second + 1) {
      ++chunks;
    }
  }
  return chunks;
}

namespace {

constexpr long kUnmatched = -1;
constexpr std::size_t kNodeBudget = 5'000'000;

// One matching stage over the tokens left unmatched by earlier stages.
// hyp_match[i] is the ref position matched to hyp token i, or kUnmatched.
class Stage {
 public:
  Stage(const std::vector<std::string>& hyp_keys, const std::vector<std::string>& ref_keys,
        std::vector<long>& hyp_match, std::vector<bool>& ref_used)
      : hyp_match_(hyp_match), ref_used_(ref_used) {
    std::map<std::string, int> ids;
    std::map<int, std::size_t> hyp_count;
    std::map<std::string, std::vector<std::size_t>> free_refs;
    for (std::size_t r = 0; r < ref_keys.size(); ++r) {
      if (!ref_used_[r]) free_refs[ref_keys[r]].push_back(r);
    }
    hyp_class_.assign(hyp_keys.size(), -1);
    for (std::size_t i = 0; i < hyp_keys.size(); ++i) {
      if (hyp_match_[i] != kUnmatched) continue;
      const auto fr = free_refs.find(hyp_keys[i]);
      if (fr == free_refs.end()) continue;
      auto [it, inserted] = ids.emplace(hyp_keys[i], static_cast<int>(class_refs_.size()));
      if (inserted) class_refs_.push_back(fr->second);
      hyp_class_[i] = it->second;
    }
    need_.assign(class_refs_.size(), 0);
    hyp_left_.assign(class_refs_.size(), 0);
    for (int c : hyp_class_) {
      if (c >= 0) ++hyp_left_[static_cast<std::size_t>(c)];
    }
    for (std::size_t c = 0; c < class_refs_.size(); ++c) {
      need_[c] = std::min(hyp_left_[c], class_refs_[c].size());
      size_ += need_[c];
    }
  }

  std::size_t size() const { return size_; }

  void solve(std::size_t exhaustive_limit) {
    if (size_ == 0) return;
    best_ = hyp_match_;
    best_chunks_ = std::numeric_limits<std::size_t>::max();
    greedy_ = true;
    search(0, std::nullopt, 0);
    if (size_ <= exhaustive_limit) {
      greedy_ = false;
      nodes_ = 0;
      search(0, std::nullopt, 0);
    }
    hyp_match_ = best_;
    for (long r : hyp_match_) {
      if (r != kUnmatched) ref_used_[static_cast<std::size_t>(r)] = true;
    }
  }

 private:
  using Prev = std::optional<std::pair<std::size_t, std::size_t>>;

  static std::size_t chunks_after(const Prev& prev, std::size_t h, std::size_t r, std::size_t chunks) {
    const bool extends = prev && prev->first + 1 == h && prev->second + 1 == r;
    return extends ? chunks : chunks + 1;
  }

  // Depth-first over hyp positions. In greedy mode only the first branch at
  // each position is taken.
  bool search(std::size_t i, Prev prev, std::size_t chunks) {
    if (chunks >= best_chunks_) return false;
    if (!greedy_ && ++nodes_ > kNodeBudget) return true;
    if (i == hyp_match_.size()) {
      best_chunks_ = chunks;
      best_ = hyp_match_;
      return greedy_;
    }
    if (hyp_match_[i] != kUnmatched && hyp_class_[i] < 0) {
      const auto r = static_cast<std::size_t>(hyp_match_[i]);
      return search(i + 1, std::make_pair(i, r), chunks_after(prev, i, r, chunks));
    }
    const int c = hyp_class_[i];
    if (c < 0) return search(i + 1, prev, chunks);

    const auto cu = static_cast<std::size_t>(c);
    --hyp_left_[cu];
    bool stop = false;
    if (need_[cu] > 0) {
      // Extending the current chunk first finds good bounds early.
      std::vector<std::size_t> order;
      if (prev && prev->first + 1 == i) {
        for (std::size_t r : class_refs_[cu]) {
          if (r == prev->second + 1 && !ref_used_[r]) order.push_back(r);
        }
      }
      for (std::size_t r : class_refs_[cu]) {
        if (!ref_used_[r] && (order.empty() || r != order.front())) order.push_back(r);
      }
      if (greedy_ && !order.empty()) order.resize(1);
      for (std::size_t r : order) {
        ref_used_[r] = true;
        --need_[cu];
        hyp_match_[i] = static_cast<long>(r);
        stop = search(i + 1, std::make_pair(i, r), chunks_after(prev, i, r, chunks));
        hyp_match_[i] = kUnmatched;
        ++need_[cu];
        ref_used_[r] = false;
        if (stop || greedy_) break;
      }
    }
    if (!stop && !(greedy_ && need_[cu] > 0) && hyp_left_[cu] >= need_[cu]) {
      stop = search(i + 1, prev, chunks);
    }
    ++hyp_left_[cu];
    return stop;
  }

  std::vector<long>& hyp_match_;
  std::vector<bool>& ref_used_;
  std::vector<int> hyp_class_;
  std::vector<std::vector<std::size_t>> class_refs_;
  std::vector<std::size_t> need_;
  std::vector<std::size_t> hyp_left_;
  std::size_t size_ = 0;
  std::vector<long> best_;
  std::size_t best_chunks_ = 0;
  bool greedy_ = true;
  std::size_t nodes_ = 0;
};

std::vector<std::string> stems(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(porter_stem(t));
  return out;
}

}  // namespace

Alignment align_unigrams(std::span<const std::string> hyp, std::span<const std::string> ref,
                         const MeteorOptions& options) {
  std::vector<long> hyp_match(hyp.size(), kUnmatched);
  std::vector<bool> ref_used(ref.size(), false);

  const std::vector<std::string> hyp_exact(hyp.begin(), hyp.end());
  const std::vector<std::string> ref_exact(ref.begin(), ref.end());
  Stage(hyp_exact, ref_exact, hyp_match, ref_used).solve(options.exhaustive_limit);
  if (options.stem) {
    Stage(stems(hyp), stems(ref), hyp_match, ref_used).solve(options.exhaustive_limit);
  }

  Alignment a;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    if (hyp_match[i] != kUnmatched) a.mapping.emplace_back(i, static_cast<std::size_t>(hyp_match[i]));
  }
  a.m = a.mapping.size();
  a.chunks = count_chunks(a.mapping);
  return a;
}

MeteorBreakdown meteor_from_counts(std::size_t m, std::size_t hyp_len, std::size_t ref_len,
                                   std::size_t chunks) {
  MeteorBreakdown b;
  b.m = m;
  b.hyp_len = hyp_len;
  b.ref_len = ref_len;
  b.chunks = chunks;
  if (m == 0 || hyp_len == 0 || ref_len == 0) return b;
  const double md = static_cast<double>(m);
  b.precision = md / static_cast<double>(hyp_len);
  b.recall = md / static_cast<double>(ref_len);
  b.fmean = 10.0 * b.precision * b.recall / (b.recall + 9.0 * b.precision);
  const double frag = static_cast<double>(chunks) / md;
  b.penalty = 0.5 * frag * frag * frag;
  b.score = b.fmean * (1.0 - b.penalty);
  return b;
}

MeteorBreakdown meteor_tokens(std::span<const std::string> hyp, std::span<const std::string> ref,
                              const MeteorOptions& options) {
  const Alignment a = align_unigrams(hyp, ref, options);
  return meteor_from_counts(a.m, hyp.size(), ref.size(), a.chunks);
}

MeteorBreakdown meteor(std::string_view candidate, std::string_view reference, const MeteorOptions& options) {
  const auto hyp = textstats::tokenize_words(candidate);
  const auto ref = textstats::tokenize_words(reference);
  return meteor_tokens(hyp, ref, options);
}

double corpus_meteor(std::span<const std::pair<std::string, std::string>> pairs,
                     const MeteorOptions& options) {
  if (pairs.empty()) throw Error(Errc::EmptyInput, "no sentence pairs to score");
  double sum = 0.0;
  for (const auto& [cand, ref] : pairs) sum += meteor(cand, ref, options).score;
  return sum / static_cast<double>(pairs.size());
}

namespace {

// Mean over rows of `from` of the best cosine to any row of `to`.
double directional(const embeddings::EmbeddingMatrix& from, const embeddings::EmbeddingMatrix& to) {
  double sum = 0.0;
  for (std::size_t i = 0; i < from.rows(); ++i) {
    const auto a = from.row(i);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < to.rows(); ++j) {
      const auto b = to.row(j);
      double dot = 0.0;
      for (std::size_t d = 0; d < a.size(); ++d) dot += static_cast<double>(a[d]) * static_cast<double>(b[d]);
      best = std::max(best, dot);
    }
    sum += best;
  }
  return sum / static_cast<double>(from.rows());
}

void check_tokens(const embeddings::EmbeddingMatrix& m, const char* side) {
  if (m.rows() == 0) throw Error(Errc::EmptyInput, std::string(side) + " has no token vectors");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (!embeddings::is_unit_norm(m.row(i))) {
      throw Error(Errc::NotNormalized, std::string(side) + " token " + std::to_string(i) + " is not unit length");
    }
  }
}

}  // namespace

BertScoreLite bertscore_lite(const embeddings::EmbeddingMatrix& candidate,
                             const embeddings::EmbeddingMatrix& reference) {
  check_tokens(candidate, "candidate");
  check_tokens(reference, "reference");
  if (candidate.dim() != reference.dim()) {
    throw Error(Errc::DimensionMismatch, "candidate dim " + std::to_string(candidate.dim()) +
                                             " vs reference dim " + std::to_string(reference.dim()));
  }
  BertScoreLite s;
  s.precision = directional(candidate, reference);
  s.recall = directional(reference, candidate);
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

}  // namespace claimnorm::metrics
