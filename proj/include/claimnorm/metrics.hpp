#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "claimnorm/embeddings.hpp"

namespace claimnorm::metrics {

// Porter suffix stripper (reference implementation rules). Words that are not entirely lowercase ASCII
// letters are returned unchanged.
std::string porter_stem(std::string_view word);

struct MeteorOptions {
  bool stem = false;  // add a Porter stem stage after the exact stage
  // Stages with at most this many matches get a provably chunk-minimal
  // alignment; larger stages use a greedy left-to-right alignment.
  std::size_t exhaustive_limit = 12;
};

struct Alignment {
  std::size_t m = 0;
  std::size_t chunks = 0;
  std::vector<std::pair<std::size_t, std::size_t>> mapping;  // (hyp, ref), ascending hyp
};

// Number of maximal runs in `mapping` (sorted by hyp) that are contiguous in
// both hyp and ref.
std::size_t count_chunks(std::span<const std::pair<std::size_t, std::size_t>> mapping);

Alignment align_unigrams(std::span<const std::string> hyp, std::span<const std::string> ref,
                         const MeteorOptions& options = {});

struct MeteorBreakdown {
  std::size_t m = 0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

// P = m/hyp_len, R = m/ref_len, Fmean = 10PR/(R+9P),
// penalty = 0.5 (chunks/m)^3, score = Fmean (1 - penalty). All zero when m = 0.
MeteorBreakdown meteor_from_counts(std::size_t m, std::size_t hyp_len, std::size_t ref_len,
                                   std::size_t chunks);

MeteorBreakdown meteor_tokens(std::span<const std::string> hyp, std::span<const std::string> ref,
                              const MeteorOptions& options = {});

// Tokenizes both sides with textstats::tokenize_words.
MeteorBreakdown meteor(std::string_view candidate, std::string_view reference,
                       const MeteorOptions& options = {});

// Mean sentence score over (candidate, reference) pairs. Throws EmptyInput.
double corpus_meteor(std::span<const std::pair<std::string, std::string>> pairs,
                     const MeteorOptions& options = {});

struct BertScoreLite {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Greedy token matching over unit token vectors: recall averages, over
// reference tokens, the best cosine to any candidate token; precision does
// the same from the candidate side. Throws EmptyInput, DimensionMismatch or
// NotNormalized.
BertScoreLite bertscore_lite(const embeddings::EmbeddingMatrix& candidate,
                             const embeddings::EmbeddingMatrix& reference);

}  // namespace claimnorm::metrics
