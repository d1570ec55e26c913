#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "claimnorm/corpus.hpp"

namespace claimnorm::textstats {

struct FeatureFlags {
  std::size_t hashtag_count = 0;
  std::size_t emoji_count = 0;
  std::size_t url_count = 0;

  bool operator==(const FeatureFlags&) const = default;
};

struct TokenStats {
  double avg_post_tokens = 0.0;
  double avg_claim_tokens = 0.0;
  std::size_t n_records = 0;
  std::size_t n_claims = 0;
};

// Word-level tokenizer shared by the EDA and by METEOR.
//
// Lowercases, splits on Unicode whitespace and strips punctuation (P*) from
// both ends of each token. A leading '#' or '@' is kept when the next
// character is a word character, so "#covid19," becomes "#covid19". Tokens
// left empty are dropped.
std::vector<std::string> tokenize_words(std::string_view text);

// Hashtag: '#' followed by a word character. URL: "http://" or "https://"
// followed by at least one non-space character. Emoji: a code point with the
// Extended_Pictographic property.
FeatureFlags structural_features(std::string_view text);

// Throws EmptyInput when `records` is empty.
TokenStats token_stats(const std::vector<corpus::ClaimRecord>& records);

using StopwordSet = std::unordered_set<std::string>;

StopwordSet parse_stopwords(std::string_view text);
const StopwordSet& english_stopwords();

// Token counts over gold claims, stopwords removed, highest count first and
// ties in ascending byte order.
std::vector<std::pair<std::string, std::size_t>> top_tokens(
    const std::vector<corpus::ClaimRecord>& records, std::size_t n, const StopwordSet& stopwords);

// The unit U when the whitespace-normalized text is exactly "U U U".
std::optional<std::string> detect_triplicate(std::string_view text);

}  // namespace claimnorm::textstats
