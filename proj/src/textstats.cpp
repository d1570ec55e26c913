#include "claimnorm/textstats.hpp"

#include <algorithm>
#include <map>

#include "claimnorm/data.hpp"
#include "claimnorm/error.hpp"
#include "claimnorm/unicode.hpp"

namespace claimnorm::textstats {

namespace {

bool is_sigil(char32_t c) { return c == U'#' || c == U'@'; }

// Strips P* from both ends of a lowercased token.
std::string strip_token(std::string_view token) {
  const auto cps = unicode::code_points(token);
  std::size_t first = 0;
  std::size_t last = cps.size();
  while (last > first && unicode::is_punctuation(cps[last - 1].value)) --last;
  while (first < last && unicode::is_punctuation(cps[first].value)) {
    if (is_sigil(cps[first].value) && first + 1 < last && unicode::is_word_char(cps[first + 1].value)) {
      break;
    }
    ++first;
  }
  if (first == last) return {};
  const std::size_t begin = cps[first].offset;
  const std::size_t end = cps[last - 1].offset + cps[last - 1].length;
  return std::string(token.substr(begin, end - begin));
}

bool starts_with_scheme(std::string_view s, std::size_t pos, std::size_t* scheme_len) {
  auto lower_eq = [&](std::size_t at, std::string_view lit) {
    if (at + lit.size() > s.size()) return false;
    for (std::size_t i = 0; i < lit.size(); ++i) {
      char c = s[at + i];
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      if (c != lit[i]) return false;
    }
    return true;
  };
  if (lower_eq(pos, "https://")) {
    *scheme_len = 8;
    return true;
  }
  if (lower_eq(pos, "http://")) {
    *scheme_len = 7;
    return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
  const std::string lowered = unicode::to_lower(text);
  const auto cps = unicode::code_points(lowered);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && unicode::is_whitespace(cps[i].value)) ++i;
    if (i == cps.size()) break;
    const std::size_t start = i;
    while (i < cps.size() && !unicode::is_whitespace(cps[i].value)) ++i;
    const std::size_t begin = cps[start].offset;
    const std::size_t end = cps[i - 1].offset + cps[i - 1].length;
    auto token = strip_token(std::string_view(lowered).substr(begin, end - begin));
    if (!token.empty()) tokens.push_back(std::move(token));
  }
  return tokens;
}

FeatureFlags structural_features(std::string_view text) {
  FeatureFlags flags;
  const auto cps = unicode::code_points(text);
  std::size_t url_end = 0;  // URLs do not overlap
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i].value;
    std::size_t scheme_len = 0;
    if (i >= url_end && (c == U'h' || c == U'H') &&
        starts_with_scheme(text, cps[i].offset, &scheme_len)) {
      // The scheme is ASCII, so its bytes and code points coincide.
      std::size_t j = i + scheme_len;
      while (j < cps.size() && !unicode::is_whitespace(cps[j].value)) ++j;
      if (j > i + scheme_len) {
        ++flags.url_count;
        url_end = j;
      }
    }
    if (c == U'#' && i + 1 < cps.size() && unicode::is_word_char(cps[i + 1].value)) {
      ++flags.hashtag_count;
    }
    if (unicode::is_extended_pictographic(c)) ++flags.emoji_count;
  }
  return flags;
}

TokenStats token_stats(const std::vector<corpus::ClaimRecord>& records) {
  if (records.empty()) throw Error(Errc::EmptyInput, "token_stats needs at least one record");
  TokenStats stats;
  stats.n_records = records.size();
  std::size_t post_tokens = 0;
  std::size_t claim_tokens = 0;
  for (const auto& r : records) {
    post_tokens += tokenize_words(r.post).size();
    if (r.gold_claim) {
      claim_tokens += tokenize_words(*r.gold_claim).size();
      ++stats.n_claims;
    }
  }
  stats.avg_post_tokens = static_cast<double>(post_tokens) / static_cast<double>(records.size());
  if (stats.n_claims > 0) {
    stats.avg_claim_tokens = static_cast<double>(claim_tokens) / static_cast<double>(stats.n_claims);
  }
  return stats;
}

StopwordSet parse_stopwords(std::string_view text) {
  StopwordSet out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto word = unicode::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (word.empty() || word.front() == '#') continue;
    out.insert(unicode::to_lower(word));
  }
  return out;
}

const StopwordSet& english_stopwords() {
  static const StopwordSet set = parse_stopwords(data::stopwords_en());
  return set;
}

std::vector<std::pair<std::string, std::size_t>> top_tokens(
    const std::vector<corpus::ClaimRecord>& records, std::size_t n, const StopwordSet& stopwords) {
  if (n == 0) throw Error(Errc::InvalidArgument, "top_tokens needs n >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    if (!r.gold_claim) continue;
    for (auto& tok : tokenize_words(*r.gold_claim)) {
      if (stopwords.count(tok)) continue;
      ++counts[std::move(tok)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > n) ranked.resize(n);
  return ranked;
}

std::optional<std::string> detect_triplicate(std::string_view text) {
  const std::string s = unicode::collapse_whitespace(text);
  if (s.size() < 5 || (s.size() - 2) % 3 != 0) return std::nullopt;
  const std::size_t unit_len = (s.size() - 2) / 3;
  const std::string_view v(s);
  const auto unit = v.substr(0, unit_len);
  if (v[unit_len] != ' ' || v[2 * unit_len + 1] != ' ') return std::nullopt;
  if (v.substr(unit_len + 1, unit_len) != unit || v.substr(2 * unit_len + 2) != unit) {
    return std::nullopt;
  }
  return std::string(unit);
}

}  // namespace claimnorm::textstats
