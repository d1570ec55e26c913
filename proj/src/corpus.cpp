#include "claimnorm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "claimnorm/csv.hpp"
#include "claimnorm/error.hpp"
#include "claimnorm/unicode.hpp"

namespace claimnorm::corpus {

namespace {

std::string header_name(std::string_view raw) {
  std::size_t b = 0;
  std::size_t e = raw.size();
  while (b < e && (raw[b] == ' ' || raw[b] == '\t')) ++b;
  while (e > b && (raw[e - 1] == ' ' || raw[e - 1] == '\t')) --e;
  return std::string(raw.substr(b, e - b));
}

std::string row_list(const std::vector<RejectedRow>& rows) {
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i) out += ", ";
    out += "row " + std::to_string(rows[i].row) + " (line " + std::to_string(rows[i].line) + ")";
  }
  return out;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  throw Error(Errc::InvalidArgument, "unknown split '" + std::string(name) + "'");
}

SplitLoad parse_split_csv(std::string_view text, std::string_view language, Split split) {
  if (const auto bad = unicode::first_invalid_utf8(text)) {
    throw Error(Errc::EncodingError, "invalid UTF-8 at byte offset " + std::to_string(*bad));
  }
  const auto rows = csv::parse(text);
  if (rows.empty()) throw Error(Errc::MissingColumn, "file has no header row");

  std::optional<std::size_t> post_col;
  std::optional<std::size_t> gold_col;
  const auto& header = rows.front().fields;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = header_name(header[i]);
    if (name == kPostColumn && !post_col) post_col = i;
    if (name == kGoldColumn && !gold_col) gold_col = i;
  }
  const bool labeled = split != Split::test;
  if (!post_col) throw Error(Errc::MissingColumn, "header lacks column 'post'");
  if (labeled && !gold_col) {
    throw Error(Errc::MissingColumn, "header lacks column 'normalized claim'");
  }

  SplitLoad load;
  load.total_rows = rows.size() - 1;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& fields = rows[r].fields;
    const std::size_t data_row = r;  // 1-based
    auto field = [&](std::size_t col) -> std::string {
      return col < fields.size() ? fields[col] : std::string{};
    };
    ClaimRecord rec;
    rec.id = data_row - 1;
    rec.post = field(*post_col);
    rec.language = std::string(language);
    rec.split = split;
    if (gold_col) {
      auto gold = field(*gold_col);
      if (!unicode::is_blank(gold)) rec.gold_claim = std::move(gold);
    }
    if (unicode::is_blank(rec.post)) {
      load.rejected.push_back({data_row, rows[r].line, "EmptyPost"});
      continue;
    }
    if (labeled && !rec.gold_claim) {
      load.rejected.push_back({data_row, rows[r].line, "MissingGold"});
      continue;
    }
    load.records.push_back(std::move(rec));
  }
  return load;
}

SplitLoad read_split(const std::filesystem::path& path, std::string_view language, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_split_csv(buf.str(), language, split);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

std::vector<ClaimRecord> load_split(const std::filesystem::path& path, std::string_view language,
                                    Split split) {
  auto load = read_split(path, language, split);
  if (!load.rejected.empty()) {
    const bool empty_post = std::any_of(load.rejected.begin(), load.rejected.end(),
                                        [](const RejectedRow& r) { return r.reason == "EmptyPost"; });
    throw Error(empty_post ? Errc::EmptyPost : Errc::MissingGold,
                path.string() + ": rejected " + row_list(load.rejected));
  }
  return std::move(load.records);
}

std::vector<ClaimRecord> accept_split(const SplitLoad& load, double max_rejected_fraction) {
  if (load.total_rows > 0) {
    const double fraction =
        static_cast<double>(load.rejected.size()) / static_cast<double>(load.total_rows);
    if (fraction > max_rejected_fraction) {
      throw Error(Errc::TooManyInvalidRows,
                  std::to_string(load.rejected.size()) + " of " + std::to_string(load.total_rows) +
                      " rows rejected: " + row_list(load.rejected));
    }
  }
  return load.records;
}

void write_split(std::ostream& out, const std::vector<ClaimRecord>& records) {
  const bool with_gold = std::any_of(records.begin(), records.end(),
                                     [](const ClaimRecord& r) { return r.gold_claim.has_value(); });
  if (with_gold) {
    csv::write_row(out, {std::string(kPostColumn), std::string(kGoldColumn)});
  } else {
    csv::write_row(out, {std::string(kPostColumn)});
  }
  for (const auto& r : records) {
    if (with_gold) {
      csv::write_row(out, {r.post, r.gold_claim.value_or("")});
    } else {
      csv::write_row(out, {r.post});
    }
  }
}

std::filesystem::path split_path(const std::filesystem::path& data_dir, std::string_view language,
                                 Split split) {
  return data_dir / std::string(language) / (std::string(to_string(split)) + ".csv");
}

PooledCorpus pool(const std::vector<ClaimRecord>& train, const std::vector<ClaimRecord>& dev) {
  PooledCorpus pooled;
  if (!train.empty()) {
    pooled.language = train.front().language;
  } else if (!dev.empty()) {
    pooled.language = dev.front().language;
  }
  pooled.records.reserve(train.size() + dev.size());
  for (const auto* part : {&train, &dev}) {
    for (const auto& rec : *part) {
      if (rec.language != pooled.language) {
        throw Error(Errc::LanguageMismatch, "record " + std::to_string(rec.id) + " has language '" +
                                                rec.language + "', expected '" + pooled.language + "'");
      }
      if (!rec.gold_claim || unicode::is_blank(*rec.gold_claim)) {
        throw Error(Errc::MissingGold, std::string(to_string(rec.split)) + " record " +
                                           std::to_string(rec.id) + " has no gold claim");
      }
      ClaimRecord copy = rec;
      copy.id = pooled.records.size();
      pooled.records.push_back(std::move(copy));
    }
  }
  return pooled;
}

ValidationReport validate(const std::vector<ClaimRecord>& records) {
  ValidationReport report;
  report.n_records = records.size();
  std::map<std::string_view, std::vector<std::size_t>> by_post;
  for (const auto& r : records) {
    if (unicode::is_blank(r.post)) ++report.empty_posts;
    if (r.gold_claim && !unicode::is_blank(*r.gold_claim)) {
      ++report.gold_present;
    } else {
      ++report.gold_absent;
    }
    by_post[r.post].push_back(r.id);
  }
  for (auto& [post, ids] : by_post) {
    if (ids.size() < 2) continue;
    report.duplicate_exact_posts += ids.size() * (ids.size() - 1) / 2;
    report.duplicate_groups.push_back(ids);
  }
  std::sort(report.duplicate_groups.begin(), report.duplicate_groups.end());
  return report;
}

nlohmann::ordered_json to_json(const ValidationReport& report) {
  nlohmann::ordered_json j;
  j["n_records"] = report.n_records;
  j["empty_posts"] = report.empty_posts;
  j["duplicate_exact_posts"] = report.duplicate_exact_posts;
  j["duplicate_groups"] = report.duplicate_groups;
  j["gold_present"] = report.gold_present;
  j["gold_absent"] = report.gold_absent;
  auto rejected = nlohmann::ordered_json::array();
  for (const auto& r : report.rejected) {
    rejected.push_back({{"row", r.row}, {"line", r.line}, {"reason", r.reason}});
  }
  j["rejected"] = std::move(rejected);
  return j;
}

}  // namespace claimnorm::corpus
