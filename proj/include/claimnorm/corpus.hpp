#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace claimnorm::corpus {

enum class Split { train, dev, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

inline constexpr std::string_view kPostColumn = "post";
inline constexpr std::string_view kGoldColumn = "normalized claim";

// One post and, on labeled splits, its gold normalization. `id` is the
// 0-based data-row index in the source file.
struct ClaimRecord {
  std::size_t id = 0;
  std::string post;
  std::optional<std::string> gold_claim;
  std::string language;
  Split split = Split::train;

  bool operator==(const ClaimRecord&) const = default;
};

// Labeled train+dev records used as the retrieval source. Train rows come
// first, then dev rows, each in file order; ids are renumbered 0..n-1.
struct PooledCorpus {
  std::string language;
  std::vector<ClaimRecord> records;

  std::size_t size() const { return records.size(); }
};

struct RejectedRow {
  std::size_t row = 0;   // 1-based data row
  std::size_t line = 0;  // 1-based line in the file
  std::string reason;    // "EmptyPost" or "MissingGold"
};

struct SplitLoad {
  std::vector<ClaimRecord> records;
  std::vector<RejectedRow> rejected;
  std::size_t total_rows = 0;
};

// Parses a split from CSV text, keeping rows that fail validation out of
// `records` and listing them in `rejected`. Rows of train/dev splits need a
// non-blank gold claim. Throws MissingColumn or EncodingError for problems
// with the file as a whole.
SplitLoad parse_split_csv(std::string_view text, std::string_view language, Split split);
SplitLoad read_split(const std::filesystem::path& path, std::string_view language, Split split);

// Strict variant: any rejected row raises EmptyPost (or MissingGold) with
// the offending row numbers.
std::vector<ClaimRecord> load_split(const std::filesystem::path& path, std::string_view language,
                                    Split split);

// Returns the accepted records, or throws TooManyInvalidRows when more than
// `max_rejected_fraction` of the rows were rejected.
std::vector<ClaimRecord> accept_split(const SplitLoad& load, double max_rejected_fraction = 0.10);

// Writes records in the same dialect read_split expects. The gold column is
// emitted when any record carries a gold claim.
void write_split(std::ostream& out, const std::vector<ClaimRecord>& records);

std::filesystem::path split_path(const std::filesystem::path& data_dir, std::string_view language,
                                 Split split);

PooledCorpus pool(const std::vector<ClaimRecord>& train, const std::vector<ClaimRecord>& dev);

struct ValidationReport {
  std::size_t n_records = 0;
  std::size_t empty_posts = 0;
  std::size_t duplicate_exact_posts = 0;  // unordered pairs of identical posts
  std::vector<std::vector<std::size_t>> duplicate_groups;
  std::size_t gold_present = 0;
  std::size_t gold_absent = 0;
  std::vector<RejectedRow> rejected;  // filled by callers that loaded from disk
};

ValidationReport validate(const std::vector<ClaimRecord>& records);

nlohmann::ordered_json to_json(const ValidationReport& report);

}  // namespace claimnorm::corpus
