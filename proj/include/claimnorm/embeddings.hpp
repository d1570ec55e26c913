#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "claimnorm/kvconfig.hpp"

namespace claimnorm::embeddings {

// Row-major block of dense vectors. Row i belongs to the i-th text of the
// list it was computed for.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  // Throws DimensionMismatch when values.size() is not a multiple of dim,
  // InvalidArgument for dim == 0 or non-finite entries.
  EmbeddingMatrix(std::string model_id, std::size_t dim, std::vector<float> values,
                  bool normalized = false);

  static EmbeddingMatrix from_rows(std::string model_id, const std::vector<std::vector<float>>& rows,
                                   bool normalized = false);

  const std::string& model_id() const { return model_id_; }
  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  bool normalized() const { return normalized_; }
  bool empty() const { return values_.empty(); }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values_).subspan(i * dim_, dim_);
  }
  const std::vector<float>& values() const { return values_; }

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::string model_id_;
  std::size_t dim_ = 0;
  std::vector<float> values_;
  bool normalized_ = false;
};

inline constexpr double kUnitNormTolerance = 1e-4;

// Scales every row to unit L2 norm. Throws ZeroVector on an all-zero row.
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& matrix);

bool is_unit_norm(std::span<const float> row, double tolerance = kUnitNormTolerance);

// --- model registry -------------------------------------------------------

inline constexpr std::array<std::string_view, 13> kMonolingualLanguages = {
    "ara", "deu", "eng", "fra", "por", "spa", "pol", "hi", "mr", "pa", "ta", "tha", "msa"};
inline constexpr std::array<std::string_view, 7> kZeroShotLanguages = {
    "ces", "ell", "kor", "te", "bn", "ron", "nld"};

// Language code -> sentence-transformer model id. Languages without an entry
// run in zero-shot mode.
class ModelRegistry {
 public:
  // The shipped registry (registry.* keys of data/defaults.conf).
  static ModelRegistry defaults();
  // Entries under `registry.` in `config`.
  static ModelRegistry from_config(const KvConfig& config);

  void set(std::string language, std::string model_id);
  std::optional<std::string> find(std::string_view language) const;

  // Throws NoModelForLanguage, which callers treat as "use zero-shot".
  std::string lookup(std::string_view language) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

// --- wire protocol ----------------------------------------------------------
//
// POST /embed   {"model": str, "texts": [str]}
//         200   {"model": str, "dim": int, "vectors": [[float]]}

struct EmbedResponse {
  std::string model;
  std::size_t dim = 0;
  std::vector<std::vector<float>> vectors;
};

std::string make_embed_request(const std::string& model, std::span<const std::string> texts);

// Throws MalformedResponse for bad JSON or missing fields and
// DimensionMismatch when a row's length differs from `dim`.
EmbedResponse parse_embed_response(std::string_view body);

std::string make_embed_response(const EmbedResponse& response);

// --- vector files -------------------------------------------------------------
//
// JSON Lines, one object per text:
//   {"model": str, "sha256": hex of the UTF-8 text, "vector": [float]}

struct VectorRecord {
  std::string model;
  std::string sha256;
  std::vector<float> vector;
};

std::string text_key(std::string_view text);  // sha256 hex of the text bytes

std::string to_jsonl_line(const VectorRecord& record);
VectorRecord parse_jsonl_line(std::string_view line);

// Reads every complete line. An unterminated final line is a write in
// progress and is skipped.
std::vector<VectorRecord> read_vector_file(const std::filesystem::path& path);

void write_vector_file(std::ostream& out, std::span<const std::string> texts,
                       const EmbeddingMatrix& matrix);

// --- providers ----------------------------------------------------------------

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  // Embeds at most batch_limit() texts. Row i corresponds to texts[i].
  virtual EmbeddingMatrix embed(std::span<const std::string> texts, const std::string& model_id) = 0;

  virtual std::size_t batch_limit() const = 0;
  virtual std::size_t max_in_flight() const { return 1; }

  // Number of embed() calls served so far.
  std::size_t calls() const { return calls_.load(); }

 protected:
  void count_call() { calls_.fetch_add(1); }

 private:
  std::atomic<std::size_t> calls_{0};
};

struct HttpProviderOptions {
  std::size_t batch_limit = 64;
  std::size_t max_in_flight = 4;
  std::chrono::seconds timeout{60};
  // Retries while the server answers 503 (model still loading).
  int max_loading_retries = 5;
  std::chrono::milliseconds loading_backoff{1000};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

// Client of the embedding sidecar protocol above.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(std::string base_url, HttpProviderOptions options = {});

  EmbeddingMatrix embed(std::span<const std::string> texts, const std::string& model_id) override;
  std::size_t batch_limit() const override { return options_.batch_limit; }
  std::size_t max_in_flight() const override { return options_.max_in_flight; }

 private:
  std::string scheme_host_port_;
  std::string path_prefix_;
  HttpProviderOptions options_;
  std::mutex dims_mutex_;
  std::map<std::string, std::size_t> dims_;
};

// Serves precomputed vectors keyed by (model, sha256 of text).
class FileEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(const std::filesystem::path& path, std::size_t batch_limit = 64);
  explicit FileEmbeddingProvider(const std::vector<VectorRecord>& records, std::size_t batch_limit = 64);

  // Throws MissingVector naming the hash of the first text not covered.
  EmbeddingMatrix embed(std::span<const std::string> texts, const std::string& model_id) override;
  std::size_t batch_limit() const override { return batch_limit_; }

  std::size_t size() const { return vectors_.size(); }

 private:
  void add(const VectorRecord& record);

  std::size_t batch_limit_;
  std::unordered_map<std::string, std::vector<float>> vectors_;  // model + '\n' + sha
  std::map<std::string, std::size_t> dims_;
};

// "file:PATH" or an http(s) URL.
std::unique_ptr<EmbeddingProvider> make_provider(std::string_view spec, HttpProviderOptions options = {});

// --- cache ------------------------------------------------------------------------

// Vectors keyed by (model, sha256). With a backing file, entries are loaded
// at construction and every put is appended as one JSONL line; later lines
// win over earlier ones. Writes are serialized; lookups may run concurrently.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::filesystem::path path);

  std::optional<std::vector<float>> get(const std::string& model, const std::string& sha) const;
  void put(const std::vector<VectorRecord>& records);

  std::size_t size() const;
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  mutable std::shared_mutex map_mutex_;
  std::mutex file_mutex_;
  std::unordered_map<std::string, std::vector<float>> entries_;
  std::optional<std::filesystem::path> path_;
};

// Embeds `texts`, serving what it can from `cache` and sending the rest to
// the provider in chunks of batch_limit(), up to max_in_flight() at a time.
// Fresh vectors are written back to the cache. Throws DimensionMismatch when
// rows for one model disagree on dimension.
EmbeddingMatrix embed_batch(EmbeddingProvider& provider, std::span<const std::string> texts,
                            const std::string& model_id, EmbeddingCache* cache = nullptr);

// Provider + cache + model bundled for callers that only want unit vectors.
class Embedder {
 public:
  Embedder(EmbeddingProvider& provider, std::string model_id, EmbeddingCache* cache = nullptr)
      : provider_(provider), model_id_(std::move(model_id)), cache_(cache) {}

  EmbeddingMatrix embed_normalized(std::span<const std::string> texts) const;

  const std::string& model_id() const { return model_id_; }
  EmbeddingProvider& provider() const { return provider_; }

 private:
  EmbeddingProvider& provider_;
  std::string model_id_;
  EmbeddingCache* cache_;
};

}  // namespace claimnorm::embeddings
