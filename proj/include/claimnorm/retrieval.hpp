#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "claimnorm/corpus.hpp"
#include "claimnorm/embeddings.hpp"

namespace claimnorm::retrieval {

// Precision of the dot-product accumulator. f64 is bit-reproducible across
// platforms for a fixed summation order; f32 is the default.
enum class Accumulation { f32, f64 };

Accumulation parse_accumulation(std::string_view name);
std::string_view to_string(Accumulation acc);

struct RetrievalHit {
  std::size_t row_id = 0;
  double similarity = 0.0;

  bool operator==(const RetrievalHit&) const = default;
};

double dot(std::span<const float> a, std::span<const float> b, Accumulation acc);

// Immutable exact-search index over the posts of a pooled corpus.
class Index {
 public:
  const corpus::PooledCorpus& corpus() const { return corpus_; }
  const embeddings::EmbeddingMatrix& matrix() const { return matrix_; }
  const std::string& model_id() const { return matrix_.model_id(); }
  std::size_t size() const { return corpus_.size(); }
  std::size_t dim() const { return matrix_.dim(); }

 private:
  friend Index build_index(corpus::PooledCorpus corpus, embeddings::EmbeddingMatrix matrix);
  Index(corpus::PooledCorpus corpus, embeddings::EmbeddingMatrix matrix)
      : corpus_(std::move(corpus)), matrix_(std::move(matrix)) {}

  corpus::PooledCorpus corpus_;
  embeddings::EmbeddingMatrix matrix_;
};

// `matrix` row i must be the unit-normalized embedding of corpus record i.
// Throws RowCountMismatch or NotNormalized.
Index build_index(corpus::PooledCorpus corpus, embeddings::EmbeddingMatrix matrix);

// The k rows most similar to `query`, by descending similarity and then
// ascending row id. Throws KTooLarge when k exceeds the index size.
std::vector<RetrievalHit> top_k(const Index& index, std::span<const float> query, std::size_t k,
                                Accumulation acc = Accumulation::f32);

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

struct ThresholdCount {
  double threshold = 0.0;
  std::size_t count = 0;  // rows whose best similarity is >= threshold
};

struct OverlapOptions {
  double bin_width = 0.05;
  std::vector<double> thresholds = {0.6, 0.8, 0.9, 0.99};
  Accumulation accumulation = Accumulation::f32;
  std::size_t jobs = 1;
};

// Best pooled match for every test row, a histogram of those similarities
// over [-1, 1], and how many rows reach each threshold.
struct OverlapReport {
  std::vector<RetrievalHit> best;
  double bin_width = 0.05;
  std::vector<HistogramBin> histogram;
  std::vector<ThresholdCount> threshold_counts;
};

OverlapReport overlap_audit(const Index& index, const embeddings::EmbeddingMatrix& test_vectors,
                            const OverlapOptions& options = {});

nlohmann::ordered_json to_json(const OverlapReport& report);

}  // namespace claimnorm::retrieval
