#include "claimnorm/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "claimnorm/error.hpp"
#include "claimnorm/parallel.hpp"

namespace claimnorm::retrieval {

Accumulation parse_accumulation(std::string_view name) {
  if (name == "f32") return Accumulation::f32;
  if (name == "f64") return Accumulation::f64;
  throw Error(Errc::ConfigError, "accumulation must be f32 or f64, got '" + std::string(name) + "'");
}

std::string_view to_string(Accumulation acc) { return acc == Accumulation::f32 ? "f32" : "f64"; }

double dot(std::span<const float> a, std::span<const float> b, Accumulation acc) {
  if (acc == Accumulation::f64) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return sum;
  }
  float sum = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return static_cast<double>(sum);
}

Index build_index(corpus::PooledCorpus corpus, embeddings::EmbeddingMatrix matrix) {
  if (matrix.rows() != corpus.size()) {
    throw Error(Errc::RowCountMismatch, std::to_string(corpus.size()) + " records but " +
                                            std::to_string(matrix.rows()) + " embedding rows");
  }
  if (!matrix.normalized()) throw Error(Errc::NotNormalized, "index matrix is not L2-normalized");
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    if (!embeddings::is_unit_norm(matrix.row(r))) {
      throw Error(Errc::NotNormalized, "index row " + std::to_string(r) + " is not unit length");
    }
  }
  return Index(std::move(corpus), std::move(matrix));
}

namespace {

bool ranks_before(const RetrievalHit& a, const RetrievalHit& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.row_id < b.row_id;
}

void check_query(const Index& index, std::span<const float> query) {
  if (query.size() != index.dim()) {
    throw Error(Errc::DimensionMismatch, "query has dimension " + std::to_string(query.size()) +
                                             ", index has " + std::to_string(index.dim()));
  }
  if (!embeddings::is_unit_norm(query)) throw Error(Errc::NotNormalized, "query is not unit length");
}

}  // namespace

std::vector<RetrievalHit> top_k(const Index& index, std::span<const float> query, std::size_t k,
                                Accumulation acc) {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");
  if (k > index.size()) {
    throw Error(Errc::KTooLarge, "k = " + std::to_string(k) + " exceeds index size " +
                                     std::to_string(index.size()));
  }
  check_query(index, query);
  std::vector<RetrievalHit> hits(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    hits[r] = {r, dot(index.matrix().row(r), query, acc)};
  }
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), ranks_before);
  hits.resize(k);
  return hits;
}

OverlapReport overlap_audit(const Index& index, const embeddings::EmbeddingMatrix& test_vectors,
                            const OverlapOptions& options) {
  if (!(options.bin_width > 0.0) || options.bin_width > 2.0) {
    throw Error(Errc::ConfigError, "bin width must be in (0, 2]");
  }
  OverlapReport report;
  report.bin_width = options.bin_width;
  const auto n_bins = static_cast<std::size_t>(std::ceil(2.0 / options.bin_width - 1e-9));
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double lower = -1.0 + static_cast<double>(b) * options.bin_width;
    report.histogram.push_back({lower, std::min(1.0, lower + options.bin_width), 0});
  }
  auto thresholds = options.thresholds;
  std::sort(thresholds.begin(), thresholds.end());
  for (double t : thresholds) report.threshold_counts.push_back({t, 0});

  const std::size_t n = test_vectors.rows();
  if (n == 0) return report;
  if (!test_vectors.normalized()) throw Error(Errc::NotNormalized, "test vectors are not L2-normalized");

  report.best.resize(n);
  parallel_for(n, options.jobs, [&](std::size_t i) {
    report.best[i] = top_k(index, test_vectors.row(i), 1, options.accumulation).front();
  });

  for (const auto& hit : report.best) {
    auto bin = static_cast<long long>(std::floor((hit.similarity + 1.0) / options.bin_width));
    bin = std::clamp<long long>(bin, 0, static_cast<long long>(n_bins) - 1);
    ++report.histogram[static_cast<std::size_t>(bin)].count;
    for (auto& tc : report.threshold_counts) {
      if (hit.similarity >= tc.threshold) ++tc.count;
    }
  }
  return report;
}

nlohmann::ordered_json to_json(const OverlapReport& report) {
  nlohmann::ordered_json j;
  j["n"] = report.best.size();
  j["bin_width"] = report.bin_width;
  auto bins = nlohmann::ordered_json::array();
  for (const auto& b : report.histogram) {
    bins.push_back({{"lower", b.lower}, {"upper", b.upper}, {"count", b.count}});
  }
  j["histogram"] = std::move(bins);
  auto counts = nlohmann::ordered_json::array();
  for (const auto& tc : report.threshold_counts) {
    counts.push_back({{"threshold", tc.threshold}, {"count", tc.count}});
  }
  j["threshold_counts"] = std::move(counts);
  auto best = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.best.size(); ++i) {
    best.push_back({{"test_row", i},
                    {"row_id", report.best[i].row_id},
                    {"similarity", report.best[i].similarity}});
  }
  j["best"] = std::move(best);
  return j;
}

}  // namespace claimnorm::retrieval
