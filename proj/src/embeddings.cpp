#include "claimnorm/embeddings.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <ostream>
#include <set>
#include <thread>

#include "claimnorm/data.hpp"
#include "claimnorm/error.hpp"
#include "claimnorm/sha256.hpp"

namespace claimnorm::embeddings {

EmbeddingMatrix::EmbeddingMatrix(std::string model_id, std::size_t dim, std::vector<float> values,
                                 bool normalized)
    : model_id_(std::move(model_id)), dim_(dim), values_(std::move(values)), normalized_(normalized) {
  if (dim_ == 0) throw Error(Errc::InvalidArgument, "embedding dimension must be positive");
  if (values_.size() % dim_ != 0) {
    throw Error(Errc::DimensionMismatch, std::to_string(values_.size()) +
                                             " values do not form rows of dimension " +
                                             std::to_string(dim_));
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "embedding contains a non-finite value");
  }
}

EmbeddingMatrix EmbeddingMatrix::from_rows(std::string model_id,
                                           const std::vector<std::vector<float>>& rows,
                                           bool normalized) {
  if (rows.empty()) throw Error(Errc::EmptyInput, "no rows");
  const std::size_t dim = rows.front().size();
  std::vector<float> values;
  values.reserve(rows.size() * dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) {
      throw Error(Errc::DimensionMismatch, "row " + std::to_string(i) + " has dimension " +
                                               std::to_string(rows[i].size()) + ", expected " +
                                               std::to_string(dim));
    }
    values.insert(values.end(), rows[i].begin(), rows[i].end());
  }
  return EmbeddingMatrix(std::move(model_id), dim, std::move(values), normalized);
}

bool is_unit_norm(std::span<const float> row, double tolerance) {
  double sq = 0.0;
  for (float v : row) sq += static_cast<double>(v) * static_cast<double>(v);
  return std::abs(std::sqrt(sq) - 1.0) <= tolerance;
}

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& matrix) {
  std::vector<float> out(matrix.values().size());
  const std::size_t dim = matrix.dim();
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    const auto row = matrix.row(r);
    double sq = 0.0;
    for (float v : row) sq += static_cast<double>(v) * static_cast<double>(v);
    if (sq == 0.0) throw Error(Errc::ZeroVector, "row " + std::to_string(r) + " is all zeros");
    const double norm = std::sqrt(sq);
    for (std::size_t c = 0; c < dim; ++c) {
      out[r * dim + c] = static_cast<float>(static_cast<double>(row[c]) / norm);
    }
  }
  if (matrix.rows() == 0) return EmbeddingMatrix();
  return EmbeddingMatrix(matrix.model_id(), dim, std::move(out), true);
}

// --- registry -----------------------------------------------------------------

ModelRegistry ModelRegistry::defaults() {
  static const ModelRegistry registry = from_config(KvConfig::parse(data::defaults_conf(), "defaults.conf"));
  return registry;
}

ModelRegistry ModelRegistry::from_config(const KvConfig& config) {
  ModelRegistry registry;
  for (const auto& [language, value] : config.section("registry")) {
    if (!value.is_string()) {
      throw Error(Errc::ConfigError, "registry." + language + " must be a string");
    }
    const auto model = value.get<std::string>();
    // An empty model id removes a language from the registry.
    if (!model.empty()) registry.set(language, model);
  }
  return registry;
}

void ModelRegistry::set(std::string language, std::string model_id) {
  entries_[std::move(language)] = std::move(model_id);
}

std::optional<std::string> ModelRegistry::find(std::string_view language) const {
  const auto it = entries_.find(std::string(language));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string ModelRegistry::lookup(std::string_view language) const {
  if (auto model = find(language)) return *model;
  throw Error(Errc::NoModelForLanguage, "no sentence-transformer registered for '" +
                                            std::string(language) + "'");
}

// --- wire protocol -------------------------------------------------------------

std::string make_embed_request(const std::string& model, std::span<const std::string> texts) {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["texts"] = nlohmann::ordered_json::array();
  for (const auto& t : texts) j["texts"].push_back(t);
  return j.dump();
}

EmbedResponse parse_embed_response(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::MalformedResponse, std::string("embedding response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("model") || !j["model"].is_string() || !j.contains("dim") ||
      !j["dim"].is_number_unsigned() || !j.contains("vectors") || !j["vectors"].is_array()) {
    throw Error(Errc::MalformedResponse, "embedding response lacks model/dim/vectors");
  }
  EmbedResponse response;
  response.model = j["model"].get<std::string>();
  response.dim = j["dim"].get<std::size_t>();
  for (const auto& row : j["vectors"]) {
    if (!row.is_array()) throw Error(Errc::MalformedResponse, "vector is not an array");
    std::vector<float> v;
    v.reserve(row.size());
    for (const auto& x : row) {
      if (!x.is_number()) throw Error(Errc::MalformedResponse, "vector entry is not a number");
      v.push_back(static_cast<float>(x.get<double>()));
    }
    if (v.size() != response.dim) {
      throw Error(Errc::DimensionMismatch, "vector of length " + std::to_string(v.size()) +
                                               " in a response declaring dim " +
                                               std::to_string(response.dim));
    }
    response.vectors.push_back(std::move(v));
  }
  return response;
}

std::string make_embed_response(const EmbedResponse& response) {
  nlohmann::ordered_json j;
  j["model"] = response.model;
  j["dim"] = response.dim;
  j["vectors"] = response.vectors;
  return j.dump();
}

// --- vector files ----------------------------------------------------------------

std::string text_key(std::string_view text) { return sha256_hex(text); }

std::string to_jsonl_line(const VectorRecord& record) {
  nlohmann::ordered_json j;
  j["model"] = record.model;
  j["sha256"] = record.sha256;
  j["vector"] = record.vector;
  return j.dump();
}

VectorRecord parse_jsonl_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::IoError, std::string("vector line is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("model") || !j.contains("sha256") || !j.contains("vector") ||
      !j["model"].is_string() || !j["sha256"].is_string() || !j["vector"].is_array()) {
    throw Error(Errc::IoError, "vector line lacks model/sha256/vector");
  }
  VectorRecord rec;
  rec.model = j["model"].get<std::string>();
  rec.sha256 = j["sha256"].get<std::string>();
  rec.vector.reserve(j["vector"].size());
  for (const auto& x : j["vector"]) {
    if (!x.is_number()) throw Error(Errc::IoError, "vector entry is not a number");
    rec.vector.push_back(static_cast<float>(x.get<double>()));
  }
  return rec;
}

std::vector<VectorRecord> read_vector_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open vector file " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<VectorRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) break;  // torn tail
    ++line_no;
    std::string_view line(content.data() + pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    try {
      out.push_back(parse_jsonl_line(line));
    } catch (const Error& e) {
      throw Error(Errc::IoError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_vector_file(std::ostream& out, std::span<const std::string> texts,
                       const EmbeddingMatrix& matrix) {
  if (texts.size() != matrix.rows()) {
    throw Error(Errc::RowCountMismatch, std::to_string(texts.size()) + " texts but " +
                                            std::to_string(matrix.rows()) + " rows");
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto row = matrix.row(i);
    out << to_jsonl_line({matrix.model_id(), text_key(texts[i]), {row.begin(), row.end()}}) << '\n';
  }
}

// --- batching -------------------------------------------------------------------------

EmbeddingMatrix embed_batch(EmbeddingProvider& provider, std::span<const std::string> texts,
                            const std::string& model_id, EmbeddingCache* cache) {
  if (texts.empty()) throw Error(Errc::EmptyInput, "embed_batch needs at least one text");

  std::vector<std::string> keys;
  keys.reserve(texts.size());
  for (const auto& t : texts) keys.push_back(text_key(t));

  std::unordered_map<std::string, std::vector<float>> resolved;
  std::vector<std::string> missing_texts;
  std::vector<std::string> missing_keys;
  std::set<std::string> queued;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (resolved.count(keys[i]) || queued.count(keys[i])) continue;
    if (cache) {
      if (auto hit = cache->get(model_id, keys[i])) {
        resolved.emplace(keys[i], std::move(*hit));
        continue;
      }
    }
    queued.insert(keys[i]);
    missing_texts.push_back(texts[i]);
    missing_keys.push_back(keys[i]);
  }

  if (!missing_texts.empty()) {
    const std::size_t limit = std::max<std::size_t>(1, provider.batch_limit());
    const std::size_t n_chunks = (missing_texts.size() + limit - 1) / limit;
    std::vector<EmbeddingMatrix> results(n_chunks);
    std::vector<std::exception_ptr> errors(n_chunks);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
        const std::size_t begin = c * limit;
        const std::size_t count = std::min(limit, missing_texts.size() - begin);
        try {
          results[c] = provider.embed(std::span<const std::string>(missing_texts).subspan(begin, count),
                                      model_id);
          if (results[c].rows() != count) {
            throw Error(Errc::MalformedResponse, "provider returned " +
                                                     std::to_string(results[c].rows()) + " rows for " +
                                                     std::to_string(count) + " texts");
          }
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
    };
    const std::size_t n_workers = std::min(n_chunks, std::max<std::size_t>(1, provider.max_in_flight()));
    if (n_workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    std::vector<VectorRecord> fresh;
    fresh.reserve(missing_texts.size());
    for (std::size_t c = 0; c < n_chunks; ++c) {
      for (std::size_t r = 0; r < results[c].rows(); ++r) {
        const auto row = results[c].row(r);
        const auto& key = missing_keys[c * limit + r];
        resolved[key].assign(row.begin(), row.end());
        fresh.push_back({model_id, key, {row.begin(), row.end()}});
      }
    }
    if (cache) cache->put(fresh);
  }

  const std::size_t dim = resolved.at(keys.front()).size();
  std::vector<float> values;
  values.reserve(texts.size() * dim);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto& v = resolved.at(keys[i]);
    if (v.size() != dim) {
      throw Error(Errc::DimensionMismatch, "model " + model_id + " produced dimensions " +
                                               std::to_string(dim) + " and " +
                                               std::to_string(v.size()));
    }
    values.insert(values.end(), v.begin(), v.end());
  }
  return EmbeddingMatrix(model_id, dim, std::move(values), false);
}

EmbeddingMatrix Embedder::embed_normalized(std::span<const std::string> texts) const {
  return l2_normalize(embed_batch(provider_, texts, model_id_, cache_));
}

}  // namespace claimnorm::embeddings
