#include <httplib.h>

#include <thread>

#include "claimnorm/embeddings.hpp"
#include "claimnorm/error.hpp"

namespace claimnorm::embeddings {

namespace {

std::pair<std::string, std::string> split_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(Errc::ConfigError, "provider URL '" + std::string(url) + "' lacks a scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), ""};
  std::string prefix(url.substr(path_start));
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {std::string(url.substr(0, path_start)), prefix};
}

}  // namespace

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url, HttpProviderOptions options)
    : options_(std::move(options)) {
  std::tie(scheme_host_port_, path_prefix_) = split_url(base_url);
  if (options_.batch_limit == 0) throw Error(Errc::ConfigError, "batch limit must be positive");
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

EmbeddingMatrix HttpEmbeddingProvider::embed(std::span<const std::string> texts,
                                             const std::string& model_id) {
  if (texts.empty()) throw Error(Errc::EmptyInput, "no texts to embed");
  if (texts.size() > options_.batch_limit) {
    throw Error(Errc::InvalidArgument, "batch of " + std::to_string(texts.size()) +
                                           " exceeds the provider limit of " +
                                           std::to_string(options_.batch_limit));
  }
  const std::string body = make_embed_request(model_id, texts);
  const std::string path = path_prefix_ + "/embed";

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);

  auto delay = options_.loading_backoff;
  for (int attempt = 0;; ++attempt) {
    count_call();
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      throw Error(Errc::ProviderUnreachable,
                  scheme_host_port_ + path + ": " + httplib::to_string(res.error()));
    }
    if (res->status == 503 && attempt < options_.max_loading_retries) {
      options_.sleep(delay);
      delay *= 2;
      continue;
    }
    if (res->status != 200) {
      throw Error(Errc::HttpError, scheme_host_port_ + path + " answered HTTP " +
                                       std::to_string(res->status) + ": " + res->body);
    }
    auto response = parse_embed_response(res->body);
    if (response.model != model_id) {
      throw Error(Errc::MalformedResponse,
                  "asked for model " + model_id + " but the response is for " + response.model);
    }
    if (response.vectors.size() != texts.size()) {
      throw Error(Errc::MalformedResponse, "got " + std::to_string(response.vectors.size()) +
                                               " vectors for " + std::to_string(texts.size()) +
                                               " texts");
    }
    {
      std::lock_guard lock(dims_mutex_);
      const auto [it, inserted] = dims_.emplace(model_id, response.dim);
      if (!inserted && it->second != response.dim) {
        throw Error(Errc::DimensionMismatch, "model " + model_id + " changed dimension from " +
                                                 std::to_string(it->second) + " to " +
                                                 std::to_string(response.dim));
      }
    }
    return EmbeddingMatrix::from_rows(model_id, response.vectors);
  }
}

FileEmbeddingProvider::FileEmbeddingProvider(const std::filesystem::path& path, std::size_t batch_limit)
    : FileEmbeddingProvider(read_vector_file(path), batch_limit) {}

FileEmbeddingProvider::FileEmbeddingProvider(const std::vector<VectorRecord>& records,
                                             std::size_t batch_limit)
    : batch_limit_(batch_limit) {
  if (batch_limit_ == 0) throw Error(Errc::ConfigError, "batch limit must be positive");
  for (const auto& rec : records) add(rec);
}

void FileEmbeddingProvider::add(const VectorRecord& record) {
  if (record.vector.empty()) throw Error(Errc::DimensionMismatch, "empty vector for " + record.sha256);
  const auto [it, inserted] = dims_.emplace(record.model, record.vector.size());
  if (!inserted && it->second != record.vector.size()) {
    throw Error(Errc::DimensionMismatch, "vector file mixes dimensions " + std::to_string(it->second) +
                                             " and " + std::to_string(record.vector.size()) +
                                             " for model " + record.model);
  }
  vectors_[record.model + '\n' + record.sha256] = record.vector;
}

EmbeddingMatrix FileEmbeddingProvider::embed(std::span<const std::string> texts,
                                             const std::string& model_id) {
  if (texts.empty()) throw Error(Errc::EmptyInput, "no texts to embed");
  count_call();
  const auto dim_it = dims_.find(model_id);
  std::vector<float> values;
  for (const auto& text : texts) {
    const auto key = text_key(text);
    const auto it = vectors_.find(model_id + '\n' + key);
    if (it == vectors_.end() || dim_it == dims_.end()) {
      throw Error(Errc::MissingVector, "no vector for text sha256 " + key + " under model " + model_id);
    }
    values.insert(values.end(), it->second.begin(), it->second.end());
  }
  return EmbeddingMatrix(model_id, dim_it->second, std::move(values), false);
}

std::unique_ptr<EmbeddingProvider> make_provider(std::string_view spec, HttpProviderOptions options) {
  if (spec.substr(0, 5) == "file:") {
    return std::make_unique<FileEmbeddingProvider>(std::filesystem::path(std::string(spec.substr(5))),
                                                   options.batch_limit);
  }
  if (spec.substr(0, 7) == "http://" || spec.substr(0, 8) == "https://") {
    return std::make_unique<HttpEmbeddingProvider>(std::string(spec), std::move(options));
  }
  throw Error(Errc::ConfigError,
              "provider must be 'file:PATH' or an http(s) URL, got '" + std::string(spec) + "'");
}

}  // namespace claimnorm::embeddings
