#include <fstream>

#include "claimnorm/embeddings.hpp"
#include "claimnorm/error.hpp"

namespace claimnorm::embeddings {

namespace {

std::string cache_key(const std::string& model, const std::string& sha) { return model + '\n' + sha; }

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(*path_)) {
    for (auto& rec : read_vector_file(*path_)) {
      entries_[cache_key(rec.model, rec.sha256)] = std::move(rec.vector);
    }
  } else if (path_->has_parent_path()) {
    std::filesystem::create_directories(path_->parent_path());
  }
}

std::optional<std::vector<float>> EmbeddingCache::get(const std::string& model,
                                                      const std::string& sha) const {
  std::shared_lock lock(map_mutex_);
  const auto it = entries_.find(cache_key(model, sha));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(const std::vector<VectorRecord>& records) {
  if (records.empty()) return;
  std::lock_guard file_lock(file_mutex_);
  if (path_) {
    // Lines are assembled up front so each reaches the file in one piece.
    std::string block;
    for (const auto& rec : records) {
      block += to_jsonl_line(rec);
      block += '\n';
    }
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    if (!out) throw Error(Errc::IoError, "cannot append to cache " + path_->string());
    out.write(block.data(), static_cast<std::streamsize>(block.size()));
    out.flush();
    if (!out) throw Error(Errc::IoError, "write to cache " + path_->string() + " failed");
  }
  std::unique_lock lock(map_mutex_);
  for (const auto& rec : records) entries_[cache_key(rec.model, rec.sha256)] = rec.vector;
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(map_mutex_);
  return entries_.size();
}

}  // namespace claimnorm::embeddings
