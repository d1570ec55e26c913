#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace claimnorm {

// Flat key-value configuration with dotted key namespaces.
//
// File grammar, one entry per line:
//
//   # comment
//   llm.model = "gpt-4o-mini"
//   pipeline.fewshot_n = 3
//   audit.thresholds = [0.6, 0.8]
//
// Keys match [a-z0-9_]+(\.[a-z0-9_]+)*. Values are JSON literals. Blank lines
// and lines whose first non-space character is '#' are skipped. There are no
// sections and no includes; a repeated key overrides the earlier one.
class KvConfig {
 public:
  static KvConfig parse(std::string_view text, std::string_view source = "<string>");
  static KvConfig from_file(const std::filesystem::path& path);

  // Sets a value from its textual form. Text that is not a JSON literal is
  // stored as a plain string, which is what flags and env vars usually hold.
  void set_text(const std::string& key, std::string_view text);
  void set(const std::string& key, nlohmann::json value);

  // Entries of `other` override entries of this config.
  void merge(const KvConfig& other);

  bool contains(const std::string& key) const;
  const nlohmann::json& at(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Entries under `prefix.` with the prefix removed.
  std::map<std::string, nlohmann::json> section(const std::string& prefix) const;

  const std::map<std::string, nlohmann::json>& entries() const { return entries_; }

  // Canonical text form: sorted keys, compact JSON values.
  std::string serialize() const;
  nlohmann::ordered_json to_json() const;

  static bool valid_key(std::string_view key);

 private:
  std::map<std::string, nlohmann::json> entries_;
};

// Collects CLAIMNORM_* variables from the environment. The variable
// CLAIMNORM_LLM__BASE_URL maps to the key llm.base_url.
KvConfig config_from_environment(char** envp);

}  // namespace claimnorm
