#include "claimnorm/kvconfig.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "claimnorm/error.hpp"

namespace claimnorm {

namespace {

std::string_view strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw Error(Errc::ConfigError, "key '" + key + "' must be " + expected);
}

}  // namespace

bool KvConfig::valid_key(std::string_view key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  char prev = 0;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
    if (!ok || (c == '.' && prev == '.')) return false;
    prev = c;
  }
  return true;
}

KvConfig KvConfig::parse(std::string_view text, std::string_view source) {
  KvConfig config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::size_t end = eol == std::string_view::npos ? text.size() : eol;
    std::string_view line = strip(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line.front() == '#') {
      if (eol == std::string_view::npos) break;
      continue;
    }
    const auto where = std::string(source) + ":" + std::to_string(line_no);
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::ConfigError, where + ": expected 'key = value'");
    }
    const std::string key(strip(line.substr(0, eq)));
    const std::string_view value = strip(line.substr(eq + 1));
    if (!valid_key(key)) throw Error(Errc::ConfigError, where + ": invalid key '" + key + "'");
    if (value.empty()) throw Error(Errc::ConfigError, where + ": missing value for '" + key + "'");
    try {
      config.entries_[key] = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(Errc::ConfigError, where + ": value of '" + key + "' is not a JSON literal");
    }
    if (eol == std::string_view::npos) break;
  }
  return config;
}

KvConfig KvConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ConfigError, "cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void KvConfig::set_text(const std::string& key, std::string_view text) {
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = std::string(text);
  }
  set(key, std::move(value));
}

void KvConfig::set(const std::string& key, nlohmann::json value) {
  if (!valid_key(key)) throw Error(Errc::ConfigError, "invalid key '" + key + "'");
  entries_[key] = std::move(value);
}

void KvConfig::merge(const KvConfig& other) {
  for (const auto& [key, value] : other.entries_) entries_[key] = value;
}

bool KvConfig::contains(const std::string& key) const { return entries_.count(key) != 0; }

const nlohmann::json& KvConfig::at(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(Errc::ConfigError, "missing config key '" + key + "'");
  return it->second;
}

std::string KvConfig::get_string(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_string()) type_error(key, "a string");
  return v.get<std::string>();
}

double KvConfig::get_double(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_number()) type_error(key, "a number");
  return v.get<double>();
}

long long KvConfig::get_int(const std::string& key) const {
  const auto& v = at(key);
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == static_cast<double>(static_cast<long long>(d))) return static_cast<long long>(d);
  }
  type_error(key, "an integer");
}

bool KvConfig::get_bool(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_boolean()) type_error(key, "true or false");
  return v.get<bool>();
}

std::vector<std::string> KvConfig::get_strings(const std::string& key) const {
  const auto& v = at(key);
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) type_error(key, "an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) type_error(key, "an array of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::vector<double> KvConfig::get_doubles(const std::string& key) const {
  const auto& v = at(key);
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) type_error(key, "an array of numbers");
  std::vector<double> out;
  for (const auto& item : v) {
    if (!item.is_number()) type_error(key, "an array of numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  return contains(key) ? get_string(key) : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  return contains(key) ? get_double(key) : fallback;
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
  return contains(key) ? get_int(key) : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  return contains(key) ? get_bool(key) : fallback;
}

std::map<std::string, nlohmann::json> KvConfig::section(const std::string& prefix) const {
  std::map<std::string, nlohmann::json> out;
  const std::string lead = prefix + ".";
  for (auto it = entries_.lower_bound(lead); it != entries_.end(); ++it) {
    if (it->first.compare(0, lead.size(), lead) != 0) break;
    out.emplace(it->first.substr(lead.size()), it->second);
  }
  return out;
}

std::string KvConfig::serialize() const {
  std::string out;
  for (const auto& [key, value] : entries_) {
    out += key;
    out += " = ";
    out += value.dump();
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json KvConfig::to_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& [key, value] : entries_) out[key] = value;
  return out;
}

KvConfig config_from_environment(char** envp) {
  KvConfig config;
  if (envp == nullptr) return config;
  static constexpr std::string_view kPrefix = "CLAIMNORM_";
  for (char** e = envp; *e != nullptr; ++e) {
    const std::string_view entry(*e);
    if (entry.substr(0, kPrefix.size()) != kPrefix) continue;
    const std::size_t eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    const std::string_view name = entry.substr(kPrefix.size(), eq - kPrefix.size());
    std::string key;
    for (std::size_t i = 0; i < name.size(); ++i) {
      if (name[i] == '_' && i + 1 < name.size() && name[i + 1] == '_') {
        key.push_back('.');
        ++i;
      } else {
        key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(name[i]))));
      }
    }
    if (!KvConfig::valid_key(key)) continue;
    config.set_text(key, entry.substr(eq + 1));
  }
  return config;
}

}  // namespace claimnorm
