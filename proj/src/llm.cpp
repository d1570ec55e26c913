#include "claimnorm/llm.hpp"

#include <algorithm>

#include "claimnorm/error.hpp"
#include "claimnorm/sha256.hpp"

namespace claimnorm::llm {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view name) {
  if (name == "system") return Role::System;
  if (name == "user") return Role::User;
  if (name == "assistant") return Role::Assistant;
  throw Error(Errc::MalformedResponse, "unknown message role '" + std::string(name) + "'");
}

void ChatParams::validate() const {
  if (model.empty()) throw Error(Errc::ConfigError, "llm model must not be empty");
  if (!(temperature >= 0.0)) throw Error(Errc::ConfigError, "temperature must be >= 0");
  if (max_tokens <= 0) throw Error(Errc::ConfigError, "max_tokens must be positive");
  if (timeout.count() <= 0) throw Error(Errc::ConfigError, "timeout must be positive");
  if (max_retries < 0) throw Error(Errc::ConfigError, "max_retries must be >= 0");
}

nlohmann::ordered_json messages_to_json(std::span<const ChatMessage> messages) {
  auto array = nlohmann::ordered_json::array();
  for (const auto& m : messages) {
    array.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return array;
}

std::vector<ChatMessage> messages_from_json(const nlohmann::json& array) {
  if (!array.is_array()) throw Error(Errc::MalformedResponse, "messages must be an array");
  std::vector<ChatMessage> out;
  for (const auto& m : array) {
    if (!m.is_object() || !m.contains("role") || !m.contains("content") || !m["role"].is_string() ||
        !m["content"].is_string()) {
      throw Error(Errc::MalformedResponse, "message needs string role and content");
    }
    out.push_back({parse_role(m["role"].get<std::string>()), m["content"].get<std::string>()});
  }
  return out;
}

std::string record_replay_key(std::span<const ChatMessage> messages, const ChatParams& params) {
  nlohmann::ordered_json canonical;
  canonical["model"] = params.model;
  canonical["temperature"] = params.temperature;
  canonical["messages"] = messages_to_json(messages);
  return sha256_hex(canonical.dump());
}

// --- transcripts ------------------------------------------------------------

std::string to_jsonl_line(const Transcript& t) {
  nlohmann::ordered_json j;
  j["key"] = t.key;
  j["model"] = t.model;
  j["temperature"] = t.temperature;
  j["messages"] = messages_to_json(t.messages);
  j["response"] = t.response;
  j["latency_s"] = t.latency_s;
  j["usage"] = {{"prompt_tokens", t.usage.prompt_tokens},
                {"completion_tokens", t.usage.completion_tokens},
                {"total_tokens", t.usage.total_tokens}};
  j["attempts"] = t.attempts;
  return j.dump();
}

Transcript parse_transcript_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("transcript line: ") + e.what());
  }
  if (!j.is_object() || !j.contains("key") || !j.contains("response") || !j["key"].is_string() ||
      !j["response"].is_string()) {
    throw Error(Errc::MalformedResponse, "transcript line needs string key and response");
  }
  Transcript t;
  t.key = j["key"].get<std::string>();
  t.response = j["response"].get<std::string>();
  t.model = j.value("model", "");
  t.temperature = j.value("temperature", 0.0);
  if (j.contains("messages")) t.messages = messages_from_json(j["messages"]);
  t.latency_s = j.value("latency_s", 0.0);
  if (j.contains("usage") && j["usage"].is_object()) {
    t.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0LL);
    t.usage.completion_tokens = j["usage"].value("completion_tokens", 0LL);
    t.usage.total_tokens = j["usage"].value("total_tokens", 0LL);
  }
  t.attempts = j.value("attempts", 1);
  return t;
}

std::vector<Transcript> read_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open transcript file " + path.string());
  std::vector<Transcript> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_transcript_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.message());
    }
  }
  return out;
}

TranscriptLog::TranscriptLog(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::app) {
  if (!out_) throw Error(Errc::IoError, "cannot open transcript log " + path.string());
}

void TranscriptLog::append(const Transcript& transcript) {
  const std::string line = to_jsonl_line(transcript) + '\n';
  std::lock_guard lock(mutex_);
  out_ << line;
  out_.flush();
  ++count_;
}

std::size_t TranscriptLog::size() const {
  std::lock_guard lock(mutex_);
  return count_;
}

// --- clients ------------------------------------------------------------------

std::string ChatClient::chat(std::span<const ChatMessage> messages, const ChatParams& params) {
  calls_.fetch_add(1);
  const auto start = std::chrono::steady_clock::now();
  ChatResult result = complete(messages, params);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  if (result.text.empty()) throw Error(Errc::MalformedResponse, "empty completion");
  if (log_ != nullptr) {
    Transcript t;
    t.key = record_replay_key(messages, params);
    t.model = params.model;
    t.temperature = params.temperature;
    t.messages.assign(messages.begin(), messages.end());
    t.response = result.text;
    t.latency_s = elapsed.count();
    t.usage = result.usage;
    t.attempts = result.attempts;
    log_->append(t);
  }
  return result.text;
}

ChatResult MockChatClient::complete(std::span<const ChatMessage> messages, const ChatParams&) {
  switch (mode_) {
    case Mode::Canned:
      return {canned_, {}, 1};
    case Mode::Fail:
      throw Error(Errc::RateLimited, "mock client configured to fail");
    case Mode::Echo: {
      const auto it = std::find_if(messages.rbegin(), messages.rend(),
                                   [](const ChatMessage& m) { return m.role == Role::User; });
      if (it == messages.rend()) throw Error(Errc::MalformedResponse, "no user message to echo");
      // The post sits between the first ": " and the last newline of the
      // user template.
      std::string_view text = it->content;
      if (const auto colon = text.find(": "); colon != std::string_view::npos) {
        text.remove_prefix(colon + 2);
      }
      if (const auto nl = text.rfind('\n'); nl != std::string_view::npos) text = text.substr(0, nl);
      return {std::string(text.empty() ? it->content : text), {}, 1};
    }
  }
  return {};
}

ReplayChatClient::ReplayChatClient(const std::filesystem::path& path)
    : ReplayChatClient(read_transcripts(path)) {}

ReplayChatClient::ReplayChatClient(const std::vector<Transcript>& transcripts) {
  for (const auto& t : transcripts) responses_[t.key] = t.response;
}

ChatResult ReplayChatClient::complete(std::span<const ChatMessage> messages, const ChatParams& params) {
  const auto key = record_replay_key(messages, params);
  const auto it = responses_.find(key);
  if (it == responses_.end()) throw Error(Errc::ReplayMiss, "no recorded response for request " + key);
  return {it->second, {}, 1};
}

ChatResult MemoChatClient::complete(std::span<const ChatMessage> messages, const ChatParams& params) {
  const auto key = record_replay_key(messages, params);
  {
    std::lock_guard lock(mutex_);
    if (const auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  ChatResult result{inner_.chat(messages, params), {}, 1};
  std::lock_guard lock(mutex_);
  return memo_.emplace(key, std::move(result)).first->second;
}

void Semaphore::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return permits_ > 0; });
  --permits_;
}

void Semaphore::release() {
  {
    std::lock_guard lock(mutex_);
    ++permits_;
  }
  cv_.notify_one();
}

RateLimiter::RateLimiter(std::size_t requests_per_minute, Clock clock, Sleeper sleep)
    : limit_(requests_per_minute), clock_(std::move(clock)), sleep_(std::move(sleep)) {}

void RateLimiter::acquire() {
  if (limit_ == 0) return;
  constexpr auto window = std::chrono::minutes(1);
  std::lock_guard lock(mutex_);
  for (;;) {
    const auto now = clock_();
    while (!starts_.empty() && now - starts_.front() >= window) starts_.pop_front();
    if (starts_.size() < limit_) {
      starts_.push_back(now);
      return;
    }
    auto wait = std::chrono::ceil<std::chrono::milliseconds>(starts_.front() + window - now);
    sleep_(std::max(wait, std::chrono::milliseconds(1)));
  }
}

}  // namespace claimnorm::llm
