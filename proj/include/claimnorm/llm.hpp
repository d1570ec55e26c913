#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace claimnorm::llm {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view name);  // throws MalformedResponse

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatParams {
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  int max_tokens = 128;
  std::chrono::seconds timeout{60};
  int max_retries = 3;

  void validate() const;  // throws ConfigError
};

struct Usage {
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  long long total_tokens = 0;
};

struct ChatResult {
  std::string text;
  Usage usage;
  int attempts = 1;
};

nlohmann::ordered_json messages_to_json(std::span<const ChatMessage> messages);
std::vector<ChatMessage> messages_from_json(const nlohmann::json& array);

// SHA-256 of the canonical JSON {"model","temperature","messages"}.
std::string record_replay_key(std::span<const ChatMessage> messages, const ChatParams& params);

// --- transcripts ------------------------------------------------------------

struct Transcript {
  std::string key;
  std::string model;
  double temperature = 0.0;
  std::vector<ChatMessage> messages;
  std::string response;
  double latency_s = 0.0;
  Usage usage;
  int attempts = 1;
};

std::string to_jsonl_line(const Transcript& transcript);
Transcript parse_transcript_line(std::string_view line);
std::vector<Transcript> read_transcripts(const std::filesystem::path& path);

// Thread-safe JSONL appender.
class TranscriptLog {
 public:
  explicit TranscriptLog(const std::filesystem::path& path);

  void append(const Transcript& transcript);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

// --- clients ------------------------------------------------------------------

class ChatClient {
 public:
  virtual ~ChatClient() = default;

  // Returns the first choice's text. When a transcript log is attached every
  // successful call is appended to it.
  std::string chat(std::span<const ChatMessage> messages, const ChatParams& params);

  virtual ChatResult complete(std::span<const ChatMessage> messages, const ChatParams& params) = 0;

  void set_transcript_log(TranscriptLog* log) { log_ = log; }

  // Calls that reached complete().
  std::size_t calls() const { return calls_.load(); }

 private:
  TranscriptLog* log_ = nullptr;
  std::atomic<std::size_t> calls_{0};
};

// Offline client for tests. Canned answers a fixed text; Echo answers the
// post carried by the last user message; Fail throws RateLimited.
class MockChatClient : public ChatClient {
 public:
  enum class Mode { Canned, Echo, Fail };

  explicit MockChatClient(Mode mode, std::string canned = {})
      : mode_(mode), canned_(std::move(canned)) {}

  ChatResult complete(std::span<const ChatMessage> messages, const ChatParams& params) override;

 private:
  Mode mode_;
  std::string canned_;
};

// Answers from recorded transcripts. A request without a recording throws
// ReplayMiss.
class ReplayChatClient : public ChatClient {
 public:
  explicit ReplayChatClient(const std::filesystem::path& path);
  explicit ReplayChatClient(const std::vector<Transcript>& transcripts);

  ChatResult complete(std::span<const ChatMessage> messages, const ChatParams& params) override;

  std::size_t size() const { return responses_.size(); }

 private:
  std::unordered_map<std::string, std::string> responses_;
};

// Forwards each distinct request once and serves repeats from memory.
class MemoChatClient : public ChatClient {
 public:
  explicit MemoChatClient(ChatClient& inner) : inner_(inner) {}

  ChatResult complete(std::span<const ChatMessage> messages, const ChatParams& params) override;

 private:
  ChatClient& inner_;
  std::mutex mutex_;
  std::unordered_map<std::string, ChatResult> memo_;
};

// Bounds the number of concurrent holders.
class Semaphore {
 public:
  explicit Semaphore(std::size_t permits) : permits_(permits) {}
  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t permits_;
};

using Clock = std::function<std::chrono::steady_clock::time_point()>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Sliding one-minute window over request start times.
class RateLimiter {
 public:
  RateLimiter(std::size_t requests_per_minute, Clock clock, Sleeper sleep);
  void acquire();

 private:
  std::size_t limit_;
  Clock clock_;
  Sleeper sleep_;
  std::mutex mutex_;
  std::deque<std::chrono::steady_clock::time_point> starts_;
};

struct HttpChatOptions {
  std::string base_url = "https://api.openai.com";
  std::string api_key;
  std::size_t max_concurrent = 4;
  std::size_t requests_per_minute = 500;
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;
  double max_jitter = 0.5;  // each delay is scaled by 1 + U[0, max_jitter)
  std::uint64_t jitter_seed = 0x5eed;
  Sleeper sleep;  // defaults to this_thread::sleep_for
  Clock clock;    // defaults to steady_clock::now
};

// OpenAI-compatible POST {base_url}/v1/chat/completions.
//
// 429, 5xx and timeouts are retried up to params.max_retries times with
// exponential backoff. 401/403 throw AuthError and other 4xx throw HttpError,
// both without retry. Exhausted retries throw RateLimited (or Timeout when the
// last attempt timed out).
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpChatOptions options);

  ChatResult complete(std::span<const ChatMessage> messages, const ChatParams& params) override;

  // Delays slept so far, in order, across all calls.
  std::vector<std::chrono::milliseconds> backoff_history() const;

 private:
  std::chrono::milliseconds next_delay(int retry, std::chrono::milliseconds floor);

  HttpChatOptions options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  Semaphore in_flight_;
  RateLimiter limiter_;
  mutable std::mutex rng_mutex_;
  std::mt19937_64 rng_;
  std::vector<std::chrono::milliseconds> history_;
};

std::string make_chat_request(std::span<const ChatMessage> messages, const ChatParams& params);

// Throws MalformedResponse when the body lacks choices[0].message.content or
// the content is empty.
ChatResult parse_chat_response(std::string_view body);

}  // namespace claimnorm::llm
