#include <httplib.h>

#include <cmath>
#include <thread>

#include "claimnorm/error.hpp"
#include "claimnorm/llm.hpp"

namespace claimnorm::llm {

std::string make_chat_request(std::span<const ChatMessage> messages, const ChatParams& params) {
  nlohmann::ordered_json j;
  j["model"] = params.model;
  j["messages"] = messages_to_json(messages);
  j["temperature"] = params.temperature;
  j["max_tokens"] = params.max_tokens;
  return j.dump();
}

ChatResult parse_chat_response(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("chat response is not JSON: ") + e.what());
  }
  const auto* content = [&]() -> const nlohmann::json* {
    if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
      return nullptr;
    }
    const auto& choice = j["choices"][0];
    if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) return nullptr;
    const auto& message = choice["message"];
    if (!message.contains("content") || !message["content"].is_string()) return nullptr;
    return &message["content"];
  }();
  if (content == nullptr) throw Error(Errc::MalformedResponse, "chat response lacks choices[0].message.content");
  ChatResult result;
  result.text = content->get<std::string>();
  if (result.text.empty()) throw Error(Errc::MalformedResponse, "chat response content is empty");
  if (j.contains("usage") && j["usage"].is_object()) {
    const auto& u = j["usage"];
    result.usage.prompt_tokens = u.value("prompt_tokens", 0LL);
    result.usage.completion_tokens = u.value("completion_tokens", 0LL);
    result.usage.total_tokens = u.value("total_tokens", 0LL);
  }
  return result;
}

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::ConfigError, "LLM base URL '" + url + "' lacks a scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

bool is_timeout(httplib::Error e) {
  return e == httplib::Error::Read || e == httplib::Error::Write || e == httplib::Error::ConnectionTimeout;
}

class PermitGuard {
 public:
  explicit PermitGuard(Semaphore& s) : s_(s) { s_.acquire(); }
  ~PermitGuard() { s_.release(); }
  PermitGuard(const PermitGuard&) = delete;
  PermitGuard& operator=(const PermitGuard&) = delete;

 private:
  Semaphore& s_;
};

}  // namespace

HttpChatClient::HttpChatClient(HttpChatOptions options)
    : options_([&] {
        if (!options.sleep) {
          options.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
        }
        if (!options.clock) options.clock = [] { return std::chrono::steady_clock::now(); };
        return std::move(options);
      }()),
      in_flight_(std::max<std::size_t>(1, options_.max_concurrent)),
      limiter_(options_.requests_per_minute, options_.clock, options_.sleep),
      rng_(options_.jitter_seed) {
  std::tie(scheme_host_port_, path_prefix_) = split_url(options_.base_url);
  if (options_.backoff_factor < 1.0) throw Error(Errc::ConfigError, "backoff factor must be >= 1");
  if (options_.max_jitter < 0.0) throw Error(Errc::ConfigError, "jitter must be >= 0");
}

std::chrono::milliseconds HttpChatClient::next_delay(int retry, std::chrono::milliseconds floor) {
  double jitter = 0.0;
  {
    std::lock_guard lock(rng_mutex_);
    if (options_.max_jitter > 0.0) {
      jitter = std::uniform_real_distribution<double>(0.0, options_.max_jitter)(rng_);
    }
  }
  const double ms = static_cast<double>(options_.backoff_base.count()) *
                    std::pow(options_.backoff_factor, retry) * (1.0 + jitter);
  return std::max(floor, std::chrono::milliseconds(static_cast<long long>(std::llround(ms))));
}

std::vector<std::chrono::milliseconds> HttpChatClient::backoff_history() const {
  std::lock_guard lock(rng_mutex_);
  return history_;
}

ChatResult HttpChatClient::complete(std::span<const ChatMessage> messages, const ChatParams& params) {
  params.validate();
  if (messages.empty()) throw Error(Errc::InvalidArgument, "no messages to send");
  const std::string body = make_chat_request(messages, params);
  const std::string path = path_prefix_ + "/v1/chat/completions";

  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  PermitGuard permit(in_flight_);
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(params.timeout);
  client.set_read_timeout(params.timeout);
  client.set_write_timeout(params.timeout);

  std::chrono::milliseconds last_delay{0};
  for (int attempt = 1;; ++attempt) {
    limiter_.acquire();
    auto res = client.Post(path, headers, body, "application/json");

    Errc failure;
    std::string detail;
    std::chrono::milliseconds server_hint{0};
    if (!res) {
      if (!is_timeout(res.error())) {
        throw Error(Errc::ProviderUnreachable,
                    scheme_host_port_ + path + ": " + httplib::to_string(res.error()));
      }
      failure = Errc::Timeout;
      detail = httplib::to_string(res.error());
    } else if (res->status == 200) {
      ChatResult result = parse_chat_response(res->body);
      result.attempts = attempt;
      return result;
    } else if (res->status == 401 || res->status == 403) {
      throw Error(Errc::AuthError, "chat endpoint answered HTTP " + std::to_string(res->status));
    } else if (res->status == 429 || res->status >= 500) {
      failure = Errc::RateLimited;
      detail = "HTTP " + std::to_string(res->status);
      if (res->has_header("Retry-After")) {
        try {
          server_hint = std::chrono::seconds(std::stol(res->get_header_value("Retry-After")));
        } catch (const std::exception&) {
        }
      }
    } else {
      throw Error(Errc::HttpError, "chat endpoint answered HTTP " + std::to_string(res->status) + ": " +
                                       res->body);
    }

    if (attempt > params.max_retries) {
      throw Error(failure, "giving up after " + std::to_string(attempt) + " attempts (" + detail + ")");
    }
    last_delay = next_delay(attempt - 1, std::max(last_delay, server_hint));
    {
      std::lock_guard lock(rng_mutex_);
      history_.push_back(last_delay);
    }
    options_.sleep(last_delay);
  }
}

}  // namespace claimnorm::llm
