#include <doctest.h>

#include <atomic>
#include <thread>

#include "claimnorm/error.hpp"
#include "claimnorm/llm.hpp"
#include "claimnorm/sha256.hpp"
#include "test_util.hpp"

using namespace claimnorm;
using namespace claimnorm::llm;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::InvalidArgument;
}

std::vector<ChatMessage> sample_messages(const std::string& post = "the moon is cheese") {
  return {{Role::System, "You normalize claims."},
          {Role::User, "Identify the central claim in the given post: " + post + "\nLet's think step by step."}};
}

std::string ok_body(const std::string& text) {
  nlohmann::json j = {{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}}}}},
                      {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 3}, {"total_tokens", 13}}}};
  return j.dump();
}

// Chat endpoint answering with a scripted list of statuses, then 200.
struct ChatStub {
  testutil::StubServer stub;
  std::vector<int> script;
  std::atomic<std::size_t> requests{0};
  std::string last_auth;
  nlohmann::json last_body;
  std::string retry_after;
  std::string content = "The moon is made of cheese.";

  ChatStub() {
    stub.server().Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const auto n = requests++;
      last_auth = req.get_header_value("Authorization");
      last_body = nlohmann::json::parse(req.body);
      if (n < script.size()) {
        res.status = script[n];
        if (!retry_after.empty()) res.set_header("Retry-After", retry_after);
        res.set_content("{\"error\":{\"message\":\"scripted\"}}", "application/json");
        return;
      }
      res.set_content(ok_body(content), "application/json");
    });
    stub.start();
  }
};

HttpChatOptions stub_options(const std::string& url, std::vector<std::chrono::milliseconds>* slept = nullptr) {
  HttpChatOptions o;
  o.base_url = url;
  o.api_key = "sk-test";
  o.sleep = [slept](std::chrono::milliseconds d) {
    if (slept) slept->push_back(d);
  };
  return o;
}

}  // namespace

TEST_CASE("roles and params") {
  CHECK(parse_role("system") == Role::System);
  CHECK(to_string(Role::Assistant) == "assistant");
  CHECK(code_of([] { parse_role("tool"); }) == Errc::MalformedResponse);
  ChatParams p;
  CHECK_NOTHROW(p.validate());
  p.temperature = -0.1;
  CHECK(code_of([&] { p.validate(); }) == Errc::ConfigError);
  p = {};
  p.max_tokens = 0;
  CHECK(code_of([&] { p.validate(); }) == Errc::ConfigError);
  p = {};
  p.max_retries = -1;
  CHECK(code_of([&] { p.validate(); }) == Errc::ConfigError);
}

TEST_CASE("message json round trip") {
  const auto msgs = sample_messages("quote \" and ünïcode");
  const auto j = messages_to_json(msgs);
  CHECK(j[0]["role"] == "system");
  CHECK(messages_from_json(nlohmann::json::parse(j.dump())) == msgs);
}

TEST_CASE("replay key") {
  const auto a = sample_messages();
  ChatParams p;
  const auto key = record_replay_key(a, p);
  CHECK(key.size() == 64);
  CHECK(key == record_replay_key(a, p));
  nlohmann::ordered_json canonical;
  canonical["model"] = p.model;
  canonical["temperature"] = p.temperature;
  canonical["messages"] = messages_to_json(a);
  CHECK(key == sha256_hex(canonical.dump()));

  auto reordered = a;
  std::swap(reordered[0], reordered[1]);
  CHECK(key != record_replay_key(reordered, p));
  CHECK(key != record_replay_key(sample_messages("other"), p));
  ChatParams other = p;
  other.model = "gpt-4o";
  CHECK(key != record_replay_key(a, other));
  other = p;
  other.temperature = 0.7;
  CHECK(key != record_replay_key(a, other));
  other = p;
  other.max_tokens = 7;  // not part of the key
  CHECK(key == record_replay_key(a, other));
}

TEST_CASE("mock client") {
  ChatParams p;
  MockChatClient canned(MockChatClient::Mode::Canned, "fixed");
  CHECK(canned.chat(sample_messages(), p) == "fixed");
  MockChatClient echo(MockChatClient::Mode::Echo);
  CHECK(echo.chat(sample_messages("a post: with colon"), p) == "a post: with colon");
  CHECK(echo.calls() == 1);
  MockChatClient fail(MockChatClient::Mode::Fail);
  CHECK(code_of([&] { fail.chat(sample_messages(), p); }) == Errc::RateLimited);
  MockChatClient empty(MockChatClient::Mode::Canned, "");
  CHECK(code_of([&] { empty.chat(sample_messages(), p); }) == Errc::MalformedResponse);
}

TEST_CASE("transcripts record and replay") {
  testutil::TempDir dir;
  ChatParams p;
  {
    TranscriptLog log(dir / "t.jsonl");
    MockChatClient echo(MockChatClient::Mode::Echo);
    echo.set_transcript_log(&log);
    for (int i = 0; i < 5; ++i) echo.chat(sample_messages("post " + std::to_string(i)), p);
    CHECK(log.size() == 5);
  }
  const auto transcripts = read_transcripts(dir / "t.jsonl");
  REQUIRE(transcripts.size() == 5);
  CHECK(transcripts[2].response == "post 2");
  CHECK(transcripts[2].key == record_replay_key(sample_messages("post 2"), p));
  CHECK(transcripts[2].messages == sample_messages("post 2"));
  const auto line = to_jsonl_line(transcripts[0]);
  CHECK(to_jsonl_line(parse_transcript_line(line)) == line);

  ReplayChatClient replay(dir / "t.jsonl");
  CHECK(replay.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(replay.chat(sample_messages("post " + std::to_string(i)), p) == "post " + std::to_string(i));
  CHECK(code_of([&] { replay.chat(sample_messages("unseen"), p); }) == Errc::ReplayMiss);
  ChatParams warmer = p;
  warmer.temperature = 0.5;
  CHECK(code_of([&] { replay.chat(sample_messages("post 0"), warmer); }) == Errc::ReplayMiss);

  CHECK(code_of([&] { TranscriptLog bad(dir / "missing" / "t.jsonl"); }) == Errc::IoError);
}

TEST_CASE("concurrent transcript appends stay line-atomic") {
  testutil::TempDir dir;
  ChatParams p;
  {
    TranscriptLog log(dir / "t.jsonl");
    MockChatClient echo(MockChatClient::Mode::Echo);
    echo.set_transcript_log(&log);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 25; ++i) echo.chat(sample_messages(std::to_string(t) + "/" + std::to_string(i)), p);
      });
    }
    for (auto& th : threads) th.join();
  }
  CHECK(read_transcripts(dir / "t.jsonl").size() == 100);
}

TEST_CASE("memo client forwards each request once") {
  ChatParams p;
  MockChatClient echo(MockChatClient::Mode::Echo);
  MemoChatClient memo(echo);
  for (int round = 0; round < 3; ++round) {
    CHECK(memo.chat(sample_messages("a"), p) == "a");
    CHECK(memo.chat(sample_messages("b"), p) == "b");
  }
  CHECK(echo.calls() == 2);
  CHECK(memo.calls() == 6);
}

TEST_CASE("rate limiter sliding window") {
  auto now = std::chrono::steady_clock::time_point{};
  std::vector<std::chrono::milliseconds> slept;
  RateLimiter limiter(
      2, [&] { return now; },
      [&](std::chrono::milliseconds d) {
        slept.push_back(d);
        now += d;
      });
  limiter.acquire();
  now += std::chrono::seconds(10);
  limiter.acquire();
  CHECK(slept.empty());
  limiter.acquire();  // waits until the first start leaves the window
  REQUIRE(slept.size() == 1);
  CHECK(slept[0] == std::chrono::seconds(50));
  limiter.acquire();
  REQUIRE(slept.size() == 2);
  CHECK(slept[1] == std::chrono::seconds(10));
}

TEST_CASE("chat request and response bodies") {
  ChatParams p;
  p.max_tokens = 64;
  const auto req = nlohmann::json::parse(make_chat_request(sample_messages(), p));
  CHECK(req["model"] == "gpt-4o-mini");
  CHECK(req["temperature"] == 0.0);
  CHECK(req["max_tokens"] == 64);
  CHECK(req["messages"].size() == 2);
  CHECK(req["messages"][1]["role"] == "user");

  const auto r = parse_chat_response(ok_body("claim"));
  CHECK(r.text == "claim");
  CHECK(r.usage.total_tokens == 13);
  CHECK(code_of([] { parse_chat_response("{}"); }) == Errc::MalformedResponse);
  CHECK(code_of([] { parse_chat_response(ok_body("")); }) == Errc::MalformedResponse);
  CHECK(code_of([] { parse_chat_response("<html>"); }) == Errc::MalformedResponse);
}

TEST_CASE("http client succeeds and sends credentials") {
  ChatStub stub;
  HttpChatClient client(stub_options(stub.stub.url()));
  const auto r = client.complete(sample_messages(), ChatParams{});
  CHECK(r.text == "The moon is made of cheese.");
  CHECK(r.attempts == 1);
  CHECK(stub.last_auth == "Bearer sk-test");
  CHECK(stub.last_body["model"] == "gpt-4o-mini");
}

TEST_CASE("http client retries 429 with nondecreasing backoff") {
  ChatStub stub;
  stub.script = {429, 429};
  std::vector<std::chrono::milliseconds> slept;
  HttpChatClient client(stub_options(stub.stub.url(), &slept));
  const auto r = client.complete(sample_messages(), ChatParams{});
  CHECK(r.attempts == 3);
  CHECK(stub.requests.load() == 3);
  REQUIRE(slept.size() == 2);
  CHECK(slept == client.backoff_history());
  CHECK(slept[0] >= std::chrono::milliseconds(1000));
  CHECK(slept[0] < std::chrono::milliseconds(1500));
  CHECK(slept[1] >= std::chrono::milliseconds(2000));
  CHECK(slept[1] < std::chrono::milliseconds(3000));
  CHECK(slept[0] <= slept[1]);
}

TEST_CASE("backoff is nondecreasing for any jitter seed") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ChatStub stub;
    stub.script = {500, 502, 503, 429};
    std::vector<std::chrono::milliseconds> slept;
    auto options = stub_options(stub.stub.url(), &slept);
    options.jitter_seed = seed;
    options.backoff_base = std::chrono::milliseconds(100);
    options.backoff_factor = 1.0;  // jitter alone would allow a decrease
    options.max_jitter = 0.9;
    HttpChatClient client(options);
    ChatParams p;
    p.max_retries = 4;
    CHECK(client.complete(sample_messages(), p).attempts == 5);
    for (std::size_t i = 1; i < slept.size(); ++i) CHECK(slept[i - 1] <= slept[i]);
  }
}

TEST_CASE("Retry-After sets a floor") {
  ChatStub stub;
  stub.script = {429};
  stub.retry_after = "7";
  std::vector<std::chrono::milliseconds> slept;
  HttpChatClient client(stub_options(stub.stub.url(), &slept));
  client.complete(sample_messages(), ChatParams{});
  REQUIRE(slept.size() == 1);
  CHECK(slept[0] >= std::chrono::seconds(7));
}

TEST_CASE("http client does not retry client errors") {
  for (const auto& [status, code] : std::vector<std::pair<int, Errc>>{
           {400, Errc::HttpError}, {401, Errc::AuthError}, {403, Errc::AuthError}, {404, Errc::HttpError}}) {
    ChatStub stub;
    stub.script = {status, status, status};
    std::vector<std::chrono::milliseconds> slept;
    HttpChatClient client(stub_options(stub.stub.url(), &slept));
    CHECK(code_of([&] { client.complete(sample_messages(), ChatParams{}); }) == code);
    CHECK(stub.requests.load() == 1);
    CHECK(slept.empty());
  }
}

TEST_CASE("http client gives up after max_retries") {
  ChatStub stub;
  stub.script = std::vector<int>(10, 500);
  HttpChatClient client(stub_options(stub.stub.url()));
  ChatParams p;
  p.max_retries = 2;
  CHECK(code_of([&] { client.complete(sample_messages(), p); }) == Errc::RateLimited);
  CHECK(stub.requests.load() == 3);
  CHECK(client.backoff_history().size() == 2);
}

TEST_CASE("http client rejects empty content") {
  ChatStub stub;
  stub.content = "";
  HttpChatClient client(stub_options(stub.stub.url()));
  CHECK(code_of([&] { client.chat(sample_messages(), ChatParams{}); }) == Errc::MalformedResponse);
}

TEST_CASE("http client times out") {
  testutil::StubServer slow;
  std::atomic<int> hits{0};
  slow.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(ok_body("late"), "application/json");
  });
  slow.start();
  HttpChatClient client(stub_options(slow.url()));
  ChatParams p;
  p.timeout = std::chrono::seconds(1);
  p.max_retries = 1;
  CHECK(code_of([&] { client.complete(sample_messages(), p); }) == Errc::Timeout);
  CHECK(hits.load() == 2);
}

TEST_CASE("http client reports an unreachable endpoint without retrying") {
  std::vector<std::chrono::milliseconds> slept;
  HttpChatClient client(stub_options("http://127.0.0.1:" + std::to_string(testutil::closed_port()), &slept));
  CHECK(code_of([&] { client.complete(sample_messages(), ChatParams{}); }) == Errc::ProviderUnreachable);
  CHECK(slept.empty());
}

TEST_CASE("concurrency cap") {
  testutil::StubServer server;
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
  server.server().new_task_queue = [] { return new httplib::ThreadPool(8); };
  server.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    const int now = ++active;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    --active;
    res.set_content(ok_body("ok"), "application/json");
  });
  server.start();
  auto options = stub_options(server.url());
  options.max_concurrent = 2;
  HttpChatClient client(options);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) threads.emplace_back([&] { client.complete(sample_messages(), ChatParams{}); });
  for (auto& t : threads) t.join();
  CHECK(peak.load() <= 2);
  CHECK(peak.load() >= 1);
}
