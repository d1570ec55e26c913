#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "claimnorm/cli.hpp"
#include "claimnorm/embeddings.hpp"
#include "claimnorm/llm.hpp"
#include "claimnorm/pipeline.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

// Runs the CLI in-process with a controlled environment.
Run cli(std::vector<std::string> args, std::vector<std::string> env = {}) {
  args.insert(args.begin(), "claimnorm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::vector<char*> envp;
  for (auto& e : env) envp.push_back(e.data());
  envp.push_back(nullptr);
  std::ostringstream out, err;
  const int code = claimnorm::cli::run_command(static_cast<int>(argv.size()), argv.data(), envp.data(), out, err);
  return {code, out.str(), err.str()};
}

const std::string kData = CLAIMNORM_FIXTURE_DIR;
const std::string kVectors = "file:" + std::string(CLAIMNORM_FIXTURE_DIR) + "/eng/vectors.jsonl";

std::string trimmed(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

TEST_CASE("usage") {
  const auto help = cli({"--help"});
  CHECK(help.code == 0);
  for (const char* sub : {"validate", "eda", "embed", "audit-overlap", "normalize", "evaluate", "sweep", "meteor"}) {
    CHECK(help.out.find(sub) != std::string::npos);
  }
  const auto none = cli({});
  CHECK(none.code == 2);
  const auto unknown = cli({"normalize", "--data", kData, "--lang", "eng", "--frobnicate"});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("--frobnicate") != std::string::npos);
  CHECK(unknown.err.find("--lang") != std::string::npos);  // subcommand help follows
  const auto missing = cli({"normalize", "--data", kData});
  CHECK(missing.code == 2);
  const auto json = cli({"--json-errors", "normalize", "--bogus"});
  CHECK(json.code == 2);
  const auto j = nlohmann::json::parse(json.err);
  CHECK(j["error"]["code"] == "UsageError");
}

TEST_CASE("meteor command") {
  testutil::TempDir dir;
  testutil::write_file(dir / "h.txt", "the cat sat\nthe cat sat\n");
  testutil::write_file(dir / "r.txt", "the cat sat\nThe cat sat.\n");
  const auto r = cli({"meteor", (dir / "h.txt").string(), (dir / "r.txt").string()});
  CHECK(r.code == 0);
  CHECK(r.out == "n=2 mean_meteor=0.981481\n");
  const auto per_line = cli({"meteor", "--per-line", (dir / "h.txt").string(), (dir / "r.txt").string()});
  CHECK(per_line.out == "0.981481\n0.981481\nn=2 mean_meteor=0.981481\n");

  testutil::write_file(dir / "s.txt", "cats running\n");
  testutil::write_file(dir / "t.txt", "cat runs\n");
  CHECK(cli({"meteor", (dir / "s.txt").string(), (dir / "t.txt").string()}).out == "n=1 mean_meteor=0.000000\n");
  CHECK(cli({"meteor", "--stem", (dir / "s.txt").string(), (dir / "t.txt").string()}).out ==
        "n=1 mean_meteor=0.937500\n");
  CHECK(cli({"--set", "metrics.stem=true", "meteor", (dir / "s.txt").string(), (dir / "t.txt").string()}).out ==
        "n=1 mean_meteor=0.937500\n");

  const auto mismatch = cli({"meteor", (dir / "h.txt").string(), (dir / "t.txt").string()});
  CHECK(mismatch.code == 1);
  CHECK(mismatch.err.find("RowCountMismatch") != std::string::npos);
}

TEST_CASE("validate and eda") {
  const auto v = cli({"validate", "--data", kData, "--lang", "eng"});
  CHECK(v.code == 0);
  const auto vj = nlohmann::json::parse(v.out);
  CHECK(vj["train"]["n_records"] == 30);
  CHECK(vj["dev"]["accepted"] == true);
  CHECK(vj["test"]["n_records"] == 20);

  testutil::TempDir dir;
  testutil::write_file(dir / "xx" / "train.csv", "post,normalized claim\na,\nb,\nc,C\n");
  const auto bad = cli({"validate", "--data", dir.path().string(), "--lang", "xx", "--split", "train"});
  CHECK(bad.code == 1);
  const auto bj = nlohmann::json::parse(bad.out);
  CHECK(bj["train"]["accepted"] == false);
  CHECK(bj["train"]["rejected"].size() == 2);

  const auto e = cli({"eda", "--data", kData, "--lang", "eng", "--top", "5"});
  CHECK(e.code == 0);
  const auto ej = nlohmann::json::parse(e.out);
  CHECK(ej["splits"]["train"]["n_records"] == 30);
  CHECK(ej["top_claim_tokens"].size() == 5);

  testutil::write_file(dir / "tok.jsonl", "{\"id\":0,\"post\":[[1,0],[0,1]],\"claim\":[[1,0]]}\n");
  const auto probe = cli({"eda", "--data", kData, "--lang", "eng", "--split", "train", "--token-vectors",
                          (dir / "tok.jsonl").string()});
  CHECK(probe.code == 0);
  CHECK(nlohmann::json::parse(probe.out)["bertscore_lite"]["mean_recall"] == doctest::Approx(1.0));
}

TEST_CASE("embed and audit") {
  testutil::TempDir dir;
  const auto e = cli({"embed", "--data", kData, "--lang", "eng", "--provider", kVectors, "--out",
                      (dir / "v.jsonl").string()});
  REQUIRE(e.code == 0);
  CHECK(claimnorm::embeddings::read_vector_file(dir / "v.jsonl").size() == 59);  // one test post repeats a train post
  const auto a = cli({"audit-overlap", "--data", kData, "--lang", "eng", "--provider", kVectors});
  REQUIRE(a.code == 0);
  const auto aj = nlohmann::json::parse(a.out);
  CHECK(aj["n"] == 20);
  for (const auto& tc : aj["threshold_counts"]) {
    if (tc["threshold"] == 0.6) CHECK(tc["count"] == 15);
    if (tc["threshold"] == 0.8) CHECK(tc["count"] == 8);
    if (tc["threshold"] == 0.9) CHECK(tc["count"] == 3);
  }
  const auto no_model = cli({"audit-overlap", "--data", kData, "--lang", "kor", "--provider", kVectors});
  CHECK(no_model.code == 2);
  CHECK(no_model.err.find("NoModelForLanguage") != std::string::npos);
}

TEST_CASE("normalize, record, replay and evaluate") {
  testutil::TempDir dir;
  const std::string root = (dir / "runs").string();
  const std::vector<std::string> base = {"--run-root", root, "normalize", "--data", kData, "--lang", "eng",
                                         "--provider", kVectors};

  auto args = base;
  for (const char* a : {"--llm", "mock"}) args.emplace_back(a);
  args.emplace_back("--record");
  args.emplace_back((dir / "t.jsonl").string());
  const auto first = cli(args);
  REQUIRE(first.code == 0);
  const fs::path run_dir = trimmed(first.out);
  CHECK(fs::exists(run_dir / "outcomes.jsonl"));
  CHECK(fs::exists(run_dir / "submission.txt"));
  CHECK(fs::exists(run_dir / "config.conf"));
  const auto manifest = nlohmann::json::parse(testutil::read_file(run_dir / "manifest.json"));
  CHECK(manifest["decision_counts"]["Reused"] == 15);
  CHECK(manifest["decision_counts"]["Generated"] == 5);
  CHECK(claimnorm::llm::read_transcripts(dir / "t.jsonl").size() == 5);

  auto replay = base;
  for (const char* a : {"--llm"}) replay.emplace_back(a);
  replay.emplace_back("replay:" + (dir / "t.jsonl").string());
  replay.insert(replay.begin(), {"--jobs", "1"});
  const auto second = cli(replay);
  REQUIRE(second.code == 0);
  CHECK(trimmed(second.out) != trimmed(first.out));
  CHECK(testutil::read_file(fs::path(trimmed(second.out)) / "outcomes.jsonl") ==
        testutil::read_file(run_dir / "outcomes.jsonl"));

  const auto ev = cli({"evaluate", "--data", kData, "--lang", "eng", "--outcomes", (run_dir / "outcomes.jsonl").string(),
                       "--format", "json", "--threshold", "0.6"});
  REQUIRE(ev.code == 0);
  const auto ej = nlohmann::json::parse(ev.out);
  CHECK(ej["n"] == 20);
  CHECK(ej["threshold"] == 0.6);
  const auto table = cli({"evaluate", "--data", kData, "--lang", "eng", "--outcomes",
                          (run_dir / "outcomes.jsonl").string(), "--format", "text-table"});
  CHECK(table.out.find("Lang") == 0);
  const auto xml = cli({"evaluate", "--data", kData, "--lang", "eng", "--outcomes",
                        (run_dir / "outcomes.jsonl").string(), "--format", "xml"});
  CHECK(xml.code == 2);
  CHECK(xml.err.find("UnknownFormat") != std::string::npos);

  // A higher threshold leaves fewer reused rows.
  auto strict = base;
  for (const char* a : {"--llm", "mock", "--threshold", "0.9"}) strict.emplace_back(a);
  const auto s = cli(strict);
  REQUIRE(s.code == 0);
  const auto sm = nlohmann::json::parse(testutil::read_file(fs::path(trimmed(s.out)) / "manifest.json"));
  CHECK(sm["decision_counts"]["Reused"] == 3);
  CHECK(sm["threshold_k"] == 0.9);
}

TEST_CASE("normalize failures and exit codes") {
  testutil::TempDir dir;
  const std::vector<std::string> base = {"--run-dir", (dir / "r").string(), "normalize", "--data", kData,
                                         "--lang", "eng", "--provider", kVectors};
  auto failing = base;
  for (const char* a : {"--llm", "mock-fail"}) failing.emplace_back(a);
  const auto f = cli(failing);
  CHECK(f.code == 1);
  CHECK(f.err.find("5 of 20") != std::string::npos);

  auto live = base;
  for (const char* a : {"--llm", "live"}) live.emplace_back(a);
  live.insert(live.begin(), "--json-errors");
  const auto l = cli(live, {"HOME=/nowhere"});
  CHECK(l.code == 2);
  CHECK(nlohmann::json::parse(l.err)["error"]["code"] == "AuthError");

  auto miss = base;
  testutil::write_file(dir / "empty.jsonl", "");
  for (const char* a : {"--llm"}) miss.emplace_back(a);
  miss.emplace_back("replay:" + (dir / "empty.jsonl").string());
  const auto m = cli(miss);
  CHECK(m.code == 1);
  CHECK(m.err.find("ReplayMiss") != std::string::npos);

  auto bad_set = base;
  bad_set.insert(bad_set.begin(), {"--set", "pipeline.fewshot_n=0"});
  CHECK(cli(bad_set).code == 2);
}

TEST_CASE("config precedence") {
  testutil::TempDir dir;
  testutil::write_file(dir / "c.conf", "threshold.eng = 0.9\n");
  const std::vector<std::string> tail = {"normalize", "--data", kData, "--lang", "eng", "--provider", kVectors,
                                         "--llm", "mock"};
  auto reused = [&](std::vector<std::string> head, std::vector<std::string> env) {
    head.insert(head.end(), {"--run-root", (dir / "runs").string()});
    head.insert(head.end(), tail.begin(), tail.end());
    const auto r = cli(head, env);
    REQUIRE(r.code == 0);
    return nlohmann::json::parse(testutil::read_file(fs::path(trimmed(r.out)) / "manifest.json"))["decision_counts"]["Reused"]
        .get<int>();
  };
  CHECK(reused({}, {}) == 15);
  CHECK(reused({"--config", (dir / "c.conf").string()}, {}) == 3);
  CHECK(reused({"--config", (dir / "c.conf").string()}, {"CLAIMNORM_THRESHOLD__ENG=0.8"}) == 8);
  CHECK(reused({"--config", (dir / "c.conf").string(), "--set", "threshold.eng=0.6"}, {"CLAIMNORM_THRESHOLD__ENG=0.8"}) == 15);
}

TEST_CASE("sweep command") {
  testutil::TempDir dir;
  const auto r = cli({"--run-dir", (dir / "s").string(), "sweep", "--data", kData, "--lang", "eng", "--provider",
                      kVectors, "--llm", "mock", "--grid-start", "0.5", "--grid-stop", "0.9", "--grid-step", "0.1"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(testutil::read_file(dir / "s" / "sweep.json"));
  CHECK(j["curve"].size() == 5);
  CHECK(j["best_k"].get<double>() >= 0.5);
}

TEST_CASE("binary exit codes") {
  const std::string bin = CLAIMNORM_CLI_PATH;
  CHECK(std::system((bin + " --help > /dev/null").c_str()) == 0);
  const int status = std::system((bin + " normalize --nope > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(status) == 2);
}
