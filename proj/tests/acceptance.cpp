// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "claimnorm/metrics.hpp"
#include "claimnorm/pipeline.hpp"
#include "claimnorm/retrieval.hpp"
#include "claimnorm/textstats.hpp"
#include "meteor_oracle.hpp"
#include "test_util.hpp"

using namespace claimnorm;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

Verdict verdict(bool pass, std::string detail) { return {pass, std::move(detail)}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- METEOR ---------------------------------------------------------------------

Verdict meteor_hand_values() {
  struct Case {
    const char* hyp;
    const char* ref;
    double expected;
  };
  // the cat sat / itself: m=3, one chunk, penalty 0.5 (1/3)^3 = 1/54 -> 53/54
  // the cat / the cat sat: P=1, R=2/3, Fmean=(20/3)/(29/3)=20/29, penalty 1/16 -> 0.646552
  // sat the cat / the cat sat: m=3, chunks 2, penalty 0.5 (2/3)^3 = 4/27 -> 23/27
  const Case cases[] = {{"the cat sat", "the cat sat", 53.0 / 54.0},
                        {"the cat", "the cat sat", 20.0 / 29.0 * 15.0 / 16.0},
                        {"sat the cat", "the cat sat", 23.0 / 27.0}};
  const double published[] = {0.981481, 0.646552, 0.851852};
  std::ostringstream detail;
  bool ok = true;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto b = metrics::meteor(cases[i].hyp, cases[i].ref);
    ok = ok && std::fabs(b.score - cases[i].expected) <= 1e-6 && std::fabs(b.score - published[i]) <= 1e-6;
    detail << (i ? ", " : "") << fmt("%.6f", b.score);
  }
  const auto chunks = metrics::meteor("sat the cat", "the cat sat");
  ok = ok && chunks.m == 3 && chunks.chunks == 2;
  return verdict(ok, detail.str() + " (m=3 chunks=" + std::to_string(chunks.chunks) + ")");
}

Verdict meteor_random_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20250101);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
  const int pairs = 500;
  double worst = 0.0;
  for (int t = 0; t < pairs; ++t) {
    std::vector<std::string> hyp(rng() % 9), ref(rng() % 9);
    for (auto& w : hyp) w = vocab[rng() % 5];
    for (auto& w : ref) w = vocab[rng() % 5];
    const auto expected = oracle::meteor(hyp, ref);
    const auto got = metrics::meteor_tokens(hyp, ref);
    worst = std::max(worst, std::fabs(got.score - expected.score));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return verdict(worst <= 1e-9 && secs < 10.0, std::to_string(pairs) + " pairs, max |diff| " + fmt("%.3g", worst) +
                                                   ", " + fmt("%.2f", secs) + " s");
}

// --- retrieval ------------------------------------------------------------------

std::vector<std::size_t> naive_ranking(const std::vector<std::vector<float>>& rows, const std::vector<float>& q,
                                       std::size_t k) {
  std::vector<double> sims(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < q.size(); ++d) s += static_cast<double>(rows[i][d]) * static_cast<double>(q[d]);
    sims[i] = s;
  }
  std::vector<std::size_t> order;
  std::vector<bool> taken(rows.size(), false);
  for (std::size_t r = 0; r < k; ++r) {
    std::size_t best = rows.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (taken[i]) continue;
      if (best == rows.size() || sims[i] > sims[best]) best = i;
    }
    taken[best] = true;
    order.push_back(best);
  }
  return order;
}

Verdict retrieval_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77);
  std::size_t queries = 0, mismatches = 0, tied = 0;
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 1 + rng() % 500;
    const std::size_t dim = 1 + rng() % 64;
    std::vector<std::vector<float>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(i > 0 && rng() % 4 == 0 ? rows[rng() % i] : testutil::random_unit(rng, dim));
    }
    const auto normalized = embeddings::l2_normalize(embeddings::EmbeddingMatrix::from_rows("m", rows));
    std::vector<std::vector<float>> unit_rows;
    for (std::size_t i = 0; i < n; ++i) unit_rows.emplace_back(normalized.row(i).begin(), normalized.row(i).end());
    const auto index = retrieval::build_index(testutil::numbered_corpus(n), normalized);
    for (int qi = 0; qi < 5; ++qi) {
      // Alternate fresh queries and stored rows, which tie with their duplicates.
      const auto q = qi % 2 ? unit_rows[rng() % n] : testutil::random_unit(rng, dim);
      const std::size_t k = 1 + rng() % n;
      const auto hits = retrieval::top_k(index, q, k, retrieval::Accumulation::f64);
      const auto expected = naive_ranking(unit_rows, q, k);
      std::vector<std::size_t> got;
      for (const auto& h : hits) got.push_back(h.row_id);
      ++queries;
      if (got != expected) ++mismatches;
      for (std::size_t i = 1; i < hits.size(); ++i) {
        if (hits[i].similarity == hits[i - 1].similarity) {
          ++tied;
          break;
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return verdict(mismatches == 0 && tied > 0 && secs < 30.0,
                 std::to_string(queries) + " queries over 100 corpora, " + std::to_string(mismatches) +
                     " mismatches, " + std::to_string(tied) + " with ties, " + fmt("%.2f", secs) + " s");
}

// --- pipeline on the fixture -------------------------------------------------------

pipeline::RunConfig fixture_config(double k) {
  pipeline::RunConfig rc;
  rc.language = "eng";
  rc.threshold_k = k;
  rc.model_id = testutil::Fixture::kModel;
  rc.jobs = 4;
  return rc;
}

Verdict gate_dichotomy() {
  testutil::Fixture fx;
  llm::MockChatClient echo(llm::MockChatClient::Mode::Echo);
  const pipeline::PipelineContext ctx{&*fx.index, fx.embedder.get(), &echo};
  std::ostringstream detail;
  bool ok = fx.test.size() == 20;
  for (double k : {0.6, 0.8, 0.9}) {
    const auto result = pipeline::run_split(fx.test, ctx, fixture_config(k));
    std::size_t reused = 0;
    for (const auto& o : result.outcomes) {
      const bool is_reused = o.decision == pipeline::Decision::Reused;
      ok = ok && o.best_similarity && is_reused == (*o.best_similarity >= k) &&
           (is_reused || o.decision == pipeline::Decision::Generated);
      reused += is_reused;
    }
    detail << (k == 0.6 ? "" : ", ") << "k=" << fmt("%.1f", k) << ": " << reused << "/20 reused";
  }
  return verdict(ok, detail.str());
}

Verdict reuse_fidelity() {
  testutil::Fixture fx;
  llm::MockChatClient echo(llm::MockChatClient::Mode::Echo);
  const pipeline::PipelineContext ctx{&*fx.index, fx.embedder.get(), &echo};
  const auto& pooled = fx.index->corpus().records;
  for (const auto& rec : fx.test) {
    const auto dup = std::find_if(pooled.begin(), pooled.end(), [&](const auto& p) { return p.post == rec.post; });
    if (dup == pooled.end()) continue;
    const auto o = pipeline::normalize_one(rec, ctx, fixture_config(0.9));
    const bool ok = o.decision == pipeline::Decision::Reused && std::fabs(*o.best_similarity - 1.0) <= 1e-6 &&
                    o.claim == *dup->gold_claim && o.neighbor_row_id == dup->id;
    return verdict(ok, "test row " + std::to_string(rec.id) + " similarity " + fmt("%.9f", *o.best_similarity) +
                           (o.claim == *dup->gold_claim ? ", gold reused byte-identical" : ", claim differs"));
  }
  return verdict(false, "fixture has no exact duplicate");
}

std::string run_cli(const std::string& args) {
  const std::string cmd = std::string(CLAIMNORM_CLI_PATH) + " " + args + " 2>/dev/null";
  std::string out;
  if (FILE* p = ::popen(cmd.c_str(), "r")) {
    char buf[512];
    while (std::fgets(buf, sizeof buf, p)) out += buf;
    if (::pclose(p) != 0) return {};
  }
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

Verdict end_to_end_determinism() {
  testutil::TempDir dir;
  const std::string data = CLAIMNORM_FIXTURE_DIR;
  const std::string common = "--run-root " + (dir / "runs").string() + " normalize --data " + data +
                             " --lang eng --provider file:" + data + "/eng/vectors.jsonl";
  const auto transcripts = (dir / "t.jsonl").string();
  const auto recorded = run_cli("--jobs 4 " + common + " --llm mock --record " + transcripts);
  if (recorded.empty()) return verdict(false, "recording run failed");
  const auto reference = testutil::read_file(fs::path(recorded) / "outcomes.jsonl");
  std::vector<std::string> runs;
  for (const char* jobs : {"4", "4", "4", "1"}) {
    const auto d = run_cli(std::string("--jobs ") + jobs + " " + common + " --llm replay:" + transcripts);
    if (d.empty()) return verdict(false, std::string("replay run with --jobs ") + jobs + " failed");
    runs.push_back(testutil::read_file(fs::path(d) / "outcomes.jsonl"));
  }
  const bool ok = !reference.empty() &&
                  std::all_of(runs.begin(), runs.end(), [&](const std::string& r) { return r == reference; });
  return verdict(ok, "record + 3 replays at --jobs 4 + 1 replay at --jobs 1, " +
                         std::to_string(std::count(reference.begin(), reference.end(), '\n')) + " lines, " +
                         (ok ? "byte-identical" : "outputs differ"));
}

// Captures the prompt it is asked and answers with a fixed claim.
class CapturingClient : public llm::ChatClient {
 public:
  llm::ChatResult complete(std::span<const llm::ChatMessage> messages, const llm::ChatParams&) override {
    last.assign(messages.begin(), messages.end());
    return {"Captured.", {}, 1};
  }
  std::vector<llm::ChatMessage> last;
};

Verdict prompt_conformance() {
  // Golden comparison with a hand-written bundle for a non-English code.
  const auto golden = nlohmann::json::parse(testutil::read_file(std::string(CLAIMNORM_GOLDEN_DIR) + "/fewshot_deu.json"));
  std::vector<pipeline::Exemplar> exemplars;
  for (const auto& e : golden["exemplars"]) exemplars.push_back({e["post"], e["claim"]});
  const auto bundle = pipeline::build_fewshot_prompt(golden["post"].get<std::string>(), exemplars, "deu");
  const bool golden_ok = nlohmann::json::parse(pipeline::to_json(bundle).dump())["messages"] == golden["messages"];

  // Exemplars in retrieval order on a generated fixture record.
  testutil::Fixture fx;
  CapturingClient client;
  const pipeline::PipelineContext ctx{&*fx.index, fx.embedder.get(), &client};
  std::size_t checked = 0;
  bool order_ok = true;
  for (const auto& rec : fx.test) {
    const auto o = pipeline::normalize_one(rec, ctx, fixture_config(0.9));
    if (o.decision != pipeline::Decision::Generated) continue;
    const auto q = fx.embedder->embed_normalized(std::vector<std::string>{rec.post});
    const auto hits = retrieval::top_k(*fx.index, q.row(0), 3);
    const auto& m = client.last;
    bool ok = m.size() == 8 && m[0].content == pipeline::system_prompt("eng") &&
              m[0].content.find("{lang}") == std::string::npos && m[7].content.ends_with("\nLet's think step by step.");
    for (std::size_t i = 0; ok && i < hits.size(); ++i) {
      const auto& ex = fx.index->corpus().records[hits[i].row_id];
      ok = m[1 + 2 * i].content == pipeline::user_prompt(ex.post) && m[2 + 2 * i].content == *ex.gold_claim;
      if (i > 0) ok = ok && hits[i - 1].similarity >= hits[i].similarity;
    }
    order_ok = order_ok && ok;
    ++checked;
  }
  return verdict(golden_ok && order_ok && checked > 0,
                 std::string("golden ") + (golden_ok ? "match" : "MISMATCH") + ", exemplar order checked on " +
                     std::to_string(checked) + " generated records");
}

Verdict overlap_audit() {
  std::mt19937_64 rng(99);
  const std::size_t dim = 64;
  std::vector<std::vector<float>> pooled;
  for (int i = 0; i < 50; ++i) pooled.push_back(testutil::random_unit(rng, dim));
  const auto index = retrieval::build_index(testutil::numbered_corpus(pooled.size()),
                                            embeddings::l2_normalize(embeddings::EmbeddingMatrix::from_rows("m", pooled)));
  std::vector<std::vector<float>> test = {pooled[17]};
  for (int i = 0; i < 9; ++i) test.push_back(testutil::random_unit(rng, dim));
  const auto report =
      retrieval::overlap_audit(index, embeddings::l2_normalize(embeddings::EmbeddingMatrix::from_rows("m", test)));
  std::size_t at_099 = 0;
  bool found = false;
  for (const auto& tc : report.threshold_counts) {
    if (std::fabs(tc.threshold - 0.99) < 1e-12) {
      at_099 = tc.count;
      found = true;
    }
  }
  std::size_t top_bin = 0;
  for (const auto& bin : report.histogram) {
    if (bin.upper > 0.99) top_bin += bin.count;
  }
  return verdict(found && at_099 == 1 && top_bin == 1,
                 "rows >= 0.99: " + std::to_string(at_099) + ", top histogram bin: " + std::to_string(top_bin));
}

Verdict bertscore_checks() {
  std::mt19937_64 rng(5);
  double worst_identity = 0.0;
  bool swap_exact = true;
  for (int t = 0; t < 100; ++t) {
    std::vector<std::vector<float>> a, b;
    for (std::size_t i = 0; i < 1 + rng() % 8; ++i) a.push_back(testutil::random_unit(rng, 16));
    for (std::size_t i = 0; i < 1 + rng() % 8; ++i) b.push_back(testutil::random_unit(rng, 16));
    const auto ma = embeddings::EmbeddingMatrix::from_rows("m", a, true);
    const auto mb = embeddings::EmbeddingMatrix::from_rows("m", b, true);
    const auto id = metrics::bertscore_lite(ma, ma);
    worst_identity = std::max({worst_identity, std::fabs(id.precision - 1), std::fabs(id.recall - 1), std::fabs(id.f1 - 1)});
    const auto fwd = metrics::bertscore_lite(ma, mb);
    const auto bwd = metrics::bertscore_lite(mb, ma);
    swap_exact = swap_exact && fwd.precision == bwd.recall && fwd.recall == bwd.precision;
  }
  return verdict(worst_identity <= 1e-6 && swap_exact, "identity max |1-x| " + fmt("%.2g", worst_identity) +
                                                           ", swap " + (swap_exact ? "exact" : "NOT exact"));
}

Verdict triplicate_detector() {
  std::mt19937_64 rng(3);
  const std::string letters = "abcdefghijklmnopqrstuvwxyz";
  auto primitive = [](const std::vector<std::string>& toks) {
    const std::size_t n = toks.size();
    for (std::size_t p = 1; p < n; ++p) {
      if (n % p) continue;
      bool periodic = true;
      for (std::size_t i = p; i < n && periodic; ++i) periodic = toks[i] == toks[i - p];
      if (periodic) return false;
    }
    return true;
  };
  std::size_t detected = 0, rejected2 = 0, rejected4 = 0, generated = 0;
  while (generated < 100) {
    std::vector<std::string> toks(1 + rng() % 6);
    for (auto& t : toks) {
      t.clear();
      for (std::size_t i = 0; i < 1 + rng() % 6; ++i) t += letters[rng() % letters.size()];
    }
    // A unit that is itself a repetition would make U U a genuine cube.
    if (!primitive(toks)) continue;
    ++generated;
    std::string unit;
    for (std::size_t i = 0; i < toks.size(); ++i) unit += (i ? " " : "") + toks[i];
    auto repeat = [&](int times) {
      std::string s;
      for (int i = 0; i < times; ++i) s += (i ? " " : "") + unit;
      return s;
    };
    detected += textstats::detect_triplicate(repeat(3)) == unit;
    rejected2 += !textstats::detect_triplicate(repeat(2)).has_value();
    rejected4 += !textstats::detect_triplicate(repeat(4)).has_value();
  }
  return verdict(detected == 100 && rejected2 == 100 && rejected4 == 100,
                 "3x detected " + std::to_string(detected) + "/100, 2x rejected " + std::to_string(rejected2) +
                     "/100, 4x rejected " + std::to_string(rejected4) + "/100");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"METEOR hand-derived oracle", meteor_hand_values},
      {"METEOR randomized oracle", meteor_random_oracle},
      {"Retrieval oracle", retrieval_oracle},
      {"Gate dichotomy", gate_dichotomy},
      {"Reuse fidelity", reuse_fidelity},
      {"End-to-end determinism", end_to_end_determinism},
      {"Prompt conformance", prompt_conformance},
      {"Overlap audit", overlap_audit},
      {"bertscore_lite identity and swap", bertscore_checks},
      {"Triplicate detector", triplicate_detector},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << name << ": " << v.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
