#include "claimnorm/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <ostream>

#include "claimnorm/data.hpp"
#include "claimnorm/error.hpp"
#include "claimnorm/parallel.hpp"
#include "claimnorm/sha256.hpp"
#include "claimnorm/unicode.hpp"

namespace claimnorm::pipeline {

std::string system_prompt(std::string_view language) {
  std::string out(kSystemPromptTemplate);
  constexpr std::string_view slot = "{lang}";
  for (auto pos = out.find(slot); pos != std::string::npos; pos = out.find(slot, pos + language.size())) {
    out.replace(pos, slot.size(), language);
  }
  return out;
}

std::string user_prompt(std::string_view post) {
  std::string out(kUserPromptPrefix);
  out += post;
  out += kUserPromptSuffix;
  return out;
}

std::vector<Exemplar> parse_exemplars(std::string_view jsonl, std::string_view source) {
  std::vector<Exemplar> out;
  std::size_t line_no = 0;
  while (!jsonl.empty()) {
    const auto nl = jsonl.find('\n');
    const auto line = jsonl.substr(0, nl);
    jsonl = nl == std::string_view::npos ? std::string_view{} : jsonl.substr(nl + 1);
    ++line_no;
    if (unicode::is_blank(line)) continue;
    const auto where = std::string(source) + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("post") || !j.contains("claim") || !j["post"].is_string() ||
        !j["claim"].is_string()) {
      throw Error(Errc::ConfigError, where + ": exemplar needs string fields post and claim");
    }
    Exemplar ex{j["post"].get<std::string>(), j["claim"].get<std::string>()};
    if (unicode::is_blank(ex.post) || unicode::is_blank(ex.claim)) {
      throw Error(Errc::ConfigError, where + ": exemplar post and claim must be non-blank");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Exemplar> default_static_examples() {
  return parse_exemplars(data::zeroshot_examples(), "zeroshot_examples.jsonl");
}

namespace {

PromptBundle assemble(std::string_view post, std::span<const Exemplar> exemplars, std::string_view language) {
  PromptBundle bundle;
  bundle.language = std::string(language);
  bundle.messages.push_back({llm::Role::System, system_prompt(language)});
  for (const auto& ex : exemplars) {
    bundle.messages.push_back({llm::Role::User, user_prompt(ex.post)});
    bundle.messages.push_back({llm::Role::Assistant, ex.claim});
  }
  bundle.messages.push_back({llm::Role::User, user_prompt(post)});
  return bundle;
}

}  // namespace

PromptBundle build_fewshot_prompt(std::string_view post, std::span<const Exemplar> exemplars,
                                  std::string_view language) {
  if (exemplars.empty()) throw Error(Errc::InvalidArgument, "few-shot prompt needs at least one exemplar");
  return assemble(post, exemplars, language);
}

PromptBundle build_zeroshot_prompt(std::string_view post, std::string_view language,
                                   std::span<const Exemplar> static_examples) {
  if (static_examples.empty()) throw Error(Errc::ConfigError, "zero-shot mode needs static examples");
  return assemble(post, static_examples, language);
}

nlohmann::ordered_json to_json(const PromptBundle& bundle) {
  nlohmann::ordered_json j;
  j["language"] = bundle.language;
  j["messages"] = llm::messages_to_json(bundle.messages);
  return j;
}

GateDecision decide(const retrieval::RetrievalHit& best_hit, double threshold_k) {
  return best_hit.similarity >= threshold_k ? GateDecision::Reuse : GateDecision::Generate;
}

namespace {

// Byte length of the prefix of `text` that case-folds to `pattern`, if any.
std::optional<std::size_t> folded_prefix(std::string_view text, std::string_view pattern) {
  const auto t = unicode::code_points(text);
  const auto p = unicode::code_points(pattern);
  if (p.empty() || p.size() > t.size()) return std::nullopt;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (unicode::simple_fold(t[i].value) != unicode::simple_fold(p[i].value)) return std::nullopt;
  }
  return t[p.size() - 1].offset + t[p.size() - 1].length;
}

constexpr std::pair<std::string_view, std::string_view> kQuotePairs[] = {
    {"\"", "\""}, {"'", "'"}, {"“", "”"}, {"‘", "’"}, {"«", "»"},
    {"「", "」"},
};

std::string strip_quote_pairs(std::string text) {
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [open, close] : kQuotePairs) {
      if (text.size() >= open.size() + close.size() && text.starts_with(open) && text.ends_with(close)) {
        text = unicode::trim(std::string_view(text).substr(open.size(), text.size() - open.size() - close.size()));
        changed = true;
        break;
      }
    }
  }
  return text;
}

// Whitespace runs that contain a line break become one space.
std::string join_lines(std::string_view text) {
  std::string out;
  const auto cps = unicode::code_points(text);
  std::size_t i = 0;
  while (i < cps.size()) {
    if (!unicode::is_whitespace(cps[i].value)) {
      out.append(text.substr(cps[i].offset, cps[i].length));
      ++i;
      continue;
    }
    const std::size_t start = i;
    bool has_break = false;
    while (i < cps.size() && unicode::is_whitespace(cps[i].value)) {
      const char32_t c = cps[i].value;
      if (c == U'\n' || c == U'\r' || c == 0x0B || c == 0x0C || c == 0x85 || c == 0x2028 || c == 0x2029) {
        has_break = true;
      }
      ++i;
    }
    if (has_break) {
      out += ' ';
    } else {
      out.append(text.substr(cps[start].offset, cps[i - 1].offset + cps[i - 1].length - cps[start].offset));
    }
  }
  return out;
}

}  // namespace

std::string sanitize_output(std::string_view text, std::span<const std::string> preface_patterns) {
  std::string out = unicode::trim(text);
  for (const auto& pattern : preface_patterns) {
    if (const auto cut = folded_prefix(out, pattern)) {
      out = unicode::trim(std::string_view(out).substr(*cut));
      break;
    }
  }
  out = join_lines(strip_quote_pairs(std::move(out)));
  if (out.empty()) return std::string(text);
  return out;
}

std::vector<std::string> default_preface_patterns() {
  return KvConfig::parse(data::defaults_conf(), "defaults.conf").get_strings("pipeline.preface_patterns");
}

void RunConfig::validate() const {
  if (language.empty()) throw Error(Errc::ConfigError, "language must be set");
  if (!(threshold_k >= 0.0 && threshold_k <= 1.0)) {
    throw Error(Errc::ConfigError, "threshold k must be in [0, 1], got " + std::to_string(threshold_k));
  }
  if (fewshot_n < 1) throw Error(Errc::ConfigError, "fewshot_n must be at least 1");
  if (zero_shot && static_examples.empty()) throw Error(Errc::ConfigError, "zero-shot mode needs static examples");
  if (!zero_shot && model_id.empty()) throw Error(Errc::ConfigError, "embedding model id must be set");
  if (jobs < 1) throw Error(Errc::ConfigError, "jobs must be at least 1");
  llm.validate();
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["language"] = language;
  j["threshold_k"] = threshold_k;
  j["fewshot_n"] = fewshot_n;
  j["model_id"] = model_id;
  j["llm_model"] = llm.model;
  j["temperature"] = llm.temperature;
  j["max_tokens"] = llm.max_tokens;
  j["zero_shot"] = zero_shot;
  auto examples = nlohmann::ordered_json::array();
  for (const auto& ex : static_examples) examples.push_back({{"post", ex.post}, {"claim", ex.claim}});
  j["static_examples"] = std::move(examples);
  j["preface_patterns"] = preface_patterns;
  j["accumulation"] = retrieval::to_string(accumulation);
  return j;
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

double default_threshold(std::string_view language) {
  static const KvConfig defaults = KvConfig::parse(data::defaults_conf(), "defaults.conf");
  return defaults.get_double("threshold." + std::string(language), defaults.get_double("pipeline.default_threshold"));
}

RunConfig run_config_from(const KvConfig& config, std::string_view language) {
  RunConfig rc;
  rc.language = std::string(language);
  const std::string lang(language);
  rc.threshold_k = config.get_double("threshold." + lang,
                                     config.get_double("pipeline.default_threshold", default_threshold(language)));
  const auto fewshot = config.get_int("pipeline.fewshot_n", 3);
  if (fewshot < 1) throw Error(Errc::ConfigError, "pipeline.fewshot_n must be at least 1");
  rc.fewshot_n = static_cast<std::size_t>(fewshot);

  const auto registry = embeddings::ModelRegistry::from_config(config);
  if (auto model = registry.find(language)) {
    rc.model_id = *model;
  } else {
    rc.zero_shot = true;
  }
  const auto examples_path = config.get_string("pipeline.static_examples", "");
  if (examples_path.empty()) {
    rc.static_examples = default_static_examples();
  } else {
    std::ifstream in(examples_path, std::ios::binary);
    if (!in) throw Error(Errc::ConfigError, "cannot read static examples " + examples_path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    rc.static_examples = parse_exemplars(text, examples_path);
  }
  if (config.contains("pipeline.preface_patterns")) {
    rc.preface_patterns = config.get_strings("pipeline.preface_patterns");
  }
  rc.accumulation = retrieval::parse_accumulation(config.get_string("retrieval.accumulate", "f32"));

  rc.llm.model = config.get_string("llm.model", rc.llm.model);
  rc.llm.temperature = config.get_double("llm.temperature", rc.llm.temperature);
  rc.llm.max_tokens = static_cast<int>(config.get_int("llm.max_tokens", rc.llm.max_tokens));
  rc.llm.timeout = std::chrono::seconds(config.get_int("llm.timeout_s", rc.llm.timeout.count()));
  rc.llm.max_retries = static_cast<int>(config.get_int("llm.max_retries", rc.llm.max_retries));
  rc.jobs = static_cast<std::size_t>(std::max<long long>(1, config.get_int("run.jobs", 4)));
  return rc;
}

std::string_view to_string(Decision decision) {
  switch (decision) {
    case Decision::Reused: return "Reused";
    case Decision::Generated: return "Generated";
    case Decision::ZeroShot: return "ZeroShot";
    case Decision::Failed: return "Failed";
  }
  return "Failed";
}

Decision parse_decision(std::string_view name) {
  if (name == "Reused") return Decision::Reused;
  if (name == "Generated") return Decision::Generated;
  if (name == "ZeroShot") return Decision::ZeroShot;
  if (name == "Failed") return Decision::Failed;
  throw Error(Errc::MalformedResponse, "unknown decision '" + std::string(name) + "'");
}

namespace {

// LLM failures become Failed outcomes; configuration problems and replay
// misses abort the run.
NormalizationOutcome call_llm(NormalizationOutcome outcome, const PromptBundle& bundle,
                              const PipelineContext& context, const RunConfig& config) {
  try {
    const auto raw = context.llm->chat(bundle.messages, config.llm);
    outcome.claim = sanitize_output(raw, config.preface_patterns);
  } catch (const Error& e) {
    if (is_config_error(e.code()) || e.code() == Errc::ReplayMiss) {
      throw Error(e.code(), "record " + std::to_string(outcome.record_id) + ": " + e.message());
    }
    outcome.decision = Decision::Failed;
    outcome.claim.clear();
    outcome.error = e.what();
  }
  return outcome;
}

void require_llm(const PipelineContext& context) {
  if (context.llm == nullptr) throw Error(Errc::ConfigError, "no LLM client configured");
}

void require_index(const PipelineContext& context) {
  if (context.index == nullptr) throw Error(Errc::ConfigError, "monolingual mode needs a retrieval index");
}

NormalizationOutcome zero_shot(const corpus::ClaimRecord& record, const PipelineContext& context,
                               const RunConfig& config) {
  NormalizationOutcome outcome;
  outcome.record_id = record.id;
  outcome.decision = Decision::ZeroShot;
  const auto bundle = build_zeroshot_prompt(record.post, config.language, config.static_examples);
  return call_llm(std::move(outcome), bundle, context, config);
}

}  // namespace

NormalizationOutcome normalize_embedded(const corpus::ClaimRecord& record, std::span<const float> post_vector,
                                        const PipelineContext& context, const RunConfig& config) {
  if (config.zero_shot) {
    require_llm(context);
    return zero_shot(record, context, config);
  }
  require_index(context);
  const auto k = std::min(config.fewshot_n, context.index->size());
  const auto hits = retrieval::top_k(*context.index, post_vector, k, config.accumulation);
  const auto& best = hits.front();

  NormalizationOutcome outcome;
  outcome.record_id = record.id;
  outcome.best_similarity = best.similarity;
  if (decide(best, config.threshold_k) == GateDecision::Reuse) {
    const auto& neighbor = context.index->corpus().records[best.row_id];
    outcome.decision = Decision::Reused;
    outcome.neighbor_row_id = best.row_id;
    outcome.claim = neighbor.gold_claim.value();
    return outcome;
  }

  require_llm(context);
  outcome.decision = Decision::Generated;
  std::vector<Exemplar> exemplars;
  std::vector<std::size_t> ids;
  for (const auto& hit : hits) {
    const auto& rec = context.index->corpus().records[hit.row_id];
    exemplars.push_back({rec.post, rec.gold_claim.value()});
    ids.push_back(hit.row_id);
  }
  outcome.exemplar_row_ids = std::move(ids);
  const auto bundle = build_fewshot_prompt(record.post, exemplars, config.language);
  return call_llm(std::move(outcome), bundle, context, config);
}

NormalizationOutcome normalize_one(const corpus::ClaimRecord& record, const PipelineContext& context,
                                   const RunConfig& config) {
  if (config.zero_shot) return normalize_embedded(record, {}, context, config);
  require_index(context);
  if (context.embedder == nullptr) throw Error(Errc::ConfigError, "monolingual mode needs an embedder");
  const std::string post = record.post;
  try {
    const auto matrix = context.embedder->embed_normalized(std::span<const std::string>(&post, 1));
    return normalize_embedded(record, matrix.row(0), context, config);
  } catch (const Error& e) {
    if (e.code() == Errc::ProviderUnreachable || e.code() == Errc::MissingVector ||
        e.code() == Errc::DimensionMismatch || e.code() == Errc::ZeroVector) {
      throw Error(e.code(), "record " + std::to_string(record.id) + ": " + e.message());
    }
    throw;
  }
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunResult run_split(const std::vector<corpus::ClaimRecord>& records, const PipelineContext& context,
                    const RunConfig& config) {
  config.validate();
  const auto started = utc_timestamp();
  RunResult result;
  result.outcomes.resize(records.size());

  if (!records.empty()) {
    if (config.zero_shot) {
      require_llm(context);
      parallel_for(records.size(), config.jobs, [&](std::size_t i) {
        result.outcomes[i] = zero_shot(records[i], context, config);
      });
    } else {
      require_index(context);
      if (context.embedder == nullptr) throw Error(Errc::ConfigError, "monolingual mode needs an embedder");
      if (context.embedder->model_id() != context.index->model_id()) {
        throw Error(Errc::ConfigError, "query model " + context.embedder->model_id() +
                                           " differs from index model " + context.index->model_id());
      }
      std::vector<std::string> posts;
      posts.reserve(records.size());
      for (const auto& r : records) posts.push_back(r.post);
      const auto vectors = context.embedder->embed_normalized(posts);
      parallel_for(records.size(), config.jobs, [&](std::size_t i) {
        result.outcomes[i] = normalize_embedded(records[i], vectors.row(i), context, config);
      });
    }
  }
  for (const auto& o : result.outcomes) {
    if (o.decision == Decision::Failed) ++result.failed;
  }

  auto& m = result.manifest;
  m["config_hash"] = config.hash();
  m["language"] = config.language;
  m["mode"] = config.zero_shot ? "zero-shot" : "monolingual";
  m["embedding_model"] = config.model_id;
  m["llm_model"] = config.llm.model;
  m["threshold_k"] = config.threshold_k;
  m["n_records"] = records.size();
  m["decision_counts"] = decision_counts(result.outcomes);
  m["started_at"] = started;
  m["finished_at"] = utc_timestamp();
  m["config"] = config.to_json();
  return result;
}

nlohmann::ordered_json decision_counts(std::span<const NormalizationOutcome> outcomes) {
  nlohmann::ordered_json counts;
  for (auto d : {Decision::Reused, Decision::Generated, Decision::ZeroShot, Decision::Failed}) {
    counts[std::string(to_string(d))] = 0;
  }
  for (const auto& o : outcomes) {
    auto& c = counts[std::string(to_string(o.decision))];
    c = c.get<std::size_t>() + 1;
  }
  return counts;
}

std::string to_jsonl_line(const NormalizationOutcome& o) {
  nlohmann::ordered_json j;
  j["id"] = o.record_id;
  j["claim"] = o.claim;
  j["decision"] = to_string(o.decision);
  j["similarity"] = o.best_similarity ? nlohmann::ordered_json(*o.best_similarity) : nullptr;
  j["neighbor_row_id"] = o.neighbor_row_id ? nlohmann::ordered_json(*o.neighbor_row_id) : nullptr;
  j["exemplar_row_ids"] = o.exemplar_row_ids ? nlohmann::ordered_json(*o.exemplar_row_ids) : nullptr;
  if (!o.error.empty()) j["error"] = o.error;
  return j.dump();
}

NormalizationOutcome parse_outcome_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("outcome line: ") + e.what());
  }
  try {
    NormalizationOutcome o;
    o.record_id = j.at("id").get<std::size_t>();
    o.claim = j.at("claim").get<std::string>();
    o.decision = parse_decision(j.at("decision").get<std::string>());
    if (j.contains("similarity") && !j["similarity"].is_null()) o.best_similarity = j["similarity"].get<double>();
    if (j.contains("neighbor_row_id") && !j["neighbor_row_id"].is_null()) {
      o.neighbor_row_id = j["neighbor_row_id"].get<std::size_t>();
    }
    if (j.contains("exemplar_row_ids") && !j["exemplar_row_ids"].is_null()) {
      o.exemplar_row_ids = j["exemplar_row_ids"].get<std::vector<std::size_t>>();
    }
    o.error = j.value("error", "");
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("outcome line: ") + e.what());
  }
}

std::vector<NormalizationOutcome> read_outcomes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open outcomes file " + path.string());
  std::vector<NormalizationOutcome> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (unicode::is_blank(line)) continue;
    try {
      out.push_back(parse_outcome_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.message());
    }
  }
  return out;
}

void write_outcomes(std::ostream& out, std::span<const NormalizationOutcome> outcomes) {
  for (const auto& o : outcomes) out << to_jsonl_line(o) << '\n';
}

void write_submission(std::ostream& out, std::span<const NormalizationOutcome> outcomes) {
  for (const auto& o : outcomes) {
    std::string line = o.claim;
    for (char& c : line) {
      if (c == '\n' || c == '\r') c = ' ';
    }
    out << line << '\n';
  }
}

}  // namespace claimnorm::pipeline
