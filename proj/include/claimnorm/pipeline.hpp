#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "claimnorm/corpus.hpp"
#include "claimnorm/embeddings.hpp"
#include "claimnorm/kvconfig.hpp"
#include "claimnorm/llm.hpp"
#include "claimnorm/retrieval.hpp"

namespace claimnorm::pipeline {

// System message; every "{lang}" is replaced by the target language code.
inline constexpr std::string_view kSystemPromptTemplate =
    "You are an assistant that, given a post, identifies the central check-worthy claim contained "
    "within it. Summarize it in one sentence. Internally, you must perform detailed step-by-step "
    "reasoning to arrive at the final claim, but do not output any of your reasoning. Your final "
    "response should be a single sentence containing only the normalized claim, with no prefatory "
    "phrases such as 'the central claim is,' 'therefore,' or any similar expressions. Even if the "
    "input is ambiguous, always provide your best normalized claim without indicating that more "
    "context is needed. You will receive some examples in following ISO language code: {lang} and "
    "you will give responses in the following ISO language code: {lang}. Do not use any language "
    "other than {lang} in your response. Do not respond in English unless the post you need to "
    "normalize is in English.";

inline constexpr std::string_view kUserPromptPrefix = "Identify the central claim in the given post: ";
inline constexpr std::string_view kUserPromptSuffix = "\nLet's think step by step.";

std::string system_prompt(std::string_view language);
std::string user_prompt(std::string_view post);

struct Exemplar {
  std::string post;
  std::string claim;

  bool operator==(const Exemplar&) const = default;
};

// JSON Lines of {"post": ..., "claim": ...}. Throws ConfigError.
std::vector<Exemplar> parse_exemplars(std::string_view jsonl, std::string_view source = "<string>");
std::vector<Exemplar> default_static_examples();

struct PromptBundle {
  std::vector<llm::ChatMessage> messages;
  std::string language;
};

// System message, then one user/assistant pair per exemplar in the given
// order, then the target post as the final user message. Throws
// InvalidArgument when `exemplars` is empty.
PromptBundle build_fewshot_prompt(std::string_view post, std::span<const Exemplar> exemplars,
                                  std::string_view language);

// Same layout with the fixed exemplar set. Throws ConfigError when
// `static_examples` is empty.
PromptBundle build_zeroshot_prompt(std::string_view post, std::string_view language,
                                   std::span<const Exemplar> static_examples);

nlohmann::ordered_json to_json(const PromptBundle& bundle);

enum class GateDecision { Reuse, Generate };

// Reuse when similarity >= threshold_k.
GateDecision decide(const retrieval::RetrievalHit& best_hit, double threshold_k);

// Strips one leading preface (case-insensitive), surrounding whitespace and
// matching quote pairs, and joins lines with single spaces. Falls back to
// the input when nothing would be left.
std::string sanitize_output(std::string_view text, std::span<const std::string> preface_patterns);

std::vector<std::string> default_preface_patterns();

struct RunConfig {
  std::string language;
  double threshold_k = 0.80;
  std::size_t fewshot_n = 3;
  std::string model_id;  // embedding model; empty in zero-shot mode
  llm::ChatParams llm;
  bool zero_shot = false;
  std::vector<Exemplar> static_examples;
  std::vector<std::string> preface_patterns = default_preface_patterns();
  retrieval::Accumulation accumulation = retrieval::Accumulation::f32;
  std::size_t jobs = 4;

  void validate() const;  // throws ConfigError

  // Everything except `jobs`, which does not affect results.
  nlohmann::ordered_json to_json() const;
  std::string hash() const;
};

// threshold.<lang> from the shipped defaults, else pipeline.default_threshold.
double default_threshold(std::string_view language);

// Resolves a run configuration from flat config keys. Languages without a
// registry entry run zero-shot.
RunConfig run_config_from(const KvConfig& config, std::string_view language);

enum class Decision { Reused, Generated, ZeroShot, Failed };

std::string_view to_string(Decision decision);
Decision parse_decision(std::string_view name);

struct NormalizationOutcome {
  std::size_t record_id = 0;
  std::string claim;
  Decision decision = Decision::Generated;
  std::optional<double> best_similarity;
  std::optional<std::size_t> neighbor_row_id;
  std::optional<std::vector<std::size_t>> exemplar_row_ids;
  std::string error;  // set for Failed outcomes

  bool operator==(const NormalizationOutcome&) const = default;
};

// Dependencies of a run. `index` and `embedder` may be null in zero-shot mode.
struct PipelineContext {
  const retrieval::Index* index = nullptr;
  const embeddings::Embedder* embedder = nullptr;
  llm::ChatClient* llm = nullptr;
};

NormalizationOutcome normalize_one(const corpus::ClaimRecord& record, const PipelineContext& context,
                                   const RunConfig& config);

// Same as normalize_one with the post's unit vector already computed.
NormalizationOutcome normalize_embedded(const corpus::ClaimRecord& record,
                                        std::span<const float> post_vector,
                                        const PipelineContext& context, const RunConfig& config);

struct RunResult {
  std::vector<NormalizationOutcome> outcomes;  // input order
  nlohmann::ordered_json manifest;
  std::size_t failed = 0;
};

// Embeds all posts, then normalizes them on up to config.jobs threads.
RunResult run_split(const std::vector<corpus::ClaimRecord>& records, const PipelineContext& context,
                    const RunConfig& config);

nlohmann::ordered_json decision_counts(std::span<const NormalizationOutcome> outcomes);

// {"id","claim","decision","similarity","neighbor_row_id","exemplar_row_ids"[,"error"]}
std::string to_jsonl_line(const NormalizationOutcome& outcome);
NormalizationOutcome parse_outcome_line(std::string_view line);
std::vector<NormalizationOutcome> read_outcomes(const std::filesystem::path& path);
void write_outcomes(std::ostream& out, std::span<const NormalizationOutcome> outcomes);

// One claim per line in input order; line breaks inside a claim become spaces.
void write_submission(std::ostream& out, std::span<const NormalizationOutcome> outcomes);

}  // namespace claimnorm::pipeline
