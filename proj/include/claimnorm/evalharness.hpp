#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "claimnorm/corpus.hpp"
#include "claimnorm/metrics.hpp"
#include "claimnorm/pipeline.hpp"

namespace claimnorm::evalharness {

struct RecordScore {
  std::size_t id = 0;
  double score = 0.0;
  std::string decision;

  bool operator==(const RecordScore&) const = default;
};

struct EvalReport {
  std::string language;
  std::optional<double> threshold;
  double mean_meteor = 0.0;
  std::size_t n = 0;
  std::map<std::string, std::size_t> decision_counts;
  std::vector<RecordScore> per_record;  // gold order

  bool operator==(const EvalReport&) const = default;
};

// Scores each outcome against the gold record with the same id. Throws
// IdMismatch when the id sets differ or an id repeats, MissingGold when a
// gold record has no claim, EmptyInput when there is nothing to score.
EvalReport evaluate_run(std::span<const pipeline::NormalizationOutcome> outcomes,
                        const std::vector<corpus::ClaimRecord>& gold,
                        const metrics::MeteorOptions& options = {});

struct SweepResult {
  std::vector<double> grid;
  std::vector<double> scores;  // mean METEOR per grid value
  double best_k = 0.0;         // highest score, smallest k on ties
  std::vector<EvalReport> reports;
};

// Inclusive start..stop grid; values are rounded to 1e-9 so the step does
// not drift. Throws ConfigError for a non-positive step or start > stop.
std::vector<double> make_grid(double start, double stop, double step);

// Runs the pipeline over `dev` once per grid value and scores each run.
// LLM answers are memoized so later grid points only change the gate.
// `index` should hold train records only. Throws ConfigError for an empty
// grid, values outside [0, 1], or a zero-shot config.
SweepResult sweep_threshold(const std::vector<corpus::ClaimRecord>& dev, const pipeline::PipelineContext& context,
                            std::span<const double> grid, const pipeline::RunConfig& config,
                            const metrics::MeteorOptions& options = {});

nlohmann::ordered_json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SweepResult& result);

// "json", "tsv" (one row per record) or "text-table" (Lang, Threshold,
// METEOR). Throws UnknownFormat otherwise.
std::string emit_report(const EvalReport& report, std::string_view format);
std::string emit_table(std::span<const EvalReport> reports);

}  // namespace claimnorm::evalharness
