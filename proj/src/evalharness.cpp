#include "claimnorm/evalharness.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include "claimnorm/error.hpp"
#include "claimnorm/llm.hpp"
#include "claimnorm/parallel.hpp"

namespace claimnorm::evalharness {

EvalReport evaluate_run(std::span<const pipeline::NormalizationOutcome> outcomes,
                        const std::vector<corpus::ClaimRecord>& gold, const metrics::MeteorOptions& options) {
  std::unordered_map<std::size_t, const pipeline::NormalizationOutcome*> by_id;
  for (const auto& o : outcomes) {
    if (!by_id.emplace(o.record_id, &o).second) {
      throw Error(Errc::IdMismatch, "outcome id " + std::to_string(o.record_id) + " appears twice");
    }
  }
  std::set<std::size_t> gold_ids;
  for (const auto& g : gold) {
    if (!gold_ids.insert(g.id).second) throw Error(Errc::IdMismatch, "gold id " + std::to_string(g.id) + " appears twice");
    if (!by_id.contains(g.id)) throw Error(Errc::IdMismatch, "no outcome for gold id " + std::to_string(g.id));
    if (!g.gold_claim) throw Error(Errc::MissingGold, "gold record " + std::to_string(g.id) + " has no claim");
  }
  for (const auto& o : outcomes) {
    if (!gold_ids.contains(o.record_id)) {
      throw Error(Errc::IdMismatch, "outcome id " + std::to_string(o.record_id) + " has no gold record");
    }
  }
  if (gold.empty()) throw Error(Errc::EmptyInput, "nothing to evaluate");

  EvalReport report;
  report.language = gold.front().language;
  report.n = gold.size();
  for (auto d : {pipeline::Decision::Reused, pipeline::Decision::Generated, pipeline::Decision::ZeroShot,
                 pipeline::Decision::Failed}) {
    report.decision_counts[std::string(pipeline::to_string(d))] = 0;
  }
  report.per_record.resize(gold.size());
  parallel_for(gold.size(), 4, [&](std::size_t i) {
    const auto& o = *by_id.at(gold[i].id);
    report.per_record[i] = {gold[i].id, metrics::meteor(o.claim, *gold[i].gold_claim, options).score,
                            std::string(pipeline::to_string(o.decision))};
  });
  double sum = 0.0;
  for (const auto& r : report.per_record) {
    sum += r.score;
    ++report.decision_counts[r.decision];
  }
  report.mean_meteor = sum / static_cast<double>(report.n);
  return report;
}

std::vector<double> make_grid(double start, double stop, double step) {
  if (!(step > 0.0)) throw Error(Errc::ConfigError, "sweep step must be positive");
  if (start > stop) throw Error(Errc::ConfigError, "sweep start exceeds stop");
  std::vector<double> grid;
  const auto n = static_cast<long long>(std::floor((stop - start) / step + 1e-9));
  for (long long i = 0; i <= n; ++i) {
    grid.push_back(std::round((start + static_cast<double>(i) * step) * 1e9) / 1e9);
  }
  return grid;
}

SweepResult sweep_threshold(const std::vector<corpus::ClaimRecord>& dev, const pipeline::PipelineContext& context,
                            std::span<const double> grid, const pipeline::RunConfig& config,
                            const metrics::MeteorOptions& options) {
  if (grid.empty()) throw Error(Errc::ConfigError, "sweep grid is empty");
  for (double k : grid) {
    if (!(k >= 0.0 && k <= 1.0)) throw Error(Errc::ConfigError, "sweep value " + std::to_string(k) + " is outside [0, 1]");
  }
  if (config.zero_shot) throw Error(Errc::ConfigError, "zero-shot languages have no threshold to sweep");
  if (context.llm == nullptr) throw Error(Errc::ConfigError, "no LLM client configured");

  llm::MemoChatClient memo(*context.llm);
  pipeline::PipelineContext memo_context = context;
  memo_context.llm = &memo;

  SweepResult result;
  result.grid.assign(grid.begin(), grid.end());
  for (double k : grid) {
    auto rc = config;
    rc.threshold_k = k;
    const auto run = pipeline::run_split(dev, memo_context, rc);
    auto report = evaluate_run(run.outcomes, dev, options);
    report.threshold = k;
    result.scores.push_back(report.mean_meteor);
    result.reports.push_back(std::move(report));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.grid.size(); ++i) {
    if (result.scores[i] > result.scores[best] ||
        (result.scores[i] == result.scores[best] && result.grid[i] < result.grid[best])) {
      best = i;
    }
  }
  result.best_k = result.grid[best];
  return result;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["language"] = report.language;
  j["threshold"] = report.threshold ? nlohmann::ordered_json(*report.threshold) : nullptr;
  j["mean_meteor"] = report.mean_meteor;
  j["n"] = report.n;
  j["decision_counts"] = report.decision_counts;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.per_record) rows.push_back({{"id", r.id}, {"score", r.score}, {"decision", r.decision}});
  j["per_record"] = std::move(rows);
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.language = j.at("language").get<std::string>();
    if (!j.at("threshold").is_null()) r.threshold = j["threshold"].get<double>();
    r.mean_meteor = j.at("mean_meteor").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.decision_counts = j.at("decision_counts").get<std::map<std::string, std::size_t>>();
    for (const auto& row : j.at("per_record")) {
      r.per_record.push_back({row.at("id").get<std::size_t>(), row.at("score").get<double>(),
                              row.at("decision").get<std::string>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("report JSON: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const SweepResult& result) {
  nlohmann::ordered_json j;
  j["best_k"] = result.best_k;
  auto curve = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < result.grid.size(); ++i) {
    nlohmann::ordered_json point;
    point["k"] = result.grid[i];
    point["mean_meteor"] = result.scores[i];
    if (i < result.reports.size()) point["decision_counts"] = result.reports[i].decision_counts;
    curve.push_back(std::move(point));
  }
  j["curve"] = std::move(curve);
  return j;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string emit_table(std::span<const EvalReport> reports) {
  std::vector<std::array<std::string, 3>> rows = {{"Lang", "Threshold", "METEOR"}};
  for (const auto& r : reports) {
    rows.push_back({r.language, r.threshold ? fixed(*r.threshold, 2) : "-", fixed(r.mean_meteor, 4)});
  }
  std::array<std::size_t, 3> width{};
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < 3; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << pad(rows[i][0], width[0]) << "  " << pad(rows[i][1], width[1]) << "  " << rows[i][2] << '\n';
    if (i == 0) {
      out << std::string(width[0], '-') << "  " << std::string(width[1], '-') << "  "
          << std::string(width[2], '-') << '\n';
    }
  }
  return out.str();
}

std::string emit_report(const EvalReport& report, std::string_view format) {
  if (format == "json") return to_json(report).dump(2) + "\n";
  if (format == "tsv") {
    std::string out = "id\tscore\tdecision\n";
    for (const auto& r : report.per_record) {
      out += std::to_string(r.id) + "\t" + fixed(r.score, 6) + "\t" + r.decision + "\n";
    }
    return out;
  }
  if (format == "text-table") return emit_table(std::span<const EvalReport>(&report, 1));
  throw Error(Errc::UnknownFormat, "unknown report format '" + std::string(format) + "' (json, tsv, text-table)");
}

}  // namespace claimnorm::evalharness
