#include "claimnorm/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "claimnorm/corpus.hpp"
#include "claimnorm/data.hpp"
#include "claimnorm/embeddings.hpp"
#include "claimnorm/error.hpp"
#include "claimnorm/evalharness.hpp"
#include "claimnorm/kvconfig.hpp"
#include "claimnorm/llm.hpp"
#include "claimnorm/metrics.hpp"
#include "claimnorm/pipeline.hpp"
#include "claimnorm/retrieval.hpp"
#include "claimnorm/sha256.hpp"
#include "claimnorm/textstats.hpp"
#include "claimnorm/unicode.hpp"

namespace fs = std::filesystem;

namespace claimnorm::cli {

namespace {

struct Options {
  std::string command;
  std::string config_file;
  std::vector<std::string> sets;
  bool json_errors = false;
  std::optional<std::size_t> jobs;
  std::string run_root;
  std::string run_dir;

  std::string data_dir;
  std::string lang;
  std::string split;
  std::string provider;
  std::string llm;
  std::string record;
  std::string model;
  std::optional<double> threshold;
  std::string out;
  std::string format = "json";
  std::string outcomes;
  std::string hyp;
  std::string ref;
  std::string token_vectors;
  std::size_t top = 20;
  std::optional<double> bin_width;
  std::optional<double> grid_start;
  std::optional<double> grid_stop;
  std::optional<double> grid_step;
  bool stem = false;
  bool per_line = false;
};

std::optional<std::string> env_lookup(char** envp, std::string_view name) {
  if (envp == nullptr) return std::nullopt;
  for (char** e = envp; *e != nullptr; ++e) {
    const std::string_view entry(*e);
    if (entry.size() > name.size() && entry.substr(0, name.size()) == name && entry[name.size()] == '=') {
      return std::string(entry.substr(name.size() + 1));
    }
  }
  return std::nullopt;
}

KvConfig resolve_config(const Options& o, char** envp) {
  auto config = KvConfig::parse(data::defaults_conf(), "defaults.conf");
  if (!o.config_file.empty()) config.merge(KvConfig::from_file(o.config_file));
  config.merge(config_from_environment(envp));

  KvConfig flags;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(Errc::ConfigError, "--set expects KEY=VALUE, got '" + s + "'");
    const auto key = unicode::trim(std::string_view(s).substr(0, eq));
    if (!KvConfig::valid_key(key)) throw Error(Errc::ConfigError, "invalid config key '" + key + "'");
    flags.set_text(key, unicode::trim(std::string_view(s).substr(eq + 1)));
  }
  if (o.jobs) flags.set("run.jobs", *o.jobs);
  if (!o.run_root.empty()) flags.set("run.root", o.run_root);
  if (!o.provider.empty()) flags.set("embed.provider", o.provider);
  if (!o.llm.empty()) flags.set("llm.client", o.llm);
  if (!o.lang.empty() && o.threshold) flags.set("threshold." + o.lang, *o.threshold);
  if (!o.lang.empty() && !o.model.empty()) flags.set("registry." + o.lang, o.model);
  if (o.stem) flags.set("metrics.stem", true);
  if (o.bin_width) flags.set("audit.bin_width", *o.bin_width);
  if (o.grid_start) flags.set("sweep.grid_start", *o.grid_start);
  if (o.grid_stop) flags.set("sweep.grid_stop", *o.grid_stop);
  if (o.grid_step) flags.set("sweep.grid_step", *o.grid_step);
  config.merge(flags);
  return config;
}

std::size_t jobs_of(const KvConfig& config) {
  const auto jobs = config.get_int("run.jobs", 4);
  if (jobs < 1) throw Error(Errc::ConfigError, "run.jobs must be at least 1");
  return static_cast<std::size_t>(jobs);
}

metrics::MeteorOptions meteor_options(const KvConfig& config) {
  metrics::MeteorOptions m;
  m.stem = config.get_bool("metrics.stem", false);
  const auto limit = config.get_int("metrics.exhaustive_limit", 12);
  if (limit < 0) throw Error(Errc::ConfigError, "metrics.exhaustive_limit must be >= 0");
  m.exhaustive_limit = static_cast<std::size_t>(limit);
  return m;
}

std::unique_ptr<embeddings::EmbeddingProvider> make_provider(const KvConfig& config) {
  const auto spec = config.get_string("embed.provider", "");
  if (spec.empty()) throw Error(Errc::ConfigError, "no embedding provider; pass --provider file:PATH or a URL");
  embeddings::HttpProviderOptions options;
  options.batch_limit = static_cast<std::size_t>(config.get_int("embed.batch_limit", 64));
  options.max_in_flight = static_cast<std::size_t>(config.get_int("embed.max_in_flight", 4));
  return embeddings::make_provider(spec, options);
}

std::unique_ptr<embeddings::EmbeddingCache> make_cache(const KvConfig& config) {
  const auto path = config.get_string("embed.cache", "");
  if (path.empty()) return nullptr;
  return std::make_unique<embeddings::EmbeddingCache>(fs::path(path));
}

std::unique_ptr<llm::ChatClient> make_llm(const KvConfig& config, char** envp) {
  const auto spec = config.get_string("llm.client", "live");
  if (spec == "mock") return std::make_unique<llm::MockChatClient>(llm::MockChatClient::Mode::Echo);
  if (spec == "mock-fail") return std::make_unique<llm::MockChatClient>(llm::MockChatClient::Mode::Fail);
  if (spec.starts_with("mock:")) {
    return std::make_unique<llm::MockChatClient>(llm::MockChatClient::Mode::Canned, spec.substr(5));
  }
  if (spec.starts_with("replay:")) return std::make_unique<llm::ReplayChatClient>(fs::path(spec.substr(7)));
  if (spec == "live") {
    const auto key_env = config.get_string("llm.api_key_env", "OPENAI_API_KEY");
    const auto key = env_lookup(envp, key_env);
    if (!key || key->empty()) throw Error(Errc::AuthError, "environment variable " + key_env + " is not set");
    llm::HttpChatOptions options;
    options.base_url = config.get_string("llm.base_url", options.base_url);
    options.api_key = *key;
    options.max_concurrent = static_cast<std::size_t>(config.get_int("llm.max_concurrent", 4));
    options.requests_per_minute = static_cast<std::size_t>(config.get_int("llm.requests_per_minute", 500));
    return std::make_unique<llm::HttpChatClient>(options);
  }
  throw Error(Errc::ConfigError, "llm client must be live, mock, mock:TEXT, mock-fail or replay:FILE, got '" + spec + "'");
}

std::vector<corpus::ClaimRecord> load(const Options& o, corpus::Split split) {
  const auto path = corpus::split_path(o.data_dir, o.lang, split);
  return corpus::accept_split(corpus::read_split(path, o.lang, split));
}

corpus::PooledCorpus load_pool(const Options& o) {
  return corpus::pool(load(o, corpus::Split::train), load(o, corpus::Split::dev));
}

std::vector<std::string> posts_of(const std::vector<corpus::ClaimRecord>& records) {
  std::vector<std::string> posts;
  posts.reserve(records.size());
  for (const auto& r : records) posts.push_back(r.post);
  return posts;
}

std::vector<corpus::Split> splits_of(const std::string& name) {
  if (name.empty() || name == "all") return {corpus::Split::train, corpus::Split::dev, corpus::Split::test};
  return {corpus::parse_split(name)};
}

std::string utc_stamp(const char* format) {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

// <run.root>/<first 12 hex of the config hash>-<UTC timestamp>. The hash
// covers the command, its inputs and the resolved config except run.jobs.
fs::path make_run_dir(const Options& o, const KvConfig& config) {
  if (!o.run_dir.empty()) {
    fs::create_directories(o.run_dir);
    return o.run_dir;
  }
  std::ostringstream basis;
  basis << o.command << '\n' << o.data_dir << '\n' << o.lang << '\n' << o.split << '\n';
  std::istringstream lines(config.serialize());
  for (std::string line; std::getline(lines, line);) {
    if (!line.starts_with("run.jobs ")) basis << line << '\n';
  }
  const auto stem = sha256_hex(basis.str()).substr(0, 12) + "-" + utc_stamp("%Y%m%dT%H%M%SZ");
  const fs::path root = config.get_string("run.root", "runs");
  fs::path dir = root / stem;
  for (int n = 2; fs::exists(dir); ++n) dir = root / (stem + "-" + std::to_string(n));
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
  f << content;
  if (!f) throw Error(Errc::IoError, "write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void emit(const Options& o, std::ostream& out, const std::string& text) {
  if (o.out.empty()) {
    out << text;
  } else {
    write_file(o.out, text);
  }
}

// --- commands -------------------------------------------------------------------

int cmd_validate(const Options& o, std::ostream& out) {
  nlohmann::ordered_json j;
  j["language"] = o.lang;
  int status = 0;
  for (auto split : splits_of(o.split)) {
    const auto load = corpus::read_split(corpus::split_path(o.data_dir, o.lang, split), o.lang, split);
    auto report = corpus::validate(load.records);
    report.rejected = load.rejected;
    auto rj = corpus::to_json(report);
    rj["total_rows"] = load.total_rows;
    try {
      corpus::accept_split(load);
      rj["accepted"] = true;
    } catch (const Error& e) {
      rj["accepted"] = false;
      rj["error"] = e.what();
      status = 1;
    }
    j[std::string(corpus::to_string(split))] = std::move(rj);
  }
  emit(o, out, j.dump(2) + "\n");
  return status;
}

nlohmann::ordered_json bertscore_probe(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read token vectors " + path.string());
  auto to_matrix = [](const nlohmann::json& rows) {
    return embeddings::l2_normalize(
        embeddings::EmbeddingMatrix::from_rows("tokens", rows.get<std::vector<std::vector<float>>>()));
  };
  std::vector<double> recalls;
  auto per_record = nlohmann::ordered_json::array();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (unicode::is_blank(line)) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      // The claim is the reference: recall measures how much of it is
      // supported by some post token.
      const auto s = metrics::bertscore_lite(to_matrix(j.at("post")), to_matrix(j.at("claim")));
      recalls.push_back(s.recall);
      per_record.push_back({{"id", j.value("id", line_no - 1)}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::IoError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (recalls.empty()) throw Error(Errc::EmptyInput, "no token vectors in " + path.string());
  double sum = 0.0;
  for (double r : recalls) sum += r;
  nlohmann::ordered_json j;
  j["n"] = recalls.size();
  j["mean_recall"] = sum / static_cast<double>(recalls.size());
  j["per_record"] = std::move(per_record);
  return j;
}

int cmd_eda(const Options& o, std::ostream& out) {
  nlohmann::ordered_json j;
  j["language"] = o.lang;
  std::vector<corpus::ClaimRecord> labeled;
  auto splits = nlohmann::ordered_json::object();
  for (auto split : splits_of(o.split)) {
    const auto path = corpus::split_path(o.data_dir, o.lang, split);
    if (o.split.empty() && !fs::exists(path)) continue;
    const auto records = corpus::accept_split(corpus::read_split(path, o.lang, split));
    if (records.empty()) continue;
    const auto stats = textstats::token_stats(records);
    std::size_t with_hashtag = 0, with_emoji = 0, with_url = 0, hashtags = 0, emoji = 0, urls = 0, triplicates = 0;
    for (const auto& r : records) {
      const auto f = textstats::structural_features(r.post);
      with_hashtag += f.hashtag_count > 0;
      with_emoji += f.emoji_count > 0;
      with_url += f.url_count > 0;
      hashtags += f.hashtag_count;
      emoji += f.emoji_count;
      urls += f.url_count;
      triplicates += textstats::detect_triplicate(r.post).has_value();
      if (r.gold_claim) labeled.push_back(r);
    }
    nlohmann::ordered_json s;
    s["n_records"] = stats.n_records;
    s["avg_post_tokens"] = stats.avg_post_tokens;
    s["n_claims"] = stats.n_claims;
    s["avg_claim_tokens"] = stats.avg_claim_tokens;
    s["posts_with_hashtags"] = with_hashtag;
    s["posts_with_emoji"] = with_emoji;
    s["posts_with_urls"] = with_url;
    s["hashtags"] = hashtags;
    s["emoji"] = emoji;
    s["urls"] = urls;
    s["triplicate_posts"] = triplicates;
    splits[std::string(corpus::to_string(split))] = std::move(s);
  }
  if (splits.empty()) throw Error(Errc::EmptyInput, "no records found for language " + o.lang);
  j["splits"] = std::move(splits);
  if (!labeled.empty()) {
    auto top = nlohmann::ordered_json::array();
    for (const auto& [token, count] : textstats::top_tokens(labeled, o.top, textstats::english_stopwords())) {
      top.push_back({token, count});
    }
    j["top_claim_tokens"] = std::move(top);
  }
  if (!o.token_vectors.empty()) j["bertscore_lite"] = bertscore_probe(o.token_vectors);
  emit(o, out, j.dump(2) + "\n");
  return 0;
}

std::string model_for(const KvConfig& config, const std::string& lang) {
  return embeddings::ModelRegistry::from_config(config).lookup(lang);
}

int cmd_embed(const Options& o, const KvConfig& config, std::ostream& out) {
  if (o.out.empty()) throw Error(Errc::ConfigError, "embed needs --out FILE");
  const auto model = model_for(config, o.lang);
  std::vector<std::string> texts;
  std::set<std::string> seen;
  for (auto split : splits_of(o.split)) {
    const auto path = corpus::split_path(o.data_dir, o.lang, split);
    if (o.split.empty() && !fs::exists(path)) continue;
    for (const auto& r : corpus::accept_split(corpus::read_split(path, o.lang, split))) {
      if (seen.insert(r.post).second) texts.push_back(r.post);
    }
  }
  if (texts.empty()) throw Error(Errc::EmptyInput, "no posts to embed");
  auto provider = make_provider(config);
  auto cache = make_cache(config);
  const auto matrix = embeddings::embed_batch(*provider, texts, model, cache.get());
  std::ofstream f(o.out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot write " + o.out);
  embeddings::write_vector_file(f, texts, matrix);
  nlohmann::ordered_json j;
  j["model"] = model;
  j["texts"] = texts.size();
  j["dim"] = matrix.dim();
  j["provider_calls"] = provider->calls();
  j["out"] = o.out;
  out << j.dump() << "\n";
  return 0;
}

retrieval::Index build_index(const corpus::PooledCorpus& pooled, const embeddings::Embedder& embedder) {
  return retrieval::build_index(pooled, embedder.embed_normalized(posts_of(pooled.records)));
}

int cmd_audit(const Options& o, const KvConfig& config, std::ostream& out) {
  const auto model = model_for(config, o.lang);
  auto provider = make_provider(config);
  auto cache = make_cache(config);
  const embeddings::Embedder embedder(*provider, model, cache.get());
  const auto index = build_index(load_pool(o), embedder);
  const auto split = o.split.empty() ? corpus::Split::test : corpus::parse_split(o.split);
  const auto test = load(o, split);
  retrieval::OverlapOptions options;
  options.bin_width = config.get_double("audit.bin_width", 0.05);
  options.thresholds = config.get_doubles("audit.thresholds");
  options.accumulation = retrieval::parse_accumulation(config.get_string("retrieval.accumulate", "f32"));
  options.jobs = jobs_of(config);
  const auto vectors = test.empty() ? embeddings::EmbeddingMatrix(model, index.dim(), {}, true)
                                    : embedder.embed_normalized(posts_of(test));
  auto j = retrieval::to_json(retrieval::overlap_audit(index, vectors, options));
  nlohmann::ordered_json wrapped;
  wrapped["language"] = o.lang;
  wrapped["model"] = model;
  wrapped["split"] = corpus::to_string(split);
  for (auto& [k, v] : j.items()) wrapped[k] = v;
  emit(o, out, wrapped.dump(2) + "\n");
  return 0;
}

int cmd_normalize(const Options& o, const KvConfig& config, char** envp, std::ostream& out, std::ostream& err) {
  auto rc = pipeline::run_config_from(config, o.lang);
  rc.jobs = jobs_of(config);
  rc.validate();
  const auto split = o.split.empty() ? corpus::Split::test : corpus::parse_split(o.split);
  const auto records = load(o, split);

  auto llm_client = make_llm(config, envp);
  std::unique_ptr<llm::TranscriptLog> log;
  if (!o.record.empty()) {
    log = std::make_unique<llm::TranscriptLog>(o.record);
    llm_client->set_transcript_log(log.get());
  }

  std::unique_ptr<embeddings::EmbeddingProvider> provider;
  std::unique_ptr<embeddings::EmbeddingCache> cache;
  std::optional<embeddings::Embedder> embedder;
  std::optional<retrieval::Index> index;
  pipeline::PipelineContext context;
  context.llm = llm_client.get();
  if (!rc.zero_shot) {
    provider = make_provider(config);
    cache = make_cache(config);
    embedder.emplace(*provider, rc.model_id, cache.get());
    index.emplace(build_index(load_pool(o), *embedder));
    context.index = &*index;
    context.embedder = &*embedder;
  }

  const auto result = pipeline::run_split(records, context, rc);
  const auto dir = make_run_dir(o, config);
  std::ostringstream outcomes, submission;
  pipeline::write_outcomes(outcomes, result.outcomes);
  pipeline::write_submission(submission, result.outcomes);
  write_file(dir / "outcomes.jsonl", outcomes.str());
  write_file(dir / "submission.txt", submission.str());
  auto manifest = result.manifest;
  manifest["command"] = "normalize";
  manifest["data_dir"] = o.data_dir;
  manifest["split"] = corpus::to_string(split);
  manifest["jobs"] = rc.jobs;
  manifest["failed"] = result.failed;
  manifest["resolved_config"] = config.to_json();
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_file(dir / "config.conf", config.serialize());
  out << dir.string() << "\n";
  if (result.failed > 0) {
    err << result.failed << " of " << records.size() << " records failed\n";
    return 1;
  }
  return 0;
}

int cmd_evaluate(const Options& o, const KvConfig& config, std::ostream& out) {
  const auto split = o.split.empty() ? corpus::Split::test : corpus::parse_split(o.split);
  const auto gold = load(o, split);
  const auto outcomes = pipeline::read_outcomes(o.outcomes);
  auto report = evalharness::evaluate_run(outcomes, gold, meteor_options(config));
  if (o.threshold) report.threshold = *o.threshold;
  emit(o, out, evalharness::emit_report(report, o.format));
  return 0;
}

int cmd_sweep(const Options& o, const KvConfig& config, char** envp, std::ostream& out) {
  auto rc = pipeline::run_config_from(config, o.lang);
  rc.jobs = jobs_of(config);
  rc.validate();
  if (rc.zero_shot) throw Error(Errc::ConfigError, "language " + o.lang + " has no embedding model to sweep");
  const auto grid = evalharness::make_grid(config.get_double("sweep.grid_start"), config.get_double("sweep.grid_stop"),
                                           config.get_double("sweep.grid_step"));
  auto llm_client = make_llm(config, envp);
  std::unique_ptr<llm::TranscriptLog> log;
  if (!o.record.empty()) {
    log = std::make_unique<llm::TranscriptLog>(o.record);
    llm_client->set_transcript_log(log.get());
  }
  auto provider = make_provider(config);
  auto cache = make_cache(config);
  const embeddings::Embedder embedder(*provider, rc.model_id, cache.get());
  // Dev gold must not answer itself, so the index holds train only.
  const auto train = corpus::pool(load(o, corpus::Split::train), {});
  const auto index = build_index(train, embedder);
  const auto dev = load(o, corpus::Split::dev);
  const pipeline::PipelineContext context{&index, &embedder, llm_client.get()};
  const auto result = evalharness::sweep_threshold(dev, context, grid, rc, meteor_options(config));

  auto j = evalharness::to_json(result);
  nlohmann::ordered_json doc;
  doc["language"] = o.lang;
  doc["config_hash"] = rc.hash();
  for (auto& [k, v] : j.items()) doc[k] = v;
  const auto dir = make_run_dir(o, config);
  write_file(dir / "sweep.json", doc.dump(2) + "\n");
  write_file(dir / "config.conf", config.serialize());
  doc["run_dir"] = dir.string();
  emit(o, out, doc.dump(2) + "\n");
  return 0;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

int cmd_meteor(const Options& o, const KvConfig& config, std::ostream& out) {
  const auto hyp = read_lines(o.hyp);
  const auto ref = read_lines(o.ref);
  if (hyp.size() != ref.size()) {
    throw Error(Errc::RowCountMismatch, o.hyp + " has " + std::to_string(hyp.size()) + " lines but " + o.ref +
                                            " has " + std::to_string(ref.size()));
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < hyp.size(); ++i) pairs.emplace_back(hyp[i], ref[i]);
  const auto options = meteor_options(config);
  const double mean = metrics::corpus_meteor(pairs, options);
  char buf[64];
  if (o.per_line) {
    for (const auto& [h, r] : pairs) {
      std::snprintf(buf, sizeof buf, "%.6f\n", metrics::meteor(h, r, options).score);
      out << buf;
    }
  }
  std::snprintf(buf, sizeof buf, "%.6f", mean);
  out << "n=" << pairs.size() << " mean_meteor=" << buf << "\n";
  return 0;
}

void report_error(std::ostream& err, bool json, std::string_view code, const std::string& message) {
  if (json) {
    nlohmann::ordered_json j;
    j["error"] = {{"code", code}, {"message", message}};
    err << j.dump() << "\n";
  } else {
    err << "claimnorm: " << message << "\n";
  }
}

}  // namespace

int run_command(int argc, const char* const* argv, char** envp, std::ostream& out, std::ostream& err) {
  Options o;
  for (int i = 1; i < argc; ++i) {
    if (std::string_view(argv[i]) == "--json-errors") o.json_errors = true;
  }

  CLI::App app{"Retrieval-first claim normalization", "claimnorm"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", o.config_file, "Config file (key = JSON value per line)")->check(CLI::ExistingFile);
  app.add_option("--set", o.sets, "Override one config key, KEY=VALUE (repeatable)");
  app.add_flag("--json-errors", o.json_errors, "Report errors as one JSON object on stderr");
  app.add_option("--jobs", o.jobs, "Worker threads (run.jobs)")->check(CLI::PositiveNumber);
  app.add_option("--run-root", o.run_root, "Directory that receives run directories (run.root)");
  app.add_option("--run-dir", o.run_dir, "Write run artifacts to exactly this directory");

  auto data_opts = [&](CLI::App* sub, bool split_default_all) {
    sub->add_option("--data", o.data_dir, "Data root containing <lang>/<split>.csv")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--lang", o.lang, "Language code")->required();
    sub->add_option("--split", o.split, split_default_all ? "train, dev, test or all (default all)"
                                                          : "train, dev or test (default test)")
        ->check(CLI::IsMember({"train", "dev", "test", "all"}));
  };
  auto provider_opts = [&](CLI::App* sub) {
    sub->add_option("--provider", o.provider, "Embedding provider: file:PATH or server URL (embed.provider)");
    sub->add_option("--model", o.model, "Embedding model id, overriding the registry for --lang");
  };
  auto llm_opts = [&](CLI::App* sub) {
    sub->add_option("--llm", o.llm, "live, mock, mock:TEXT, mock-fail or replay:FILE (llm.client)");
    sub->add_option("--record", o.record, "Append LLM transcripts to this JSONL file");
  };
  auto out_opt = [&](CLI::App* sub, const char* what) { sub->add_option("--out", o.out, what); };

  auto* validate = app.add_subcommand("validate", "Check split files and report rejected rows and duplicates");
  data_opts(validate, true);
  out_opt(validate, "Write the JSON report here instead of stdout");

  auto* eda = app.add_subcommand("eda", "Token, hashtag, emoji, URL and repetition statistics");
  data_opts(eda, true);
  eda->add_option("--top", o.top, "Number of top claim tokens")->check(CLI::PositiveNumber);
  eda->add_option("--token-vectors", o.token_vectors, "JSONL of per-record post/claim token vectors for a recall probe")
      ->check(CLI::ExistingFile);
  out_opt(eda, "Write the JSON report here instead of stdout");

  auto* embed = app.add_subcommand("embed", "Embed posts and write a vector file");
  data_opts(embed, true);
  provider_opts(embed);
  embed->add_option("--out", o.out, "Vector file to write")->required();

  auto* audit = app.add_subcommand("audit-overlap", "Best pooled match for every post of a split");
  data_opts(audit, false);
  provider_opts(audit);
  audit->add_option("--bin-width", o.bin_width, "Histogram bin width (audit.bin_width)");
  out_opt(audit, "Write the JSON report here instead of stdout");

  auto* normalize = app.add_subcommand("normalize", "Run the reuse-or-generate pipeline over a split");
  data_opts(normalize, false);
  provider_opts(normalize);
  llm_opts(normalize);
  normalize->add_option("--threshold", o.threshold, "Reuse threshold k for --lang")->check(CLI::Range(0.0, 1.0));

  auto* evaluate = app.add_subcommand("evaluate", "Score an outcomes file against gold claims");
  data_opts(evaluate, false);
  evaluate->add_option("--outcomes", o.outcomes, "outcomes.jsonl of a run")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--format", o.format, "json, tsv or text-table");
  evaluate->add_option("--threshold", o.threshold, "Threshold to show in the report");
  evaluate->add_flag("--stem", o.stem, "Add the Porter stem matching stage (metrics.stem)");
  out_opt(evaluate, "Write the report here instead of stdout");

  auto* sweep = app.add_subcommand("sweep", "Tune k on dev with a train-only index");
  data_opts(sweep, false);
  provider_opts(sweep);
  llm_opts(sweep);
  sweep->add_option("--grid-start", o.grid_start, "First k (sweep.grid_start)");
  sweep->add_option("--grid-stop", o.grid_stop, "Last k (sweep.grid_stop)");
  sweep->add_option("--grid-step", o.grid_step, "Step (sweep.grid_step)");
  sweep->add_flag("--stem", o.stem, "Add the Porter stem matching stage (metrics.stem)");
  out_opt(sweep, "Write the JSON result here instead of stdout");

  auto* meteor = app.add_subcommand("meteor", "Mean METEOR of two line-aligned text files");
  meteor->add_option("hyp", o.hyp, "Candidate lines")->required()->check(CLI::ExistingFile);
  meteor->add_option("ref", o.ref, "Reference lines")->required()->check(CLI::ExistingFile);
  meteor->add_flag("--stem", o.stem, "Add the Porter stem matching stage (metrics.stem)");
  meteor->add_flag("--per-line", o.per_line, "Print each line's score before the mean");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    CLI::App* failed = &app;
    for (auto* sub : app.get_subcommands()) failed = sub;
    if (o.json_errors) {
      report_error(err, true, "UsageError", e.what());
    } else {
      err << "claimnorm: " << e.what() << "\n\n" << failed->help();
    }
    return 2;
  }

  o.command = app.get_subcommands().front()->get_name();
  try {
    const auto config = resolve_config(o, envp);
    if (o.command == "validate") return cmd_validate(o, out);
    if (o.command == "eda") return cmd_eda(o, out);
    if (o.command == "embed") return cmd_embed(o, config, out);
    if (o.command == "audit-overlap") return cmd_audit(o, config, out);
    if (o.command == "normalize") return cmd_normalize(o, config, envp, out, err);
    if (o.command == "evaluate") return cmd_evaluate(o, config, out);
    if (o.command == "sweep") return cmd_sweep(o, config, envp, out);
    if (o.command == "meteor") return cmd_meteor(o, config, out);
    return 2;
  } catch (const Error& e) {
    report_error(err, o.json_errors, to_string(e.code()), o.json_errors ? e.message() : std::string(e.what()));
    return is_config_error(e.code()) ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    report_error(err, o.json_errors, "IoError", e.what());
    return 1;
  }
}

}  // namespace claimnorm::cli
