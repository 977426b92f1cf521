// SPDX-License-Identifier: Apache-2.0
#include "reval/harness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "reval/analyzer.hpp"
#include "reval/embedded_helper.hpp"
#include "reval/io.hpp"
#include "reval/tracer.hpp"

namespace reval::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string trim(std::string_view text) {
  auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(begin, end - begin + 1));
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// stops further scheduling and is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    while (!stop) {
      const auto i = next++;
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };
  const auto count = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < count; ++t) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(value, &used));
    } else {
      const auto v = std::stoll(value, &used);
      if (std::is_unsigned_v<T> && v < 0) throw std::invalid_argument("negative");
      out = static_cast<T>(v);
    }
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("setting '" + key + "': not a valid number: '" + value + "'");
  }
}

std::string jsonl(const std::vector<ordered_json>& lines) {
  std::string out;
  for (const auto& l : lines) out += l.dump() + "\n";
  return out;
}

json read_json_or_null(const fs::path& path) {
  if (!fs::exists(path)) return json();
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

ordered_json analysis_json(const std::string& record_id, const analyzer::StatementTable& table,
                           const analyzer::BlockGraph& graph) {
  ordered_json out;
  out["record_id"] = record_id;
  ordered_json stmts = ordered_json::array();
  for (const auto& e : table.entries) {
    ordered_json s;
    s["stmt_index"] = e.stmt_index;
    s["line_no"] = e.line_no;
    s["text"] = e.text;
    s["kind"] = analyzer::to_string(e.kind);
    s["function_id"] = e.function_id;
    stmts.push_back(s);
  }
  out["statements"] = stmts;
  ordered_json blocks = ordered_json::array();
  for (const auto& b : graph.blocks) {
    ordered_json o;
    o["block_id"] = b.block_id;
    o["stmt_indices"] = b.stmt_indices;
    o["terminal_stmt"] = b.terminal_stmt;
    blocks.push_back(o);
  }
  out["blocks"] = blocks;
  ordered_json edges = ordered_json::array();
  for (const auto& [from, to] : graph.edges) edges.push_back({from, to});
  out["edges"] = edges;
  return out;
}

std::string adapt_hash(const RunConfig& config) {
  ordered_json h;
  h["site_budget"] = config.site_budget;
  h["wall_seconds"] = config.limits.wall_seconds;
  h["max_steps"] = config.limits.max_steps;
  h["helper"] = io::sha256_hex(embedded::kHelperScript);
  return io::sha256_hex(h.dump());
}

struct RecordResult {
  std::vector<builder::ProblemInstance> problems;
  std::string skip_reason;
};

RecordResult process_record(const corpus::BenchmarkRecord& record, const RunConfig& config, const Workdir& wd) {
  RecordResult result;
  const auto program = corpus::traced_program(record);
  analyzer::StatementTable table;
  analyzer::BlockGraph graph;
  try {
    table = analyzer::index_statements(program);
    graph = analyzer::build_blocks(table, program);
  } catch (const ParseError& e) {
    result.skip_reason = std::string("parse failure: ") + e.what();
    return result;
  }
  io::write_atomic(wd.analysis(record.record_id), analysis_json(record.record_id, table, graph).dump(1) + "\n");
  std::vector<std::string> reasons;
  for (const auto& input : record.test_inputs) {
    auto trace = tracer::trace_execution(program, input.invocation_text, config.limits);
    trace.record_id = record.record_id;
    trace.input_id = input.input_id;
    io::write_atomic(wd.trace(record.record_id, input.input_id), tracer::serialize_trace(trace));
    try {
      auto built = builder::build_problems(record, trace, table, graph, {config.site_budget});
      std::move(built.begin(), built.end(), std::back_inserter(result.problems));
    } catch (const BuildSkip& e) {
      const std::string why = trace.error_message.empty() ? e.what() : std::string(e.what()) + " (" + trace.error_message + ")";
      spdlog::debug("{} input {}: {}", record.record_id, input.input_id, why);
      reasons.push_back(why);
    }
  }
  if (result.problems.empty()) {
    result.skip_reason = reasons.empty() ? "no inputs" : reasons.front();
  }
  return result;
}

std::string run_manifest_hash(const RunConfig& config, std::optional<int> index) {
  const Workdir wd{config.workdir};
  ordered_json h;
  h["problems"] = fs::exists(wd.problems()) ? io::sha256_hex(io::read_file(wd.problems())) : "";
  h["exemplars"] = fs::exists(wd.exemplars()) ? io::sha256_hex(io::read_file(wd.exemplars())) : "";
  h["backend"] = gateway::to_string(config.model.backend);
  h["model"] = config.model.model_name;
  h["endpoint"] = config.model.endpoint_url;
  h["temperature"] = config.model.temperature;
  h["max_tokens"] = config.model.max_tokens;
  h["strategy"] = promptkit::to_string(config.strategy);
  h["shots"] = config.shots;
  h["templates"] = promptkit::template_version();
  h["wall_seconds"] = config.limits.wall_seconds;
  if (config.model.backend == gateway::BackendKind::fixed) h["fixed_text"] = config.model.fixed_text;
  if (config.model.backend == gateway::BackendKind::scripted) {
    h["transcript"] = fs::exists(config.model.transcript) ? io::sha256_hex(io::read_file(config.model.transcript)) : "";
  }
  if (index) {
    h["run_index"] = *index;
    h["seed"] = config.seed + *index;
  } else {
    h["seed"] = config.seed;
    h["runs"] = config.runs;
  }
  return io::sha256_hex(h.dump());
}

// Writes a manifest carrying `hash`, refusing to reuse a directory produced
// under another configuration.
void claim_directory(const fs::path& dir, const std::string& hash, ordered_json extra) {
  fs::create_directories(dir);
  const auto path = dir / "manifest.json";
  const auto existing = read_json_or_null(path);
  if (existing.is_object() && existing.value("config_hash", std::string()) != hash) {
    throw ConfigError(dir.string() + " holds artifacts of a different configuration (config hash " +
                      existing.value("config_hash", std::string()) + "); choose another --run-name or remove it");
  }
  extra["config_hash"] = hash;
  if (!existing.is_object()) io::write_atomic(path, extra.dump(1) + "\n");
}

std::vector<std::pair<std::string, grader::Judgment>> read_partial(const fs::path& path) {
  std::vector<std::pair<std::string, grader::Judgment>> out;
  if (!fs::exists(path)) return out;
  for (const auto& line : io::split_lines(io::read_file(path))) {
    try {
      auto j = grader::judgment_from_json(json::parse(line));
      out.emplace_back(gateway::transcript_key(j.key, j.task), std::move(j));
    } catch (const std::exception&) {
      spdlog::warn("{}: ignoring truncated line", path.string());
    }
  }
  return out;
}

bool judgment_order(const grader::Judgment& a, const grader::Judgment& b) {
  return std::tie(a.key, a.task) < std::tie(b.key, b.task);
}

// Outcome of one run index.
enum class RunOutcome { complete, backend_failure };

RunOutcome execute_run(const RunConfig& config, int index, const std::vector<builder::ProblemInstance>& problems,
                       const std::vector<promptkit::Exemplar>& exemplars) {
  const Workdir wd{config.workdir};
  const auto name = run_name(config);
  const auto dir = wd.run_dir(name, index);
  ordered_json manifest;
  manifest["run_index"] = index;
  manifest["seed"] = config.seed + index;
  claim_directory(dir, run_config_hash(config, index), manifest);

  const auto final_path = dir / "judgments.jsonl";
  if (fs::exists(final_path) && load_judgments(final_path).size() == problems.size()) {
    spdlog::info("run {} index {}: already complete", name, index);
    return RunOutcome::complete;
  }
  const auto partial_path = dir / "judgments.partial.jsonl";
  const auto responses_partial = dir / "responses.partial.jsonl";
  std::map<std::string, grader::Judgment> done;
  for (auto& [k, j] : read_partial(partial_path)) done.try_emplace(k, std::move(j));

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    if (done.count(gateway::transcript_key(problems[i].key, problems[i].task)) == 0) pending.push_back(i);
  }
  spdlog::info("run {} index {}: {} of {} problems pending", name, index, pending.size(), problems.size());

  auto model = config.model;
  model.seed = config.seed + index;
  const auto backend = gateway::make_backend(model);
  std::mutex write_mutex;
  bool failed = false;
  try {
    parallel_for(pending.size(), config.workers, [&](std::size_t n) {
      const auto& problem = problems[pending[n]];
      const auto shots = promptkit::select_shots(exemplars, problem, config.shots);
      const auto bundle = promptkit::render_prompt(problem, config.strategy, shots);
      if (promptkit::leaks_ground_truth(bundle, problem)) {
        throw Error("prompt for " + gateway::transcript_key(problem.key, problem.task) + " leaks its answer");
      }
      const auto response = backend->complete(bundle, problem);
      const auto parsed = grader::parse_answer(problem.task, response.text, problem.rendered_program);
      const auto judgment = grader::grade(problem, parsed, config.limits);
      auto record = gateway::transcript_entry(problem.key, problem.task, response.text);
      record["latency_ms"] = response.latency_ms;
      record["prompt_tokens"] = response.prompt_tokens;
      record["completion_tokens"] = response.completion_tokens;
      record["backend_meta"] = response.backend_meta;
      std::lock_guard lock(write_mutex);
      io::append_line(responses_partial, record.dump());
      io::append_line(partial_path, grader::to_json(judgment).dump());
      done.emplace(gateway::transcript_key(problem.key, problem.task), judgment);
    });
  } catch (const BackendUnavailable& e) {
    spdlog::error("run {} index {}: backend unavailable: {}", name, index, e.what());
    failed = true;
  } catch (const AuthError& e) {
    spdlog::error("run {} index {}: authentication failed: {}", name, index, e.what());
    failed = true;
  } catch (const TranscriptMiss& e) {
    spdlog::error("run {} index {}: {}", name, index, e.what());
    failed = true;
  }
  if (failed) {
    spdlog::error("run {} index {}: halted with {} of {} judgments kept", name, index, done.size(), problems.size());
    return RunOutcome::backend_failure;
  }

  std::vector<grader::Judgment> judgments;
  for (const auto& p : problems) judgments.push_back(done.at(gateway::transcript_key(p.key, p.task)));
  std::sort(judgments.begin(), judgments.end(), judgment_order);
  std::vector<ordered_json> lines;
  for (const auto& j : judgments) lines.push_back(grader::to_json(j));
  io::write_atomic(final_path, jsonl(lines));

  // Responses in judgment order, first occurrence per problem.
  std::map<std::string, std::string> responses;
  if (fs::exists(responses_partial)) {
    for (const auto& line : io::split_lines(io::read_file(responses_partial))) {
      try {
        const auto r = json::parse(line);
        const auto& k = r.at("key");
        responses.try_emplace(
            gateway::transcript_key(builder::key_from_json(k), task_from_string(k.at("task").get<std::string>())),
            line);
      } catch (const std::exception&) {
      }
    }
  }
  std::string response_text;
  for (const auto& j : judgments) {
    auto it = responses.find(gateway::transcript_key(j.key, j.task));
    if (it != responses.end()) response_text += it->second + "\n";
  }
  io::write_atomic(dir / "responses.jsonl", response_text);
  return RunOutcome::complete;
}

}  // namespace

fs::path Workdir::trace(const std::string& record_id, const std::string& input_id) const {
  return root / "traces" / io::sanitize_component(record_id) / (io::sanitize_component(input_id) + ".trace.jsonl");
}

fs::path Workdir::analysis(const std::string& record_id) const {
  return root / "analysis" / (io::sanitize_component(record_id) + ".json");
}

fs::path Workdir::shard(const std::string& record_id) const {
  return root / "shards" / (io::sanitize_component(record_id) + ".jsonl");
}

fs::path Workdir::run_dir(const std::string& name, int index) const {
  return run_root(name) / ("run-" + std::to_string(index));
}

void apply_setting(RunConfig& c, const std::string& raw_key, const std::string& value) {
  std::string key = raw_key;
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "corpus") {
    c.corpus = value;
  } else if (key == "format") {
    c.format = corpus::format_from_string(value);
  } else if (key == "workdir") {
    c.workdir = value;
  } else if (key == "backend") {
    c.model.backend = gateway::backend_from_string(value);
  } else if (key == "model" || key == "model_name") {
    c.model.model_name = value;
  } else if (key == "endpoint" || key == "endpoint_url") {
    c.model.endpoint_url = value;
  } else if (key == "temperature") {
    c.model.temperature = parse_number<double>(key, value);
  } else if (key == "max_tokens") {
    c.model.max_tokens = parse_number<int>(key, value);
  } else if (key == "rate_limit") {
    c.model.rate_limit = parse_number<double>(key, value);
  } else if (key == "retries") {
    c.model.retries = parse_number<int>(key, value);
  } else if (key == "request_timeout") {
    c.model.request_timeout = parse_number<double>(key, value);
  } else if (key == "fixed_text") {
    c.model.fixed_text = value;
  } else if (key == "transcript") {
    c.model.transcript = value;
  } else if (key == "strategy") {
    c.strategy = promptkit::strategy_from_string(value);
  } else if (key == "shots") {
    c.shots = parse_number<std::size_t>(key, value);
  } else if (key == "runs") {
    c.runs = parse_number<int>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::int64_t>(key, value);
  } else if (key == "site_budget") {
    c.site_budget = parse_number<std::size_t>(key, value);
  } else if (key == "workers") {
    c.workers = parse_number<std::size_t>(key, value);
  } else if (key == "timeout") {
    c.limits.wall_seconds = parse_number<double>(key, value);
  } else if (key == "max_steps") {
    c.limits.max_steps = parse_number<std::int64_t>(key, value);
  } else if (key == "run_name") {
    c.run_name = value;
  } else {
    throw ConfigError("unknown setting '" + raw_key + "'");
  }
}

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::string content;
  try {
    content = io::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  std::map<std::string, std::string> out;
  std::size_t number = 0;
  for (const auto& raw : io::split_lines(content)) {
    ++number;
    const auto line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    out[trim(line.substr(0, eq))] = value;
  }
  return out;
}

void validate(const RunConfig& config) {
  if (config.runs < 1) throw ConfigError("runs must be >= 1");
  if (config.workers < 1) throw ConfigError("workers must be >= 1");
  if (config.limits.wall_seconds <= 0) throw ConfigError("timeout must be positive");
  if (config.limits.max_steps <= 0) throw ConfigError("max_steps must be positive");
  if (config.workdir.empty()) throw ConfigError("workdir is required");
}

std::string run_name(const RunConfig& config) {
  if (!config.run_name.empty()) return io::sanitize_component(config.run_name);
  std::string name(gateway::to_string(config.model.backend));
  if (!config.model.model_name.empty()) name += "-" + config.model.model_name;
  name += "-" + std::string(promptkit::to_string(config.strategy));
  return io::sanitize_component(name);
}

std::string run_config_hash(const RunConfig& config, int index) { return run_manifest_hash(config, index); }

std::vector<builder::ProblemInstance> load_problems(const fs::path& path) {
  std::vector<builder::ProblemInstance> out;
  for (const auto& line : io::read_jsonl(path)) out.push_back(builder::problem_from_json(line));
  return out;
}

std::vector<grader::Judgment> load_judgments(const fs::path& path) {
  std::vector<grader::Judgment> out;
  for (const auto& line : io::read_jsonl(path)) out.push_back(grader::judgment_from_json(line));
  return out;
}

AdaptSummary adapt(const RunConfig& config) {
  validate(config);
  if (config.corpus.empty()) throw ConfigError("--corpus is required for adapt");
  const Workdir wd{config.workdir};
  fs::create_directories(wd.root);
  const auto records = corpus::load_corpus(config.corpus, config.format);

  std::vector<ordered_json> normalized;
  for (const auto& r : records) normalized.push_back(corpus::serialize_record(r, config.format));
  io::write_atomic(wd.normalized_corpus(), jsonl(normalized));

  const auto stage_hash = adapt_hash(config);
  json state = read_json_or_null(wd.adapt_state());
  if (!state.is_object()) state = json::object();
  json record_state = state.value("records", json::object());

  AdaptSummary summary;
  summary.records = records.size();
  std::vector<std::string> hashes(records.size());
  std::vector<bool> reuse(records.size(), false);
  for (std::size_t i = 0; i < records.size(); ++i) {
    hashes[i] = io::sha256_hex(stage_hash + normalized[i].dump());
    const auto& id = records[i].record_id;
    reuse[i] = record_state.contains(id) && record_state[id].value("hash", std::string()) == hashes[i] &&
               fs::exists(wd.shard(id));
  }

  std::mutex state_mutex;
  std::atomic<std::size_t> built{0}, skipped{0}, reused{0};
  parallel_for(records.size(), config.workers, [&](std::size_t i) {
    const auto& record = records[i];
    if (reuse[i]) {
      ++reused;
      return;
    }
    const auto result = process_record(record, config, wd);
    std::vector<ordered_json> lines;
    for (const auto& p : result.problems) lines.push_back(builder::to_json(p));
    io::write_atomic(wd.shard(record.record_id), jsonl(lines));
    if (result.problems.empty()) {
      spdlog::warn("record {} skipped: {}", record.record_id, result.skip_reason);
      ++skipped;
    } else {
      ++built;
    }
    std::lock_guard lock(state_mutex);
    record_state[record.record_id] = {{"hash", hashes[i]}, {"problems", result.problems.size()},
                                      {"skip_reason", result.skip_reason}};
    state["records"] = record_state;
    io::write_atomic(wd.adapt_state(), state.dump(1) + "\n");
  });

  std::string problems;
  for (const auto& r : records) {
    const auto shard = io::read_file(wd.shard(r.record_id));
    if (shard.empty() && reuse[&r - records.data()]) ++skipped;
    summary.problems += std::count(shard.begin(), shard.end(), '\n');
    problems += shard;
  }
  io::write_atomic(wd.problems(), problems);

  const auto exemplar_version = promptkit::template_version() + "/" + stage_hash;
  if (!fs::exists(wd.exemplars()) || state.value("exemplars", std::string()) != exemplar_version) {
    std::vector<ordered_json> lines;
    for (const auto& e : promptkit::build_exemplars(config.limits, config.site_budget)) {
      lines.push_back(promptkit::to_json(e));
    }
    io::write_atomic(wd.exemplars(), jsonl(lines));
  }
  state["records"] = record_state;
  state["exemplars"] = exemplar_version;
  io::write_atomic(wd.adapt_state(), state.dump(1) + "\n");

  ordered_json manifest;
  manifest["config_hash"] = stage_hash;
  manifest["corpus"] = config.corpus.string();
  manifest["format"] = corpus::to_string(config.format);
  manifest["corpus_sha256"] = io::sha256_hex(io::read_file(wd.normalized_corpus()));
  manifest["problems_sha256"] = io::sha256_hex(problems);
  manifest["site_budget"] = config.site_budget;
  io::write_atomic(wd.adapt_manifest(), manifest.dump(1) + "\n");

  summary.built = built;
  summary.reused = reused;
  summary.skipped = skipped;
  return summary;
}

int cmd_adapt(const RunConfig& config) {
  const auto s = adapt(config);
  spdlog::info("adapt: {} records ({} built, {} reused, {} skipped), {} problems", s.records, s.built, s.reused,
               s.skipped, s.problems);
  return kOk;
}

int cmd_run(const RunConfig& config) {
  validate(config);
  gateway::validate(config.model);
  const Workdir wd{config.workdir};
  if (!fs::exists(wd.problems())) throw ConfigError(wd.problems().string() + " missing; run adapt first");
  const auto problems = load_problems(wd.problems());
  std::vector<promptkit::Exemplar> exemplars;
  if (fs::exists(wd.exemplars())) {
    for (const auto& line : io::read_jsonl(wd.exemplars())) exemplars.push_back(promptkit::exemplar_from_json(line));
  }
  const auto name = run_name(config);
  ordered_json manifest;
  manifest["run_name"] = name;
  manifest["runs"] = config.runs;
  manifest["backend"] = gateway::to_string(config.model.backend);
  manifest["model"] = config.model.model_name;
  manifest["strategy"] = promptkit::to_string(config.strategy);
  manifest["shots"] = config.shots;
  manifest["site_budget"] = config.site_budget;
  claim_directory(wd.run_root(name), run_manifest_hash(config, std::nullopt), manifest);

  bool backend_failure = false;
  for (int r = 0; r < config.runs; ++r) {
    if (execute_run(config, r, problems, exemplars) == RunOutcome::backend_failure) backend_failure = true;
  }
  return backend_failure ? kBackendFailure : kOk;
}

int cmd_score(const RunConfig& config) {
  validate(config);
  const Workdir wd{config.workdir};
  if (!fs::exists(wd.problems())) throw ConfigError(wd.problems().string() + " missing; run adapt first");
  const auto problems = load_problems(wd.problems());
  std::set<std::string> expected;
  for (const auto& p : problems) expected.insert(gateway::transcript_key(p.key, p.task));

  const auto name = run_name(config);
  std::vector<metrics::RunMetrics> per_run;
  ordered_json per_run_json = ordered_json::array();
  bool incomplete = false;
  for (int r = 0; r < config.runs; ++r) {
    const auto dir = wd.run_dir(name, r);
    const auto manifest = read_json_or_null(dir / "manifest.json");
    if (manifest.is_object() && manifest.value("config_hash", std::string()) != run_config_hash(config, r)) {
      throw ConfigError(dir.string() + " was produced under a different configuration");
    }
    const auto path = dir / "judgments.jsonl";
    if (!fs::exists(path)) {
      spdlog::error("run {} index {}: no judgments", name, r);
      incomplete = true;
      continue;
    }
    const auto judgments = load_judgments(path);
    std::set<std::string> have;
    for (const auto& j : judgments) have.insert(gateway::transcript_key(j.key, j.task));
    std::vector<std::string> missing;
    std::set_difference(expected.begin(), expected.end(), have.begin(), have.end(), std::back_inserter(missing));
    try {
      if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) {
          auto k = missing[i];
          std::replace(k.begin(), k.end(), '\x1f', '/');
          list += (i ? ", " : "") + k;
        }
        throw IncompleteRun(std::to_string(missing.size()) + " missing judgment(s): " + list);
      }
      const auto m = metrics::compute_run_metrics(judgments);
      auto out = metrics::to_json(m);
      out["run_index"] = r;
      out["config_hash"] = run_config_hash(config, r);
      io::write_atomic(dir / "metrics.json", out.dump(1) + "\n");
      per_run.push_back(m);
      per_run_json.push_back(out);
    } catch (const IncompleteRun& e) {
      spdlog::error("run {} index {}: {}", name, r, e.what());
      incomplete = true;
    }
  }
  if (per_run.empty()) {
    spdlog::error("no complete run to score under {}", wd.run_root(name).string());
    return kPartial;
  }
  const auto aggregate = metrics::aggregate_runs(per_run);
  ordered_json out;
  out["config_hash"] = run_manifest_hash(config, std::nullopt);
  out["model"] = config.model.model_name.empty() ? std::string(gateway::to_string(config.model.backend))
                                                 : config.model.model_name;
  out["strategy"] = promptkit::to_string(config.strategy);
  out["shots"] = config.shots;
  out["site_budget"] = config.site_budget;
  out["per_run"] = per_run_json;
  out["aggregate"] = metrics::to_json(aggregate);
  io::write_atomic(wd.run_root(name) / "metrics.json", out.dump(1) + "\n");
  spdlog::info("score: {} run(s), IC {:.3f}, Acc. Avg. {:.4f}", aggregate.runs, aggregate.mean[6], aggregate.mean[5]);
  return incomplete ? kPartial : kOk;
}

int cmd_report(const RunConfig& config) {
  const Workdir wd{config.workdir};
  const auto name = run_name(config);
  const auto path = wd.run_root(name) / "metrics.json";
  const auto data = read_json_or_null(path);
  if (!data.is_object() || !data.contains("aggregate")) {
    spdlog::error("no metrics at {}; run score first", path.string());
    return kConfigError;
  }
  metrics::AggregateMetrics aggregate;
  metrics::ReportMeta meta;
  try {
    const auto& a = data.at("aggregate");
    aggregate.runs = a.at("runs").get<std::size_t>();
    for (std::size_t i = 0; i < metrics::kFieldNames.size(); ++i) {
      aggregate.mean[i] = a.at("mean").at(metrics::kFieldNames[i]).get<double>();
      aggregate.stddev[i] = a.at("std").at(metrics::kFieldNames[i]).get<double>();
    }
    meta.model = data.at("model").get<std::string>();
    meta.strategy = data.at("strategy").get<std::string>();
    meta.shots = data.at("shots").get<std::size_t>();
    meta.site_budget = data.at("site_budget").get<std::size_t>();
    meta.config_hash = data.at("config_hash").get<std::string>();
  } catch (const json::exception& e) {
    spdlog::error("{}: malformed metrics: {}", path.string(), e.what());
    return kConfigError;
  }
  io::write_atomic(wd.run_root(name) / "report.md", metrics::render_markdown(aggregate, meta));
  io::write_atomic(wd.run_root(name) / "report.csv", metrics::render_csv(aggregate, meta));
  spdlog::info("report written to {}", (wd.run_root(name) / "report.md").string());
  return kOk;
}

}  // namespace reval::harness
