// SPDX-License-Identifier: Apache-2.0
//
// Pipeline orchestration: adapt -> run -> score -> report.
//
// Workdir layout:
//   corpus.normalized.jsonl, adapt.manifest.json, adapt.state.json
//   traces/<record>/<input>.trace.jsonl
//   analysis/<record>.json, shards/<record>.jsonl
//   problems.jsonl, exemplars.jsonl
//   runs/<run_name>/manifest.json, metrics.json, report.md, report.csv
//   runs/<run_name>/run-<i>/manifest.json, judgments.partial.jsonl,
//     judgments.jsonl, responses.jsonl, metrics.json
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "reval/corpus.hpp"
#include "reval/gateway.hpp"
#include "reval/grader.hpp"
#include "reval/metrics.hpp"
#include "reval/promptkit.hpp"

namespace reval::harness {

enum ExitCode : int { kOk = 0, kConfigError = 2, kPartial = 3, kBackendFailure = 4 };

struct RunConfig {
  std::filesystem::path corpus;
  corpus::Format format = corpus::Format::humaneval_like;
  std::filesystem::path workdir = "reval-work";
  gateway::ModelConfig model;
  promptkit::Strategy strategy = promptkit::Strategy::fewshot;
  std::size_t shots = 2;
  std::size_t site_budget = 3;
  int runs = 3;
  std::int64_t seed = 0;
  std::size_t workers = 4;
  ResourceLimits limits;
  /// Directory name under runs/; defaults to the backend (and model) name.
  std::string run_name;
};

/// Applies one `key = value` setting. Keys are the long CLI flag names with
/// '-' or '_'. Throws ConfigError.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses a key=value file (blank lines and '#' comments ignored, optional
/// quotes, [section] headers ignored). Throws ConfigError.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Throws ConfigError.
void validate(const RunConfig& config);

std::string run_name(const RunConfig& config);

struct Workdir {
  std::filesystem::path root;
  std::filesystem::path normalized_corpus() const { return root / "corpus.normalized.jsonl"; }
  std::filesystem::path adapt_manifest() const { return root / "adapt.manifest.json"; }
  std::filesystem::path adapt_state() const { return root / "adapt.state.json"; }
  std::filesystem::path problems() const { return root / "problems.jsonl"; }
  std::filesystem::path exemplars() const { return root / "exemplars.jsonl"; }
  std::filesystem::path trace(const std::string& record_id, const std::string& input_id) const;
  std::filesystem::path analysis(const std::string& record_id) const;
  std::filesystem::path shard(const std::string& record_id) const;
  std::filesystem::path run_root(const std::string& name) const { return root / "runs" / name; }
  std::filesystem::path run_dir(const std::string& name, int index) const;
};

struct AdaptSummary {
  std::size_t records = 0;
  std::size_t built = 0;
  std::size_t reused = 0;
  std::size_t skipped = 0;
  std::size_t problems = 0;
};

AdaptSummary adapt(const RunConfig& config);

std::vector<builder::ProblemInstance> load_problems(const std::filesystem::path& path);
std::vector<grader::Judgment> load_judgments(const std::filesystem::path& path);

/// Hash of everything that determines the judgments of run index `index`.
std::string run_config_hash(const RunConfig& config, int index);

// Stage commands return an ExitCode. ConfigError, FormatError and IoError
// propagate to the caller.
int cmd_adapt(const RunConfig& config);
int cmd_run(const RunConfig& config);
int cmd_score(const RunConfig& config);
int cmd_report(const RunConfig& config);

}  // namespace reval::harness
