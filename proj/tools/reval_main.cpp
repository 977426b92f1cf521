// SPDX-License-Identifier: Apache-2.0
//
// reval: adapt code benchmarks into runtime-behavior reasoning tasks and
// evaluate models on them.
#include <iostream>
#include <map>
#include <optional>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "reval/harness.hpp"
#include "reval/io.hpp"

namespace {

using reval::harness::RunConfig;

struct Flag {
  const char* name;
  const char* help;
};

constexpr Flag kFlags[] = {
    {"corpus", "Base corpus (JSONL)"},
    {"format", "Corpus format: humaneval_like | classeval_like"},
    {"workdir", "Working directory for all artifacts"},
    {"backend", "Model backend: http_chat | oracle | anti_oracle | fixed | scripted"},
    {"model", "Model name sent to the endpoint"},
    {"endpoint", "Chat-completion URL for http_chat"},
    {"temperature", "Sampling temperature"},
    {"max-tokens", "Completion token limit"},
    {"rate-limit", "Requests per minute (0 = unlimited)"},
    {"retries", "Retries per request"},
    {"fixed-text", "Reply of the fixed backend"},
    {"transcript", "Transcript file for the scripted backend"},
    {"strategy", "Prompting strategy: fewshot | cot"},
    {"shots", "Exemplars per prompt"},
    {"runs", "Number of runs"},
    {"seed", "Base seed; run i uses seed + i"},
    {"site-budget", "Question sites per traced input"},
    {"workers", "Parallel workers"},
    {"timeout", "Wall-clock limit per subject execution, seconds"},
    {"max-steps", "Trace step limit"},
    {"run-name", "Directory name under runs/"},
};

int dispatch(const std::string& command, const RunConfig& config) {
  using namespace reval::harness;
  if (command == "adapt") return cmd_adapt(config);
  if (command == "run") return cmd_run(config);
  if (command == "score") return cmd_score(config);
  const int code = cmd_report(config);
  if (code == kOk) {
    std::cout << reval::io::read_file(Workdir{config.workdir}.run_root(run_name(config)) / "report.md");
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("reval"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Runtime-behavior reasoning benchmark harness"};
  app.require_subcommand(1, 1);
  std::map<std::string, std::string> values;
  std::string config_file;
  bool verbose = false;
  const std::pair<const char*, const char*> commands[] = {
      {"adapt", "Trace the corpus and build problems.jsonl"},
      {"run", "Query the backend and grade every problem"},
      {"score", "Compute per-run and aggregate metrics"},
      {"report", "Render report.md and report.csv"}};
  for (const auto& [command, description] : commands) {
    auto* sub = app.add_subcommand(command, description);
    sub->add_option("--config", config_file, "key = value configuration file");
    sub->add_flag("-v,--verbose", verbose, "Debug logging");
    for (const auto& flag : kFlags) {
      sub->add_option_function<std::string>(
          std::string("--") + flag.name, [&values, name = flag.name](const std::string& v) { values[name] = v; },
          flag.help);
    }
  }
  CLI11_PARSE(app, argc, argv);
  if (verbose) spdlog::set_level(spdlog::level::debug);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    RunConfig config;
    if (!config_file.empty()) {
      for (const auto& [k, v] : reval::harness::read_config_file(config_file)) {
        reval::harness::apply_setting(config, k, v);
      }
    }
    for (const auto& [k, v] : values) reval::harness::apply_setting(config, k, v);
    return dispatch(command, config);
  } catch (const reval::ConfigError& e) {
    spdlog::error("{}", e.what());
    return reval::harness::kConfigError;
  } catch (const reval::FormatError& e) {
    spdlog::error("corpus: {}", e.what());
    return reval::harness::kConfigError;
  } catch (const reval::IoError& e) {
    spdlog::error("{}", e.what());
    return reval::harness::kConfigError;
  } catch (const reval::BackendUnavailable& e) {
    spdlog::error("{}", e.what());
    return reval::harness::kBackendFailure;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
