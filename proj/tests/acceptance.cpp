// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion; nonzero exit if any
// criterion fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include <spdlog/spdlog.h>

#include "reval/harness.hpp"
#include "support.hpp"

using namespace reval;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(int number, const char* title, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", number, title, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

harness::RunConfig pipeline_config(const fs::path& workdir, gateway::BackendKind backend) {
  harness::RunConfig c;
  c.corpus = test::fixture("humaneval_fixture.jsonl");
  c.workdir = workdir;
  c.model.backend = backend;
  c.runs = 1;
  c.workers = 4;
  return c;
}

json aggregate_mean(const harness::RunConfig& c) {
  const auto path = harness::Workdir{c.workdir}.run_root(harness::run_name(c)) / "metrics.json";
  return json::parse(io::read_file(path)).at("aggregate").at("mean");
}

void run_stages(const harness::RunConfig& c) {
  if (harness::cmd_adapt(c) != harness::kOk) throw Error("adapt failed");
  if (harness::cmd_run(c) != harness::kOk) throw Error("run failed");
  if (harness::cmd_score(c) != harness::kOk) throw Error("score failed");
}

std::vector<builder::ProblemInstance> fixture_problems(const fs::path& workdir) {
  return harness::load_problems(harness::Workdir{workdir}.problems());
}

// Transcript where task t is answered correctly iff pick(problem)[t].
using Picker = std::function<std::array<int, 4>(const builder::ProblemInstance&)>;

fs::path write_transcript(const fs::path& path, const std::vector<builder::ProblemInstance>& problems, const Picker& pick) {
  std::string out;
  for (const auto& p : problems) {
    const bool right = pick(p)[static_cast<std::size_t>(p.task)] != 0;
    const auto text = right ? promptkit::answer_line(p) : gateway::wrong_answer_line(p);
    out += gateway::transcript_entry(p.key, p.task, text).dump() + "\n";
  }
  io::write_atomic(path, out);
  return path;
}

// Grades `problems` through a scripted backend replaying `transcript`.
std::vector<grader::Judgment> replay(const fs::path& transcript, const std::vector<builder::ProblemInstance>& problems) {
  gateway::ModelConfig m;
  m.backend = gateway::BackendKind::scripted;
  m.transcript = transcript;
  auto backend = gateway::make_backend(m);
  std::vector<grader::Judgment> out;
  for (const auto& p : problems) {
    const auto r = backend->complete(promptkit::render_prompt(p, promptkit::Strategy::fewshot, {}), p);
    out.push_back(grader::grade(p, grader::parse_answer(p.task, r.text, p.rendered_program)));
  }
  return out;
}

bool all_equal(const json& mean, const std::vector<std::string>& fields, double value, std::string& detail) {
  bool ok = true;
  for (const auto& f : fields) {
    const double v = mean.at(f).get<double>();
    detail += f + "=" + num(v) + " ";
    ok = ok && v == value;
  }
  return ok;
}

const std::vector<std::string> kRateFields = {"acc_ccp", "f1_ccp", "acc_psp", "acc_epp", "acc_op", "acc_avg"};

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  test::TempDir tmp;
  const auto oracle_dir = tmp.path() / "oracle";
  const auto second_dir = tmp.path() / "second";

  criterion(1, "oracle closure on the 10-record fixture", [&] {
    const auto start = std::chrono::steady_clock::now();
    const auto c = pipeline_config(oracle_dir, gateway::BackendKind::oracle);
    run_stages(c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto mean = aggregate_mean(c);
    std::string detail;
    bool ok = all_equal(mean, kRateFields, 1.0, detail);
    ok = ok && mean.at("ic_score").get<double>() == 100.0;
    detail += "ic=" + num(mean.at("ic_score").get<double>()) + " runtime=" + num(secs) + "s";
    return Outcome{ok && secs < 60.0, detail};
  });

  criterion(2, "anti-oracle closure", [&] {
    const auto c = pipeline_config(oracle_dir, gateway::BackendKind::anti_oracle);
    run_stages(c);
    const auto mean = aggregate_mean(c);
    std::string detail;
    bool ok = all_equal(mean, kRateFields, 0.0, detail);
    ok = ok && mean.at("ic_score").get<double>() == 0.0;
    detail += "ic=" + num(mean.at("ic_score").get<double>());
    return Outcome{ok, detail};
  });

  criterion(3, "IC formula fidelity", [&] {
    const auto problems = fixture_problems(oracle_dir);
    const std::vector<std::pair<std::array<int, 4>, double>> patterns = {
        {{1, 1, 1, 1}, 1.0}, {{1, 1, 1, 0}, 0.5}, {{1, 1, 0, 0}, 0.25}, {{1, 0, 0, 0}, 0.125}, {{0, 1, 1, 1}, 0.0}};
    bool ok = true;
    std::string detail;
    for (const auto& [bits, expected] : patterns) {
      std::string label;
      for (int b : bits) label += std::to_string(b);
      auto c = pipeline_config(oracle_dir, gateway::BackendKind::scripted);
      c.model.transcript = write_transcript(tmp.path() / ("pattern-" + label + ".jsonl"), problems,
                                            [&](const auto&) { return bits; });
      c.run_name = "pattern-" + label;
      if (harness::cmd_run(c) != harness::kOk || harness::cmd_score(c) != harness::kOk) throw Error("stage failed");
      // Per-problem ICS from the persisted judgments, and the run's score.
      const auto judgments = harness::load_judgments(harness::Workdir{c.workdir}.run_dir(c.run_name, 0) / "judgments.jsonl");
      for (const auto& v : metrics::result_vectors(judgments)) ok = ok && metrics::ics_weight(v.bits) == expected;
      const double score = aggregate_mean(c).at("ic_score").get<double>();
      ok = ok && score == 100.0 * expected;
      detail += label + "->" + num(score / 100.0) + " ";
    }

    // Mixed set over four keys from distinct (record, input) pairs.
    std::vector<builder::ProblemKey> keys;
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& p : problems) {
      if (p.task == Task::PSP && pairs.emplace(p.key.record_id, p.key.input_id).second) keys.push_back(p.key);
      if (keys.size() == 4) break;
    }
    if (keys.size() != 4) throw Error("fixture has fewer than four (record, input) pairs");
    const std::array<std::array<int, 4>, 4> mixed = {{{1, 1, 1, 1}, {1, 1, 0, 0}, {1, 0, 0, 0}, {0, 1, 1, 1}}};
    // The OP instance of each pair supplies the key's OP bit.
    std::map<std::pair<std::string, std::string>, std::array<int, 4>> assigned;
    for (std::size_t i = 0; i < 4; ++i) assigned[{keys[i].record_id, keys[i].input_id}] = mixed[i];
    std::vector<builder::ProblemInstance> chosen;
    std::set<std::pair<std::string, std::string>> op_taken;
    for (const auto& p : problems) {
      const std::pair pair{p.key.record_id, p.key.input_id};
      if (assigned.count(pair) == 0) continue;
      const bool is_key = std::find(keys.begin(), keys.end(), p.key) != keys.end();
      if ((p.task == Task::OP && op_taken.insert(pair).second) || (p.task != Task::OP && is_key)) chosen.push_back(p);
    }
    const auto path = write_transcript(tmp.path() / "mixed.jsonl", chosen, [&](const auto& p) {
      return assigned.at({p.key.record_id, p.key.input_id});
    });
    const double mixed_score = metrics::ic_score(metrics::result_vectors(replay(path, chosen)));
    ok = ok && mixed_score == 34.375;
    detail += "mixed=" + num(mixed_score);
    return Outcome{ok, detail};
  });

  criterion(4, "decoupling witness", [&] {
    auto c = pipeline_config(oracle_dir, gateway::BackendKind::scripted);
    c.model.transcript = write_transcript(tmp.path() / "decoupled.jsonl", fixture_problems(oracle_dir),
                                          [](const auto&) { return std::array<int, 4>{0, 1, 1, 1}; });
    c.run_name = "decoupled";
    if (harness::cmd_run(c) != harness::kOk || harness::cmd_score(c) != harness::kOk) throw Error("stage failed");
    const auto mean = aggregate_mean(c);
    const double avg = mean.at("acc_avg").get<double>();
    const double ic = mean.at("ic_score").get<double>();
    return Outcome{avg == 0.75 && ic == 0.0, "acc_avg=" + num(avg) + " ic=" + num(ic)};
  });

  criterion(5, "tracer golden suite", [&] {
    const auto cases = json::parse(test::fixture_text("golden/cases.json"));
    std::size_t matched = 0;
    std::string failed;
    for (const auto& c : cases) {
      const auto name = c.at("name").get<std::string>();
      auto trace = tracer::trace_execution(test::fixture_text("golden/" + c.at("program").get<std::string>()),
                                           c.at("invocation").get<std::string>(), {});
      trace.record_id = name;
      trace.input_id = "0";
      std::vector<int> lines;
      for (const auto& s : trace.steps) {
        if (s.event == tracer::StepEvent::stmt) lines.push_back(s.line_no);
      }
      const bool ok = tracer::serialize_trace(trace) == io::read_file(test::fixture("golden/" + name + ".trace.jsonl")) &&
                      lines == c.at("lines").get<std::vector<int>>();
      if (ok) {
        ++matched;
      } else {
        failed += " " + name;
      }
    }
    return Outcome{matched == cases.size() && matched >= 10,
                   std::to_string(matched) + "/" + std::to_string(cases.size()) + " byte-identical" + failed};
  });

  criterion(6, "HumanEval/59 EPP at the max() site", [&] {
    const auto records = corpus::load_corpus(test::fixture("humaneval_fixture.jsonl"), corpus::Format::humaneval_like);
    const auto it = std::find_if(records.begin(), records.end(), [](const auto& r) { return r.record_id == "HumanEval/59"; });
    if (it == records.end()) throw Error("HumanEval/59 missing from fixture");
    const auto program = corpus::traced_program(*it);
    const auto table = analyzer::index_statements(program);
    auto line_of = [&](const std::string& text) {
      for (const auto& e : table.entries) {
        if (e.text == text) return e.line_no;
      }
      throw Error("statement not found: " + text);
    };
    const int site = line_of("largest = max(largest, j)");
    const int header = line_of("for j in range(2, n + 1):");
    const int ret = line_of("return largest");

    // Hand trace for n = 15: the branch is taken for j = 3 and j = 5 (15 is
    // rejected by is_prime), and each time control returns to the header.
    const std::set<int> hand = {header};

    auto trace = tracer::trace_execution(program, it->test_inputs.at(0).invocation_text, {});
    trace.record_id = it->record_id;
    trace.input_id = it->test_inputs.at(0).input_id;
    const auto graph = analyzer::build_blocks(table, program);
    const auto problems = builder::build_problems(*it, trace, table, graph, {1000});
    const auto epp = std::find_if(problems.begin(), problems.end(), [&](const auto& p) {
      return p.task == Task::EPP && p.question_payload.target_line == site;
    });
    if (epp == problems.end()) throw Error("no EPP problem at the max() site");
    const auto& next = epp->ground_truth.next_lines;
    int visits = 0;
    for (const auto& s : trace.steps) visits += (s.event == tracer::StepEvent::stmt && s.line_no == site) ? 1 : 0;
    std::string shown;
    for (int l : next) shown += builder::line_label(l) + " ";
    const bool ok = next.count(header) == 1 && next.count(ret) == 0 && next == hand && visits == 2;
    return Outcome{ok, "next_lines={ " + shown + "} header=" + std::to_string(header) + " return=" +
                           std::to_string(ret) + " visits=" + std::to_string(visits)};
  });

  criterion(7, "F1 matches an independent confusion-matrix tally", [&] {
    std::mt19937 rng(20240601);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<grader::Judgment> js;
      const int n = 1 + static_cast<int>(rng() % 60);
      double tp = 0, fp = 0, fn = 0;
      for (int i = 0; i < n; ++i) {
        grader::Judgment j;
        j.task = Task::CCP;
        j.key = {"R", std::to_string(i), i, ""};
        const bool truth = rng() % 2 == 0;
        j.ccp_truth = truth;
        const auto roll = rng() % 10;
        if (roll != 0) j.ccp_predicted = rng() % 3 != 0 ? truth : !truth;
        j.correct = j.ccp_predicted && *j.ccp_predicted == truth;
        js.push_back(j);
        // An unparsed answer is scored as the class opposite to the truth.
        const bool said_executed = j.ccp_predicted ? *j.ccp_predicted : !truth;
        tp += (truth && said_executed) ? 1 : 0;
        fp += (!truth && said_executed) ? 1 : 0;
        fn += (truth && !said_executed) ? 1 : 0;
      }
      const double precision = tp + fp > 0 ? tp / (tp + fp) : 0;
      const double recall = tp + fn > 0 ? tp / (tp + fn) : 0;
      const double expected = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0;
      worst = std::max(worst, std::abs(metrics::f1_ccp(js) - expected));
    }
    return Outcome{worst <= 1e-9, "max |diff| over 100 sets = " + num(worst)};
  });

  criterion(8, "OP delegation soundness", [&] {
    std::vector<builder::ProblemInstance> ops;
    for (const auto& p : fixture_problems(oracle_dir)) {
      if (p.task == Task::OP) ops.push_back(p);
    }
    const auto ce_dir = tmp.path() / "classeval";
    auto ce = pipeline_config(ce_dir, gateway::BackendKind::oracle);
    ce.corpus = test::fixture("classeval_fixture.jsonl");
    ce.format = corpus::Format::classeval_like;
    harness::adapt(ce);
    for (const auto& p : fixture_problems(ce_dir)) {
      if (p.task == Task::OP) ops.push_back(p);
    }
    std::size_t sound = 0;
    std::string bad;
    for (const auto& p : ops) {
      const auto truth = grader::grade(p, grader::parse_answer(Task::OP, promptkit::answer_line(p)));
      const auto anti = grader::grade(p, grader::parse_answer(Task::OP, gateway::wrong_answer_line(p)));
      if (truth.correct && !anti.correct && anti.reason == grader::Reason::mismatch) {
        ++sound;
      } else if (bad.size() < 200) {
        bad += " " + p.key.record_id + "#" + p.key.input_id;
      }
    }
    return Outcome{!ops.empty() && sound == ops.size(),
                   std::to_string(sound) + "/" + std::to_string(ops.size()) + " OP problems" + bad};
  });

  criterion(9, "determinism across pipeline executions", [&] {
    const auto a = pipeline_config(oracle_dir, gateway::BackendKind::anti_oracle);
    auto b = a;
    b.workdir = second_dir;
    b.workers = 2;
    run_stages(b);
    const harness::Workdir wa{a.workdir}, wb{b.workdir};
    const bool problems_same = io::read_file(wa.problems()) == io::read_file(wb.problems());
    const auto ja = io::read_file(wa.run_dir(harness::run_name(a), 0) / "judgments.jsonl");
    const auto jb = io::read_file(wb.run_dir(harness::run_name(b), 0) / "judgments.jsonl");
    return Outcome{problems_same && ja == jb && !ja.empty(),
                   std::string("problems.jsonl ") + (problems_same ? "identical" : "differ") + ", judgments.jsonl " +
                       (ja == jb ? "identical" : "differ")};
  });

  criterion(10, "PSP requires value and type to match", [&] {
    std::vector<builder::ProblemInstance> psp;
    for (const auto& p : fixture_problems(oracle_dir)) {
      if (p.task == Task::PSP) psp.push_back(p);
    }
    std::string transcript;
    std::vector<std::pair<builder::ProblemInstance, bool>> cases;
    int variant = 0;
    for (const auto& base : psp) {
      const auto& truth = *base.ground_truth.value_type;
      const std::string other_type = truth.type_name == "int" ? "float" : "int";
      const std::vector<std::pair<std::string, bool>> answers = {
          {"ANSWER: value=" + truth.value_repr + " type=" + truth.type_name, true},
          {"ANSWER: value=" + truth.value_repr + " type=" + other_type, false},
          {"ANSWER: value=" + truth.value_repr + "_X type=" + truth.type_name, false}};
      for (const auto& [text, expected] : answers) {
        // Distinct keys so one transcript holds all variants.
        auto p = base;
        p.key.variable += "#" + std::to_string(variant++);
        transcript += gateway::transcript_entry(p.key, p.task, text).dump() + "\n";
        cases.emplace_back(p, expected);
      }
    }
    const auto path = tmp.path() / "psp.jsonl";
    io::write_atomic(path, transcript);
    std::vector<builder::ProblemInstance> problems;
    for (const auto& [p, e] : cases) problems.push_back(p);
    const auto judgments = replay(path, problems);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) agree += judgments[i].correct == cases[i].second ? 1 : 0;
    return Outcome{!psp.empty() && agree == cases.size(),
                   std::to_string(agree) + "/" + std::to_string(cases.size()) + " graded as expected over " +
                       std::to_string(psp.size()) + " PSP problems"};
  });

  std::printf("%s: %d failing criteria\n", g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures);
  return g_failures == 0 ? 0 : 1;
}
