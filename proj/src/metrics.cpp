// SPDX-License-Identifier: Apache-2.0
#include "reval/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace reval::metrics {
namespace {

std::string key_text(const builder::ProblemKey& k) {
  return k.record_id + "/" + k.input_id + "/" + std::to_string(k.stmt_index) + "/" + k.variable;
}

std::string fixed1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

double accuracy(const std::vector<grader::Judgment>& judgments, Task task) {
  std::size_t total = 0, correct = 0;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& j : judgments) {
    if (j.task != task) continue;
    if (task == Task::OP && !seen.emplace(j.key.record_id, j.key.input_id).second) continue;
    ++total;
    correct += j.correct ? 1 : 0;
  }
  if (total == 0) throw EmptySet("no " + std::string(to_string(task)) + " judgments");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double f1_ccp(const std::vector<grader::Judgment>& judgments) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& j : judgments) {
    if (j.task != Task::CCP || !j.ccp_truth) continue;
    const bool truth = *j.ccp_truth;
    const bool predicted = j.ccp_predicted ? *j.ccp_predicted : !truth;
    if (truth && predicted) ++tp;
    if (!truth && predicted) ++fp;
    if (truth && !predicted) ++fn;
  }
  const auto denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

double ics_weight(const std::array<int, 4>& bits) {
  static constexpr std::array<std::array<int, 4>, 4> patterns = {
      {{1, 1, 1, 1}, {1, 1, 1, 0}, {1, 1, 0, 0}, {1, 0, 0, 0}}};
  for (std::size_t j = 0; j < patterns.size(); ++j) {
    if (bits == patterns[j]) return 1.0 / static_cast<double>(1u << j);
  }
  return 0.0;
}

double ic_score(const std::vector<ResultVector>& vectors) {
  if (vectors.empty()) throw EmptySet("no result vectors");
  double sum = 0;
  for (const auto& v : vectors) sum += ics_weight(v.bits);
  return 100.0 * sum / static_cast<double>(vectors.size());
}

std::vector<ResultVector> result_vectors(const std::vector<grader::Judgment>& judgments) {
  std::map<builder::ProblemKey, std::array<int, 4>> bits;
  std::map<builder::ProblemKey, std::array<bool, 3>> present;
  std::map<std::pair<std::string, std::string>, int> op_bits;
  for (const auto& j : judgments) {
    if (j.task == Task::PSP) {
      bits.try_emplace(j.key);
      present.try_emplace(j.key);
    }
    if (j.task == Task::OP) op_bits.try_emplace({j.key.record_id, j.key.input_id}, j.correct ? 1 : 0);
  }
  for (const auto& j : judgments) {
    if (j.task == Task::OP) continue;
    auto it = bits.find(j.key);
    if (it == bits.end()) continue;
    const auto slot = static_cast<std::size_t>(j.task);
    it->second[slot] = j.correct ? 1 : 0;
    present[j.key][slot] = true;
  }
  std::vector<ResultVector> out;
  std::vector<std::string> missing;
  for (auto& [key, b] : bits) {
    const auto& p = present[key];
    for (std::size_t t = 0; t < 3; ++t) {
      if (!p[t]) missing.push_back(key_text(key) + ":" + std::string(to_string(kAllTasks[t])));
    }
    auto op = op_bits.find({key.record_id, key.input_id});
    if (op == op_bits.end()) {
      missing.push_back(key_text(key) + ":OP");
    } else {
      b[3] = op->second;
    }
    out.push_back({key, b});
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw IncompleteRun("missing judgments: " + list);
  }
  return out;
}

RunMetrics compute_run_metrics(const std::vector<grader::Judgment>& judgments) {
  RunMetrics m;
  const auto vectors = result_vectors(judgments);
  m.acc_ccp = accuracy(judgments, Task::CCP);
  m.f1_ccp = f1_ccp(judgments);
  m.acc_psp = accuracy(judgments, Task::PSP);
  m.acc_epp = accuracy(judgments, Task::EPP);
  m.acc_op = accuracy(judgments, Task::OP);
  m.acc_avg = (m.acc_ccp + m.acc_psp + m.acc_epp + m.acc_op) / 4.0;
  m.ic_score = ic_score(vectors);
  m.n = vectors.size();
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& j : judgments) {
    if (j.task == Task::OP) pairs.emplace(j.key.record_id, j.key.input_id);
    if (j.task == Task::CCP) ++m.n_ccp;
  }
  m.n_prime = pairs.size();
  return m;
}

std::array<double, 7> fields(const RunMetrics& m) {
  return {m.acc_ccp, m.f1_ccp, m.acc_psp, m.acc_epp, m.acc_op, m.acc_avg, m.ic_score};
}

AggregateMetrics aggregate_runs(const std::vector<RunMetrics>& per_run) {
  AggregateMetrics a;
  a.runs = per_run.size();
  if (per_run.empty()) return a;
  const auto n = static_cast<double>(per_run.size());
  for (const auto& r : per_run) {
    const auto f = fields(r);
    for (std::size_t i = 0; i < f.size(); ++i) a.mean[i] += f[i] / n;
  }
  if (per_run.size() > 1) {
    for (std::size_t i = 0; i < a.mean.size(); ++i) {
      double ss = 0;
      for (const auto& r : per_run) {
        const double d = fields(r)[i] - a.mean[i];
        ss += d * d;
      }
      a.stddev[i] = std::sqrt(ss / (n - 1));
    }
  }
  return a;
}

nlohmann::ordered_json to_json(const RunMetrics& m) {
  nlohmann::ordered_json out;
  const auto f = fields(m);
  for (std::size_t i = 0; i < f.size(); ++i) out[kFieldNames[i]] = f[i];
  out["n"] = m.n;
  out["n_prime"] = m.n_prime;
  out["n_ccp"] = m.n_ccp;
  return out;
}

RunMetrics run_metrics_from_json(const nlohmann::json& value) {
  RunMetrics m;
  try {
    m.acc_ccp = value.at("acc_ccp").get<double>();
    m.f1_ccp = value.at("f1_ccp").get<double>();
    m.acc_psp = value.at("acc_psp").get<double>();
    m.acc_epp = value.at("acc_epp").get<double>();
    m.acc_op = value.at("acc_op").get<double>();
    m.acc_avg = value.at("acc_avg").get<double>();
    m.ic_score = value.at("ic_score").get<double>();
    m.n = value.at("n").get<std::size_t>();
    m.n_prime = value.at("n_prime").get<std::size_t>();
    m.n_ccp = value.value("n_ccp", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed metrics: ") + e.what());
  }
  return m;
}

nlohmann::ordered_json to_json(const AggregateMetrics& a) {
  nlohmann::ordered_json out;
  out["runs"] = a.runs;
  nlohmann::ordered_json mean, stddev;
  for (std::size_t i = 0; i < kFieldNames.size(); ++i) {
    mean[kFieldNames[i]] = a.mean[i];
    stddev[kFieldNames[i]] = a.stddev[i];
  }
  out["mean"] = mean;
  out["std"] = stddev;
  return out;
}

std::string format_cell(double mean, double stddev) { return fixed1(mean) + "±" + fixed1(stddev); }

namespace {

// Report columns in display order, with the percentage scale applied.
std::vector<std::pair<std::string, std::string>> cells(const AggregateMetrics& a) {
  static const char* headers[] = {"CCP Acc", "CCP F1", "PSP", "EPP", "OP", "Acc. Avg.", "IC Score"};
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < kFieldNames.size(); ++i) {
    const double scale = i == 6 ? 1.0 : 100.0;
    out.emplace_back(headers[i], format_cell(a.mean[i] * scale, a.stddev[i] * scale));
  }
  return out;
}

}  // namespace

std::string render_markdown(const AggregateMetrics& aggregate, const ReportMeta& meta) {
  const auto row = cells(aggregate);
  std::string out = "| Model |";
  std::string rule = "|---|";
  std::string values = "| " + meta.model + " |";
  for (const auto& [h, v] : row) {
    out += " " + h + " |";
    rule += "---|";
    values += " " + v + " |";
  }
  out += "\n" + rule + "\n" + values + "\n\n";
  out += "Runs: " + std::to_string(aggregate.runs) + ". Strategy: " + meta.strategy +
         ", shots: " + std::to_string(meta.shots) + ", site budget: " + std::to_string(meta.site_budget) +
         ". Config hash: " + meta.config_hash + ".\n";
  return out;
}

std::string render_csv(const AggregateMetrics& aggregate, const ReportMeta& meta) {
  const auto row = cells(aggregate);
  std::string header = "model";
  std::string values = meta.model;
  for (const auto& [h, v] : row) {
    header += "," + h;
    values += "," + v;
  }
  header += ",runs,strategy,shots,site_budget,config_hash";
  values += "," + std::to_string(aggregate.runs) + "," + meta.strategy + "," + std::to_string(meta.shots) +
            "," + std::to_string(meta.site_budget) + "," + meta.config_hash;
  return header + "\n" + values + "\n";
}

}  // namespace reval::metrics
