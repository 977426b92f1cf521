// SPDX-License-Identifier: Apache-2.0
//
// Task accuracies, CCP F1, the Incremental Consistency Score, and run
// aggregation.
#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "reval/grader.hpp"

namespace reval::metrics {

struct ResultVector {
  builder::ProblemKey key;
  /// r_CCP, r_PSP, r_EPP, r_OP.
  std::array<int, 4> bits{};
};

struct RunMetrics {
  double acc_ccp = 0, f1_ccp = 0, acc_psp = 0, acc_epp = 0, acc_op = 0, acc_avg = 0;
  double ic_score = 0;
  /// N: IC-pool keys; N': distinct (record, input) pairs behind OP.
  std::size_t n = 0;
  std::size_t n_prime = 0;
  std::size_t n_ccp = 0;
};

/// Correct / total. OP judgments count once per (record_id, input_id), the
/// first one seen. Throws EmptySet.
double accuracy(const std::vector<grader::Judgment>& judgments, Task task);

/// F1 of the positive class "executed"; 0 when 2TP+FP+FN = 0. Unparsed
/// answers count as a prediction of the wrong class.
double f1_ccp(const std::vector<grader::Judgment>& judgments);

/// ICS_i weight: 1, 1/2, 1/4, 1/8 for 1111, 1110, 1100, 1000; 0 otherwise.
double ics_weight(const std::array<int, 4>& bits);

/// (100/N) * sum of weights. Throws EmptySet.
double ic_score(const std::vector<ResultVector>& vectors);

/// Groups judgments into IC-pool vectors. A key with a PSP judgment belongs
/// to the pool; its OP bit comes from the OP judgment of its (record, input)
/// pair. Throws IncompleteRun listing keys lacking a judgment.
std::vector<ResultVector> result_vectors(const std::vector<grader::Judgment>& judgments);

RunMetrics compute_run_metrics(const std::vector<grader::Judgment>& judgments);

inline constexpr std::array<const char*, 7> kFieldNames = {"acc_ccp", "f1_ccp", "acc_psp", "acc_epp",
                                                           "acc_op",  "acc_avg", "ic_score"};

std::array<double, 7> fields(const RunMetrics& m);

struct AggregateMetrics {
  std::size_t runs = 0;
  std::array<double, 7> mean{};
  std::array<double, 7> stddev{};
};

/// Per-field mean and sample standard deviation (0 for a single run).
AggregateMetrics aggregate_runs(const std::vector<RunMetrics>& per_run);

nlohmann::ordered_json to_json(const RunMetrics& m);
RunMetrics run_metrics_from_json(const nlohmann::json& value);
nlohmann::ordered_json to_json(const AggregateMetrics& a);

struct ReportMeta {
  std::string model;
  std::string strategy;
  std::size_t shots = 0;
  std::size_t site_budget = 0;
  std::string config_hash;
};

/// Accuracies and F1 are shown as percentages, the IC score as is, each
/// "mean±std" with one decimal.
std::string render_markdown(const AggregateMetrics& aggregate, const ReportMeta& meta);
std::string render_csv(const AggregateMetrics& aggregate, const ReportMeta& meta);

std::string format_cell(double mean, double stddev);

}  // namespace reval::metrics
