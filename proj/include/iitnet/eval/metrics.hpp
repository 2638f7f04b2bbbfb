#pragma once

#include <array>
#include <string>
#include <vector>

#include "iitnet/core.hpp"

namespace iitnet::eval {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Full metric set for one evaluation: per-class precision/recall/F1, overall
// accuracy, macro-averaged F1 and Cohen's kappa. Confusion orientation is
// rows = predicted, columns = true (stated in every report header).
struct MetricsReport {
  ConfusionMatrix confusion;
  std::array<ClassMetrics, kNumStages> per_class{};
  double accuracy = 0.0;
  double mf1 = 0.0;
  double kappa = 0.0;
  long long n_epochs = 0;
  int sequence_length = 0;
  std::string dataset_kind;
  // Classes with an empty row or column get precision/recall reported as 0;
  // each such case is flagged here instead of producing NaN.
  std::vector<std::string> warnings;
};

// Computes all derived scores from a confusion matrix.
// accuracy = trace/total, PR_i = e_ii / row_i, RE_i = e_ii / col_i,
// F1_i = harmonic mean, MF1 = unweighted mean of F1_i,
// kappa = (p_o - p_e) / (1 - p_e) with p_e from the marginal products.
// Throws std::invalid_argument on an empty matrix.
MetricsReport compute_metrics(const ConfusionMatrix& confusion);

}  // namespace iitnet::eval
