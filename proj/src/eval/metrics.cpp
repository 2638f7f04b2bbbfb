#include "iitnet/eval/metrics.hpp"

#include <stdexcept>

namespace iitnet::eval {

MetricsReport compute_metrics(const ConfusionMatrix& confusion) {
  MetricsReport report;
  report.confusion = confusion;
  report.n_epochs = confusion.total();
  if (report.n_epochs == 0) throw std::invalid_argument("compute_metrics: empty confusion matrix");

  const double total = static_cast<double>(report.n_epochs);

  double f1_sum = 0.0;
  double expected_agreement = 0.0;
  for (int i = 0; i < kNumStages; ++i) {
    const double diag = static_cast<double>(confusion.at(i, i));
    const long long row = confusion.row_sum(i);
    const long long col = confusion.col_sum(i);

    ClassMetrics& m = report.per_class[i];
    if (row == 0) {
      m.precision = 0.0;
      report.warnings.push_back(std::string("no predictions for class ") +
                                stage_name(static_cast<Stage>(i)) + "; precision reported as 0");
    } else {
      m.precision = diag / static_cast<double>(row);
    }
    if (col == 0) {
      m.recall = 0.0;
      report.warnings.push_back(std::string("no true epochs for class ") +
                                stage_name(static_cast<Stage>(i)) + "; recall reported as 0");
    } else {
      m.recall = diag / static_cast<double>(col);
    }
    m.f1 = (m.precision + m.recall > 0.0)
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    f1_sum += m.f1;

    expected_agreement +=
        (static_cast<double>(row) / total) * (static_cast<double>(col) / total);
  }

  report.accuracy = static_cast<double>(confusion.diagonal_sum()) / total;
  report.mf1 = f1_sum / kNumStages;

  const double p_o = report.accuracy;
  const double p_e = expected_agreement;
  if (p_e >= 1.0) {
    // All mass on one (predicted, true) marginal pair: chance agreement is
    // total, so kappa is 1 for perfect agreement and 0 otherwise.
    report.kappa = (p_o >= 1.0) ? 1.0 : 0.0;
    if (p_o < 1.0) report.warnings.push_back("degenerate marginals (p_e = 1); kappa reported as 0");
  } else {
    report.kappa = (p_o - p_e) / (1.0 - p_e);
  }
  return report;
}

}  // namespace iitnet::eval
