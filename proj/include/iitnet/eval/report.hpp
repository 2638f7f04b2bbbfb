#pragma once

#include <string>

#include "json.hpp"

#include "iitnet/eval/metrics.hpp"
#include "iitnet/eval/runner.hpp"

namespace iitnet::eval {

// JSON schema (stable; golden-tested):
//   dataset, sequence_length, n_epochs, accuracy, mf1, kappa, warnings,
//   confusion: {rows: "predicted", cols: "true", stages: [...], counts: 5x5},
//   per_class: {<stage>: {precision, recall, f1}, ...}
nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

// Fixed-width table: header line, confusion rows (predicted) against columns
// (true) with per-class precision/recall/F1 on the right, then the summary
// scores. Orientation is stated in the table header.
std::string render_report_text(const MetricsReport& report);

// {aggregate, fold_means: {accuracy, mf1, kappa}, folds: [{fold_index,
//  metrics, train: {best_val_accuracy, best_val_cost, steps, passes,
//  early_stopped}}]}. The aggregate comes from the pooled confusion; the
// fold means are plain averages of the per-fold scores.
nlohmann::json cross_validation_to_json(const CrossValidationResult& result);

std::string render_cross_validation_text(const CrossValidationResult& result);

}  // namespace iitnet::eval
