#include "iitnet/eval/report.hpp"

#include <cstdarg>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace iitnet::eval {

namespace {

std::string fmt(const char* format, ...) {
  char buf[128];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

}  // namespace

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json counts = nlohmann::json::array();
  nlohmann::json stages = nlohmann::json::array();
  for (int p = 0; p < kNumStages; ++p) {
    nlohmann::json row = nlohmann::json::array();
    for (int t = 0; t < kNumStages; ++t) row.push_back(report.confusion.at(p, t));
    counts.push_back(std::move(row));
    stages.push_back(stage_name(static_cast<Stage>(p)));
  }
  nlohmann::json per_class;
  for (int i = 0; i < kNumStages; ++i) {
    const ClassMetrics& c = report.per_class[i];
    per_class[stage_name(static_cast<Stage>(i))] = {
        {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}};
  }
  return {{"dataset", report.dataset_kind},
          {"sequence_length", report.sequence_length},
          {"n_epochs", report.n_epochs},
          {"confusion",
           {{"rows", "predicted"}, {"cols", "true"}, {"stages", stages}, {"counts", counts}}},
          {"per_class", per_class},
          {"accuracy", report.accuracy},
          {"mf1", report.mf1},
          {"kappa", report.kappa},
          {"warnings", report.warnings}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  const nlohmann::json& counts = j.at("confusion").at("counts");
  if (counts.size() != kNumStages) throw std::invalid_argument("confusion is not 5x5");
  ConfusionMatrix confusion;
  for (int p = 0; p < kNumStages; ++p) {
    if (counts[p].size() != kNumStages) throw std::invalid_argument("confusion is not 5x5");
    for (int t = 0; t < kNumStages; ++t) {
      confusion.add(static_cast<Stage>(p), static_cast<Stage>(t),
                    counts[p][t].get<long long>());
    }
  }
  MetricsReport report = compute_metrics(confusion);
  report.dataset_kind = j.at("dataset").get<std::string>();
  report.sequence_length = j.at("sequence_length").get<int>();
  return report;
}

std::string render_report_text(const MetricsReport& report) {
  std::ostringstream out;
  out << "sleep staging report | dataset=" << report.dataset_kind
      << " | L=" << report.sequence_length << " | epochs=" << report.n_epochs << "\n";
  out << "confusion (rows = predicted, cols = true)\n";
  out << "     ";
  for (int t = 0; t < kNumStages; ++t)
    out << fmt("%8s", stage_name(static_cast<Stage>(t)));
  out << " |      PR      RE      F1\n";
  for (int p = 0; p < kNumStages; ++p) {
    out << fmt("%5s", stage_name(static_cast<Stage>(p)));
    for (int t = 0; t < kNumStages; ++t) out << fmt("%8lld", report.confusion.at(p, t));
    const ClassMetrics& c = report.per_class[p];
    out << fmt(" |  %6.4f  %6.4f  %6.4f\n", c.precision, c.recall, c.f1);
  }
  out << fmt("accuracy %6.4f | MF1 %6.4f | kappa %6.4f\n", report.accuracy, report.mf1,
             report.kappa);
  if (report.warnings.empty()) {
    out << "warnings: none\n";
  } else {
    for (const std::string& w : report.warnings) out << "warning: " << w << "\n";
  }
  return out.str();
}

nlohmann::json cross_validation_to_json(const CrossValidationResult& result) {
  nlohmann::json folds = nlohmann::json::array();
  for (const FoldReport& fold : result.folds) {
    folds.push_back({{"fold_index", fold.fold_index},
                     {"metrics", report_to_json(fold.metrics)},
                     {"train",
                      {{"best_val_accuracy", fold.train.best_val_accuracy},
                       {"best_val_cost", fold.train.best_val_cost},
                       {"steps", fold.train.steps},
                       {"passes", fold.train.passes},
                       {"early_stopped", fold.train.early_stopped}}}});
  }
  return {{"aggregate", report_to_json(result.aggregate)},
          {"fold_means",
           {{"accuracy", result.fold_means.accuracy},
            {"mf1", result.fold_means.mf1},
            {"kappa", result.fold_means.kappa}}},
          {"folds", folds}};
}

std::string render_cross_validation_text(const CrossValidationResult& result) {
  std::ostringstream out;
  out << "cross-validation over " << result.folds.size() << " fold(s)\n";
  for (const FoldReport& fold : result.folds) {
    out << fmt("fold %2d | accuracy %6.4f | MF1 %6.4f | kappa %6.4f | passes %d%s\n",
               fold.fold_index, fold.metrics.accuracy, fold.metrics.mf1, fold.metrics.kappa,
               fold.train.passes, fold.train.early_stopped ? " (early stop)" : "");
  }
  out << fmt("fold means | accuracy %6.4f | MF1 %6.4f | kappa %6.4f\n",
             result.fold_means.accuracy, result.fold_means.mf1, result.fold_means.kappa);
  out << "aggregate (pooled confusion across folds)\n";
  out << render_report_text(result.aggregate);
  return out.str();
}

}  // namespace iitnet::eval
