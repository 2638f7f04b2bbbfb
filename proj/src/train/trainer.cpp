#include "iitnet/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "iitnet/nn/loss.hpp"

namespace iitnet::train {

nlohmann::json TrainConfig::to_json() const {
  return {{"lr", adam.lr},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2},
          {"eps", adam.eps},
          {"weight_reg", weight_reg},
          {"batch_size", batch_size},
          {"early_stop_patience", early_stop_patience},
          {"max_passes", max_passes},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.adam.lr = j.at("lr");
  cfg.adam.beta1 = j.at("beta1");
  cfg.adam.beta2 = j.at("beta2");
  cfg.adam.eps = j.at("eps");
  cfg.weight_reg = j.at("weight_reg");
  cfg.batch_size = j.at("batch_size");
  cfg.early_stop_patience = j.at("early_stop_patience");
  cfg.max_passes = j.at("max_passes");
  cfg.seed = j.at("seed");
  return cfg;
}

SignalBatch batch_from_sequences(const std::vector<SequenceSample>& samples,
                                 const std::vector<size_t>& idx, size_t lo, size_t hi,
                                 std::vector<int>* labels) {
  const int n = static_cast<int>(hi - lo);
  const int L = samples[idx[lo]].sequence_length();
  const int epoch_len = static_cast<int>(samples[idx[lo]].epochs[0]->samples.size());

  SignalBatch x(1, n * L, epoch_len);
  if (labels) labels->resize(n);
  for (int i = 0; i < n; ++i) {
    const SequenceSample& s = samples[idx[lo + i]];
    if (s.sequence_length() != L)
      throw std::invalid_argument("batch_from_sequences: mixed sequence lengths");
    for (int j = 0; j < L; ++j) {
      const auto& samples_j = s.epochs[j]->samples;
      if (static_cast<int>(samples_j.size()) != epoch_len)
        throw std::invalid_argument("batch_from_sequences: mixed epoch sizes");
      x.block(i * L + j) =
          Eigen::Map<const Eigen::RowVectorXd>(samples_j.data(), epoch_len);
    }
    if (labels) (*labels)[i] = static_cast<int>(s.target_label);
  }
  return x;
}

EvalStats evaluate(const model::SequenceClassifier& model,
                   const std::vector<SequenceSample>& set, int batch_size) {
  EvalStats stats;
  if (set.empty()) throw std::invalid_argument("evaluate: empty sample set");
  std::vector<size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);

  double loss_weighted = 0.0;
  for (size_t lo = 0; lo < set.size(); lo += static_cast<size_t>(batch_size)) {
    const size_t hi = std::min(set.size(), lo + static_cast<size_t>(batch_size));
    std::vector<int> labels;
    SignalBatch x = batch_from_sequences(set, idx, lo, hi, &labels);
    const Mat logits = model.predict_logits(x);

    loss_weighted +=
        nn::softmax_cross_entropy(logits, labels, nullptr) * static_cast<double>(hi - lo);
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      Eigen::Index pred;
      logits.col(j).maxCoeff(&pred);
      stats.confusion.add(stage_from_index(static_cast<int>(pred)),
                          stage_from_index(labels[static_cast<size_t>(j)]));
    }
  }
  stats.n = static_cast<long long>(set.size());
  stats.data_loss = loss_weighted / static_cast<double>(stats.n);
  stats.accuracy = static_cast<double>(stats.confusion.diagonal_sum()) /
                   static_cast<double>(stats.confusion.total());
  return stats;
}

namespace {

void require_disjoint_subjects(const std::vector<SequenceSample>& train_set,
                               const std::vector<SequenceSample>& val_set) {
  std::set<std::string> train_subjects;
  for (const auto& s : train_set) train_subjects.insert(s.target().subject_id);
  for (const auto& s : val_set)
    if (train_subjects.count(s.target().subject_id))
      throw std::invalid_argument("fit: subject " + s.target().subject_id +
                                  " appears in both train and validation sets");
}

std::vector<double> snapshot_tensors(model::SequenceClassifier& model) {
  std::vector<double> out;
  for (const auto& p : model.params()) out.insert(out.end(), p.value, p.value + p.size());
  for (const auto& b : model.buffers())
    out.insert(out.end(), b.value, b.value + b.size());
  return out;
}

void restore_tensors(model::SequenceClassifier& model, const std::vector<double>& snap) {
  size_t k = 0;
  for (const auto& p : model.params()) {
    std::copy(snap.begin() + k, snap.begin() + k + p.size(), p.value);
    k += static_cast<size_t>(p.size());
  }
  for (const auto& b : model.buffers()) {
    std::copy(snap.begin() + k, snap.begin() + k + b.size(), b.value);
    k += static_cast<size_t>(b.size());
  }
}

}  // namespace

TrainResult fit(model::SequenceClassifier& model,
                const std::vector<SequenceSample>& train_set,
                const std::vector<SequenceSample>& val_set, const TrainConfig& cfg,
                std::ostream* jsonl) {
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("fit: train and validation sets must be non-empty");
  require_disjoint_subjects(train_set, val_set);

  std::seed_seq init_seq{cfg.seed, uint64_t{0}};
  std::seed_seq shuffle_seq{cfg.seed, uint64_t{1}};
  std::seed_seq dropout_seq{cfg.seed, uint64_t{2}};
  std::mt19937_64 init_rng(init_seq);
  std::mt19937_64 shuffle_rng(shuffle_seq);
  std::mt19937_64 dropout_rng(dropout_seq);

  model.init(init_rng);
  Adam opt(model.params(), cfg.adam);

  TrainResult result;
  std::vector<double> best_by_accuracy = snapshot_tensors(model);
  double best_cost = std::numeric_limits<double>::infinity();
  int stale_evals = 0;
  std::vector<double> recent_losses;

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int pass = 1; pass <= cfg.max_passes; ++pass) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double pass_loss_sum = 0.0;
    int pass_batches = 0;
    for (size_t lo = 0; lo < order.size(); lo += static_cast<size_t>(cfg.batch_size)) {
      const size_t hi = std::min(order.size(), lo + static_cast<size_t>(cfg.batch_size));
      std::vector<int> labels;
      SignalBatch x = batch_from_sequences(train_set, order, lo, hi, &labels);

      model.zero_grad();
      const model::LossParts loss =
          model.backprop(x, labels, cfg.weight_reg, true, &dropout_rng);
      const double total = loss.total();
      recent_losses.push_back(total);
      if (recent_losses.size() > 10) recent_losses.erase(recent_losses.begin());
      if (!std::isfinite(total)) {
        throw TrainingDiverged(
            "training loss is not finite at step " + std::to_string(result.steps + 1) +
                " (pass " + std::to_string(pass) + ", batch " +
                std::to_string(pass_batches) + "); recent losses: " +
                [&] {
                  std::string s;
                  for (double v : recent_losses) s += std::to_string(v) + " ";
                  return s;
                }(),
            result.steps + 1, pass, pass_batches, recent_losses);
      }
      opt.step(model.params());
      ++result.steps;
      pass_loss_sum += total;
      ++pass_batches;
    }

    const EvalStats val = evaluate(model, val_set, cfg.batch_size);
    const double penalty = cfg.weight_reg * model::regularized_squared_norm(model.params());
    EvalPoint point;
    point.step = result.steps;
    point.pass = pass;
    point.train_loss = pass_loss_sum / std::max(1, pass_batches);
    point.val_cost = val.data_loss + penalty;
    point.val_accuracy = val.accuracy;
    result.history.push_back(point);
    result.passes = pass;

    if (jsonl) {
      nlohmann::json line = {{"step", point.step},
                             {"pass", point.pass},
                             {"train_loss", point.train_loss},
                             {"val_cost", point.val_cost},
                             {"val_acc", point.val_accuracy}};
      (*jsonl) << line.dump() << "\n";
    }

    if (point.val_accuracy > result.best_val_accuracy ||
        result.history.size() == 1) {
      result.best_val_accuracy = point.val_accuracy;
      best_by_accuracy = snapshot_tensors(model);
    }
    if (point.val_cost < best_cost) {
      best_cost = point.val_cost;
      stale_evals = 0;
    } else {
      ++stale_evals;
      if (stale_evals >= cfg.early_stop_patience) {
        result.early_stopped = true;
        break;
      }
    }
  }

  result.best_val_cost = best_cost;
  restore_tensors(model, best_by_accuracy);
  return result;
}

}  // namespace iitnet::train
