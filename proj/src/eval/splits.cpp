#include "iitnet/eval/splits.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

namespace iitnet::eval {

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::SleepEdf: return "sleepedf";
    case Protocol::Mass: return "mass";
    case Protocol::Shhs: return "shhs";
    case Protocol::Generic: return "generic";
  }
  return "?";
}

std::optional<Protocol> protocol_from_name(const std::string& name) {
  for (Protocol p : {Protocol::SleepEdf, Protocol::Mass, Protocol::Shhs, Protocol::Generic}) {
    if (name == protocol_name(p)) return p;
  }
  return std::nullopt;
}

namespace {

void require_subject_count(Protocol p, std::size_t expected, std::size_t actual) {
  if (actual != expected) {
    throw std::invalid_argument(std::string("protocol ") + protocol_name(p) + " expects " +
                                std::to_string(expected) + " subjects, got " +
                                std::to_string(actual));
  }
}

// Deterministic per-fold stream so fold k's train/val draw does not depend
// on how many folds were built before it.
std::mt19937_64 fold_rng(std::uint64_t seed, std::uint64_t fold) {
  std::seed_seq seq{seed, fold + 1};
  return std::mt19937_64(seq);
}

std::vector<std::string> sorted_unique(std::vector<std::string> subjects) {
  std::sort(subjects.begin(), subjects.end());
  auto dup = std::adjacent_find(subjects.begin(), subjects.end());
  if (dup != subjects.end())
    throw std::invalid_argument("duplicate subject id in split input: " + *dup);
  return subjects;
}

}  // namespace

SplitPlan build_split_plan(Protocol protocol, const std::vector<std::string>& subjects_in,
                           std::uint64_t seed, const GenericSplitSpec* generic_spec) {
  if (subjects_in.empty()) throw std::invalid_argument("build_split_plan: no subjects");
  const std::vector<std::string> subjects = sorted_unique(subjects_in);

  SplitPlan plan;
  plan.protocol = protocol;
  plan.seed = seed;

  switch (protocol) {
    case Protocol::SleepEdf: {
      require_subject_count(protocol, 20, subjects.size());
      for (std::size_t i = 0; i < subjects.size(); ++i) {
        Fold fold;
        fold.test_subjects = {subjects[i]};
        std::vector<std::string> rest;
        for (std::size_t j = 0; j < subjects.size(); ++j)
          if (j != i) rest.push_back(subjects[j]);
        auto rng = fold_rng(seed, i);
        std::shuffle(rest.begin(), rest.end(), rng);
        fold.train_subjects.assign(rest.begin(), rest.begin() + 15);
        fold.val_subjects.assign(rest.begin() + 15, rest.end());  // 4 validation subjects
        plan.folds.push_back(std::move(fold));
      }
      break;
    }
    case Protocol::Mass: {
      require_subject_count(protocol, 62, subjects.size());
      std::vector<std::string> shuffled = subjects;
      auto rng = std::mt19937_64(seed);
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      for (int i = 0; i < 31; ++i) {
        Fold fold;
        fold.test_subjects = {shuffled[2 * i], shuffled[2 * i + 1]};
        std::vector<std::string> rest;
        for (const auto& s : subjects)
          if (s != fold.test_subjects[0] && s != fold.test_subjects[1]) rest.push_back(s);
        auto frng = fold_rng(seed, static_cast<std::uint64_t>(i));
        std::shuffle(rest.begin(), rest.end(), frng);
        fold.train_subjects.assign(rest.begin(), rest.begin() + 45);
        fold.val_subjects.assign(rest.begin() + 45, rest.end());  // 15 validation subjects
        plan.folds.push_back(std::move(fold));
      }
      break;
    }
    case Protocol::Shhs: {
      if (subjects.size() < 3)
        throw std::invalid_argument("shhs protocol needs at least 3 subjects, got " +
                                    std::to_string(subjects.size()));
      std::vector<std::string> shuffled = subjects;
      auto rng = std::mt19937_64(seed);
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      const std::size_t n = shuffled.size();
      // 5:2:3 ratio; rounding keeps every set non-empty.
      std::size_t n_train = std::max<std::size_t>(1, static_cast<std::size_t>(n * 0.5 + 0.5));
      std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(n * 0.2 + 0.5));
      while (n_train + n_val >= n) {
        if (n_train > 1) --n_train; else --n_val;
      }
      Fold fold;
      fold.train_subjects.assign(shuffled.begin(), shuffled.begin() + n_train);
      fold.val_subjects.assign(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
      fold.test_subjects.assign(shuffled.begin() + n_train + n_val, shuffled.end());
      plan.folds.push_back(std::move(fold));
      break;
    }
    case Protocol::Generic: {
      GenericSplitSpec spec = generic_spec ? *generic_spec : GenericSplitSpec{};
      if (spec.folds < 1 || static_cast<std::size_t>(spec.folds) > subjects.size())
        throw std::invalid_argument("generic protocol: fold count " + std::to_string(spec.folds) +
                                    " invalid for " + std::to_string(subjects.size()) + " subjects");
      std::vector<std::string> shuffled = subjects;
      auto rng = std::mt19937_64(seed);
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      std::vector<std::vector<std::string>> test_groups(spec.folds);
      for (std::size_t i = 0; i < shuffled.size(); ++i)
        test_groups[i % spec.folds].push_back(shuffled[i]);
      for (int k = 0; k < spec.folds; ++k) {
        Fold fold;
        fold.test_subjects = test_groups[k];
        std::vector<std::string> rest;
        for (const auto& s : subjects)
          if (std::find(fold.test_subjects.begin(), fold.test_subjects.end(), s) ==
              fold.test_subjects.end())
            rest.push_back(s);
        auto frng = fold_rng(seed, static_cast<std::uint64_t>(k));
        std::shuffle(rest.begin(), rest.end(), frng);
        std::size_t n_val = static_cast<std::size_t>(rest.size() * spec.val_fraction + 0.5);
        n_val = std::min(n_val, rest.size() > 1 ? rest.size() - 1 : std::size_t{0});
        fold.val_subjects.assign(rest.begin(), rest.begin() + n_val);
        fold.train_subjects.assign(rest.begin() + n_val, rest.end());
        plan.folds.push_back(std::move(fold));
      }
      break;
    }
  }

  validate_split_plan(plan, subjects);
  return plan;
}

void validate_split_plan(const SplitPlan& plan, const std::vector<std::string>& subjects) {
  std::multiset<std::string> test_union;
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    const Fold& fold = plan.folds[k];
    std::set<std::string> seen;
    auto check_disjoint = [&](const std::vector<std::string>& group, const char* name) {
      for (const auto& s : group) {
        if (!seen.insert(s).second)
          throw std::invalid_argument("fold " + std::to_string(k) + ": subject " + s +
                                      " appears in more than one of train/val/" + name);
      }
    };
    check_disjoint(fold.train_subjects, "train");
    check_disjoint(fold.val_subjects, "val");
    check_disjoint(fold.test_subjects, "test");
    if (fold.test_subjects.empty())
      throw std::invalid_argument("fold " + std::to_string(k) + ": empty test set");
    for (const auto& s : fold.test_subjects) test_union.insert(s);
  }

  // k-fold protocols: test sets partition the population.
  if (plan.protocol != Protocol::Shhs && plan.folds.size() > 1) {
    std::multiset<std::string> population(subjects.begin(), subjects.end());
    if (test_union != population)
      throw std::invalid_argument("test sets do not partition the subject population");
  }
}

}  // namespace iitnet::eval
