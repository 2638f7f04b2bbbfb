#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace iitnet::eval {

enum class Protocol { SleepEdf, Mass, Shhs, Generic };

const char* protocol_name(Protocol p);
std::optional<Protocol> protocol_from_name(const std::string& name);

struct Fold {
  std::vector<std::string> train_subjects;
  std::vector<std::string> val_subjects;
  std::vector<std::string> test_subjects;
};

// Subject-wise cross-validation plan. Within a fold the three sets are
// pairwise disjoint; for k-fold protocols the test sets partition the
// subject population across folds.
struct SplitPlan {
  Protocol protocol = Protocol::Generic;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
};

// Parameters for the Generic protocol: k test groups, remaining subjects
// split train/val per fold by val_fraction.
struct GenericSplitSpec {
  int folds = 2;
  double val_fraction = 0.2;
};

// Builds the protocol's plan deterministically from the seed.
//   SleepEdf: 20 subjects required; 20 folds, one test subject each,
//             remaining 19 drawn 15 train / 4 val per fold.
//   Mass:     62 subjects required; 31 folds, two disjoint test subjects
//             each, remaining 60 drawn 45 train / 15 val per fold.
//   Shhs:     single fold, random 5:2:3 train/val/test split.
//   Generic:  spec-driven k-fold (spec required).
// Throws std::invalid_argument on protocol/subject-count mismatch.
SplitPlan build_split_plan(Protocol protocol, const std::vector<std::string>& subjects,
                           std::uint64_t seed,
                           const GenericSplitSpec* generic_spec = nullptr);

// Verifies within-fold disjointness and (for k-fold protocols) that the test
// sets partition the population. Throws std::invalid_argument on violation.
void validate_split_plan(const SplitPlan& plan, const std::vector<std::string>& subjects);

}  // namespace iitnet::eval
