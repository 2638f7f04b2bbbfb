#include <algorithm>
#include <set>

#include "doctest.h"
#include "iitnet/eval/splits.hpp"

using namespace iitnet::eval;

namespace {

std::vector<std::string> make_subjects(int n, const std::string& prefix = "S") {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(100 + i));
  return out;
}

void check_fold_disjoint(const Fold& f) {
  std::set<std::string> seen;
  for (const auto* group : {&f.train_subjects, &f.val_subjects, &f.test_subjects})
    for (const auto& s : *group) {
      CHECK(seen.insert(s).second);
    }
}

}  // namespace

TEST_CASE("twenty-subject protocol: one held-out subject per fold, 15/4 split") {
  const auto subjects = make_subjects(20);
  const SplitPlan plan = build_split_plan(Protocol::SleepEdf, subjects, 7);
  REQUIRE(plan.folds.size() == 20);

  std::vector<std::string> test_union;
  for (size_t k = 0; k < plan.folds.size(); ++k) {
    const Fold& f = plan.folds[k];
    CHECK(f.test_subjects.size() == 1);
    CHECK(f.train_subjects.size() == 15);
    CHECK(f.val_subjects.size() == 4);
    check_fold_disjoint(f);
    test_union.insert(test_union.end(), f.test_subjects.begin(), f.test_subjects.end());
  }
  // Every subject is tested exactly once, in deterministic order.
  std::sort(test_union.begin(), test_union.end());
  auto sorted = subjects;
  std::sort(sorted.begin(), sorted.end());
  CHECK(test_union == sorted);

  validate_split_plan(plan, subjects);
  CHECK_THROWS(build_split_plan(Protocol::SleepEdf, make_subjects(19), 7));
}

TEST_CASE("sixty-two-subject protocol: 31 folds of paired test subjects, 45/15 split") {
  const auto subjects = make_subjects(62);
  const SplitPlan plan = build_split_plan(Protocol::Mass, subjects, 11);
  REQUIRE(plan.folds.size() == 31);

  std::multiset<std::string> test_union;
  for (const Fold& f : plan.folds) {
    CHECK(f.test_subjects.size() == 2);
    CHECK(f.train_subjects.size() == 45);
    CHECK(f.val_subjects.size() == 15);
    check_fold_disjoint(f);
    test_union.insert(f.test_subjects.begin(), f.test_subjects.end());
  }
  CHECK(test_union.size() == 62);
  for (const auto& s : subjects) CHECK(test_union.count(s) == 1);

  validate_split_plan(plan, subjects);
  CHECK_THROWS(build_split_plan(Protocol::Mass, make_subjects(61), 11));
}

TEST_CASE("single holdout protocol uses a 5:2:3 subject split") {
  const auto subjects = make_subjects(10);
  const SplitPlan plan = build_split_plan(Protocol::Shhs, subjects, 3);
  REQUIRE(plan.folds.size() == 1);
  const Fold& f = plan.folds[0];
  CHECK(f.train_subjects.size() == 5);
  CHECK(f.val_subjects.size() == 2);
  CHECK(f.test_subjects.size() == 3);
  check_fold_disjoint(f);
  validate_split_plan(plan, subjects);
}

TEST_CASE("generic protocol covers every subject across k folds") {
  const auto subjects = make_subjects(9);
  GenericSplitSpec spec;
  spec.folds = 3;
  spec.val_fraction = 0.25;
  const SplitPlan plan = build_split_plan(Protocol::Generic, subjects, 5, &spec);
  REQUIRE(plan.folds.size() == 3);
  std::multiset<std::string> test_union;
  for (const Fold& f : plan.folds) {
    check_fold_disjoint(f);
    CHECK(!f.test_subjects.empty());
    CHECK(!f.train_subjects.empty());
    test_union.insert(f.test_subjects.begin(), f.test_subjects.end());
  }
  CHECK(test_union.size() == 9);
  validate_split_plan(plan, subjects);
}

TEST_CASE("plans are deterministic in the seed") {
  const auto subjects = make_subjects(20);
  const SplitPlan a = build_split_plan(Protocol::SleepEdf, subjects, 42);
  const SplitPlan b = build_split_plan(Protocol::SleepEdf, subjects, 42);
  const SplitPlan c = build_split_plan(Protocol::SleepEdf, subjects, 43);
  for (size_t k = 0; k < a.folds.size(); ++k) {
    CHECK(a.folds[k].train_subjects == b.folds[k].train_subjects);
    CHECK(a.folds[k].val_subjects == b.folds[k].val_subjects);
    CHECK(a.folds[k].test_subjects == b.folds[k].test_subjects);
  }
  bool any_diff = false;
  for (size_t k = 0; k < a.folds.size(); ++k)
    if (a.folds[k].train_subjects != c.folds[k].train_subjects) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("duplicate subjects are rejected") {
  auto subjects = make_subjects(20);
  subjects[3] = subjects[4];
  CHECK_THROWS(build_split_plan(Protocol::SleepEdf, subjects, 1));
}
