#include "doctest.h"
#include "iitnet/core.hpp"

using namespace iitnet;

TEST_CASE("stage names round-trip") {
  for (int i = 0; i < kNumStages; ++i) {
    const Stage s = stage_from_index(i);
    CHECK(stage_from_name(stage_name(s)) == s);
  }
  CHECK_THROWS_AS(stage_from_index(5), std::out_of_range);
  CHECK_THROWS_AS(stage_from_index(-1), std::out_of_range);
}

TEST_CASE("rechtschaffen-kales labels map onto the five-stage scheme") {
  CHECK(harmonize_label("Sleep stage W").stage == Stage::Wake);
  CHECK(harmonize_label("Sleep stage 1").stage == Stage::N1);
  CHECK(harmonize_label("Sleep stage 2").stage == Stage::N2);
  CHECK(harmonize_label("Sleep stage 3").stage == Stage::N3);
  CHECK(harmonize_label("Sleep stage 4").stage == Stage::N3);  // merged under AASM
  CHECK(harmonize_label("Sleep stage R").stage == Stage::Rem);
}

TEST_CASE("aasm labels map directly") {
  CHECK(harmonize_label("Sleep stage N1").stage == Stage::N1);
  CHECK(harmonize_label("Sleep stage N2").stage == Stage::N2);
  CHECK(harmonize_label("Sleep stage N3").stage == Stage::N3);
  CHECK(harmonize_label("N4").stage == Stage::N3);
  CHECK(harmonize_label("REM").stage == Stage::Rem);
}

TEST_CASE("movement and unknown epochs are excluded, not dropped silently") {
  auto mt = harmonize_label("Movement time");
  CHECK(mt.is_excluded());
  CHECK(mt.excluded == ExcludedReason::Movement);

  auto unk = harmonize_label("Sleep stage ?");
  CHECK(unk.is_excluded());
  CHECK(unk.excluded == ExcludedReason::Unknown);
}

TEST_CASE("numeric annotation codes follow the profusion convention") {
  CHECK(harmonize_label("0").stage == Stage::Wake);
  CHECK(harmonize_label("1").stage == Stage::N1);
  CHECK(harmonize_label("2").stage == Stage::N2);
  CHECK(harmonize_label("3").stage == Stage::N3);
  CHECK(harmonize_label("4").stage == Stage::N3);
  CHECK(harmonize_label("5").stage == Stage::Rem);
  CHECK(harmonize_label("6").is_excluded());
  CHECK(harmonize_label("9").is_excluded());
}

TEST_CASE("unrecognized tokens raise an error naming token and file") {
  try {
    harmonize_label("Sleep stage X", "night7.edf");
    FAIL("expected UnknownLabelError");
  } catch (const UnknownLabelError& e) {
    CHECK(e.token() == "Sleep stage X");
    CHECK(std::string(e.what()).find("Sleep stage X") != std::string::npos);
    CHECK(std::string(e.what()).find("night7.edf") != std::string::npos);
  }
}

TEST_CASE("confusion matrix accumulates with predicted rows and true columns") {
  ConfusionMatrix cm;
  cm.add(Stage::Wake, Stage::N1);
  cm.add(Stage::Wake, Stage::N1, 2);
  cm.add(Stage::Rem, Stage::Rem, 5);
  CHECK(cm.at(0, 1) == 3);
  CHECK(cm.at(4, 4) == 5);
  CHECK(cm.row_sum(0) == 3);
  CHECK(cm.col_sum(1) == 3);
  CHECK(cm.diagonal_sum() == 5);
  CHECK(cm.total() == 8);

  ConfusionMatrix other;
  other.add(Stage::Wake, Stage::N1, 1);
  cm += other;
  CHECK(cm.at(0, 1) == 4);
  CHECK(cm.total() == 9);
}
