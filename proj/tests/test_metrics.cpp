#include <doctest.h>

#include "testutil.hpp"
#include "topqa/metrics.hpp"

using namespace topqa;
using namespace testutil;

namespace {

const char* kNavTree =
    "[IN:GET_DIRECTIONS [SL:DESTINATION [IN:GET_LOCATION [SL:LOCATION_MODIFIER nearest] "
    "[SL:CATEGORY_LOCATION parking] [SL:LOCATION_MODIFIER [IN:GET_LOCATION "
    "[SL:SEARCH_RADIUS near] [SL:LOCATION S Beritania Street]]]]]]";

}  // namespace

TEST_CASE("sibling swaps keep EM at 1, relabels break it") {
  ParseTree ref = parse_linearized(kNavTree);
  ParseTree swapped = ref;
  // Swap the two location-modifier children of the nested intent.
  TreeNode& loc = swapped.root.children[0].children[0];
  std::swap(loc.children[0], loc.children[2]);
  CHECK(unordered_em(swapped, ref) == 1);

  ParseTree renamed = ref;
  renamed.root.children[0].label = "SL:SOURCE";
  CHECK(unordered_em(renamed, ref) == 0);
}

TEST_CASE("reconstruction errors score 0") {
  ParseTree ref = parse_linearized(kNavTree);
  ReconResult failed;
  failed.error = ReconstructionError{ReconReason::InvalidEntity, 1, ""};
  CHECK(unordered_em(failed, ref) == 0);
}

TEST_CASE("leaf text comparison is normalized, case-insensitivity optional") {
  ParseTree a = parse_linearized("[IN:X [SL:Y Foo Bar ] ]");
  ParseTree b = parse_linearized("[IN:X [SL:Y foo bar ] ]");
  CHECK(unordered_em(a, b) == 1);
  CHECK(unordered_em(a, b, {.case_insensitive = false}) == 0);
  // Token order inside one leaf is significant.
  ParseTree c = parse_linearized("[IN:X [SL:Y Bar Foo ] ]");
  CHECK(unordered_em(a, c) == 0);
}

TEST_CASE("decoupling is applied by default") {
  ParseTree full = parse_linearized("[IN:X filler [SL:Y a ] ]");
  ParseTree dec = parse_linearized("[IN:X [SL:Y a ] ]");
  CHECK(unordered_em(full, dec) == 1);
  CHECK(unordered_em(full, dec, {.decouple = false}) == 0);
}

TEST_CASE("mutation oracle: shuffles stay equal, single edits never do") {
  TreeGen gen(401);
  std::mt19937_64 rng(403);
  int moves_applied = 0;
  for (int i = 0; i < 300; ++i) {
    ParseTree tree = gen.tree();

    ParseTree shuffled = tree;
    shuffle_siblings(shuffled.root, rng);
    CHECK(unordered_em(shuffled, tree) == 1);

    ParseTree relabeled = tree;
    mutate_relabel(relabeled, rng);
    CHECK(unordered_em(relabeled, tree) == 0);

    ParseTree dropped = tree;
    if (mutate_drop_leaf(dropped, rng)) CHECK(unordered_em(dropped, tree) == 0);

    ParseTree moved = tree;
    if (mutate_move_subtree(moved, rng)) {
      ++moves_applied;
      CHECK(unordered_em(moved, tree) == 0);
    }
  }
  CHECK(moves_applied > 50);
}

TEST_CASE("EM equality implies equal depth") {
  TreeGen gen(409);
  std::mt19937_64 rng(411);
  for (int i = 0; i < 100; ++i) {
    ParseTree tree = gen.tree();
    ParseTree shuffled = tree;
    shuffle_siblings(shuffled.root, rng);
    REQUIRE(unordered_em(shuffled, tree) == 1);
    CHECK(compute_stats(shuffled).depth == compute_stats(tree).depth);
  }
}

TEST_CASE("corpus evaluation buckets by reference depth") {
  TreeGen gen(419);
  std::vector<EvalPair> pairs;
  std::map<int, int> expected_counts;
  int expected_correct = 0;
  std::mt19937_64 rng(421);
  for (int i = 0; i < 120; ++i) {
    ParseTree tree = gen.tree();
    EvalPair pair;
    pair.reference = tree;
    pair.utterance = tree.utterance;
    if (i % 4 == 0) {
      ParseTree wrong = tree;
      mutate_relabel(wrong, rng);
      pair.hypothesis.tree = wrong;
    } else if (i % 17 == 0) {
      pair.hypothesis.error = ReconstructionError{ReconReason::InvalidEntity, 1, ""};
    } else {
      ParseTree same = tree;
      shuffle_siblings(same.root, rng);
      pair.hypothesis.tree = same;
      ++expected_correct;
    }
    ++expected_counts[compute_stats(tree).depth];
    pairs.push_back(std::move(pair));
  }
  EvalReport report = evaluate_corpus(pairs);
  CHECK(report.n == 120);
  CHECK(report.em == doctest::Approx(static_cast<double>(expected_correct) / 120));
  std::map<int, int> got_counts;
  for (const auto& [depth, bucket] : report.per_depth) got_counts[depth] = bucket.n;
  CHECK(got_counts == expected_counts);
  CHECK(report.failures[ReconReason::InvalidEntity] > 0);

  // Weighted bucket EMs recompose the overall EM.
  double weighted = 0;
  for (const auto& [depth, bucket] : report.per_depth) weighted += bucket.em * bucket.n;
  CHECK(weighted / report.n == doctest::Approx(report.em));
}

TEST_CASE("all-correct corpus: EM 1.0 and empty failures; one error reduces it") {
  TreeGen gen(431);
  std::vector<EvalPair> pairs;
  for (int i = 0; i < 10; ++i) {
    ParseTree tree = gen.tree();
    EvalPair pair;
    pair.reference = tree;
    pair.utterance = tree.utterance;
    pair.hypothesis.tree = tree;
    pairs.push_back(std::move(pair));
  }
  EvalReport clean = evaluate_corpus(pairs);
  CHECK(clean.em == 1.0);
  CHECK(clean.failures.empty());

  pairs[0].hypothesis.tree.reset();
  pairs[0].hypothesis.error = ReconstructionError{ReconReason::InvalidEntity, 1, ""};
  EvalReport dirty = evaluate_corpus(pairs);
  CHECK(dirty.em == doctest::Approx(9.0 / 10));
  CHECK(dirty.failures[ReconReason::InvalidEntity] == 1);
}

TEST_CASE("report formatting includes depth rows") {
  EvalReport report;
  report.n = 2;
  report.em = 0.5;
  report.per_depth[2] = {2, 0.5, 4.0};
  std::string text = format_report(report, true);
  CHECK(text.find("EM = 0.5") != std::string::npos);
  CHECK(text.find("depth\tn\tL\tEM") != std::string::npos);
  std::string rows = report_rows(report);
  CHECK(rows.find("2\t2\t4.00\t0.5000") != std::string::npos);
  CHECK(rows.find("all\t2") != std::string::npos);
}
