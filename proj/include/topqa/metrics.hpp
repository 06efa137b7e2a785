#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "topqa/answer_parse.hpp"
#include "topqa/tree.hpp"

namespace topqa {

struct EmOptions {
  // Compare leaf text case-insensitively (whitespace is always collapsed).
  bool case_insensitive = true;
  // Pass both sides through to_decoupled before comparing. The open-world
  // pipeline compares decoupled trees; closed-world order trees keep their
  // values under intent-kind nodes and must be compared in full.
  bool decouple = true;
};

// Order-insensitive canonical encoding of a subtree: children compare as a
// multiset, token runs compare as one text unit in surface order.
std::string canonical_form(const TreeNode& node, const EmOptions& opts = {});

// Unordered exact match: 1 iff both trees are recursively equal modulo
// sibling order. A failed reconstruction scores 0.
int unordered_em(const ParseTree& hypothesis, const ParseTree& reference,
                 const EmOptions& opts = {});
int unordered_em(const ReconResult& hypothesis, const ParseTree& reference,
                 const EmOptions& opts = {});

struct DepthBucket {
  int n = 0;
  double em = 0.0;
  double avg_length = 0.0;
};

struct EvalReport {
  int n = 0;
  double em = 0.0;
  std::map<int, DepthBucket> per_depth;        // keyed by reference depth
  std::map<ReconReason, int> failures;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct EvalPair {
  ReconResult hypothesis;
  ParseTree reference;
  std::string utterance;
};

EvalReport evaluate_corpus(std::span<const EvalPair> pairs, const EmOptions& opts = {});

// Human-readable report; with by_depth, one row per depth bucket
// (depth, n, avg length, EM).
std::string format_report(const EvalReport& report, bool by_depth);

// Machine-readable rows "depth\tn\tL\tEM" plus an "all" row.
std::string report_rows(const EvalReport& report);

}  // namespace topqa
