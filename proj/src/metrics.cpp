#include "topqa/metrics.hpp"

#include <algorithm>
#include <sstream>

#include "topqa/text.hpp"

namespace topqa {

namespace {

void canon(const TreeNode& node, const EmOptions& opts, std::string& out) {
  out.push_back('[');
  out.append(node.label);
  // Token runs form one comparison unit, in surface order.
  std::vector<std::string> words;
  std::vector<std::string> children;
  for (const TreeNode& child : node.children) {
    if (child.kind == NodeKind::Token) {
      words.push_back(child.label);
    } else {
      std::string sub;
      canon(child, opts, sub);
      children.push_back(std::move(sub));
    }
  }
  if (!words.empty()) {
    std::string textual = text::collapse_whitespace(text::join(words, " "));
    if (opts.case_insensitive) textual = text::to_lower(textual);
    out.push_back('|');
    out.append(textual);
  }
  std::sort(children.begin(), children.end());
  for (const std::string& child : children) {
    out.push_back(' ');
    out.append(child);
  }
  out.push_back(']');
}

}  // namespace

std::string canonical_form(const TreeNode& node, const EmOptions& opts) {
  std::string out;
  canon(node, opts, out);
  return out;
}

int unordered_em(const ParseTree& hypothesis, const ParseTree& reference, const EmOptions& opts) {
  const TreeNode* h = &hypothesis.root;
  const TreeNode* r = &reference.root;
  TreeNode hd, rd;
  if (opts.decouple) {
    hd = to_decoupled(hypothesis.root);
    rd = to_decoupled(reference.root);
    h = &hd;
    r = &rd;
  }
  return canonical_form(*h, opts) == canonical_form(*r, opts) ? 1 : 0;
}

int unordered_em(const ReconResult& hypothesis, const ParseTree& reference,
                 const EmOptions& opts) {
  if (!hypothesis.ok()) return 0;
  return unordered_em(*hypothesis.tree, reference, opts);
}

EvalReport evaluate_corpus(std::span<const EvalPair> pairs, const EmOptions& opts) {
  EvalReport report;
  std::map<int, std::pair<int, long long>> length_sums;  // depth -> (hits, total words)
  int correct = 0;
  for (const EvalPair& pair : pairs) {
    ++report.n;
    int score = unordered_em(pair.hypothesis, pair.reference, opts);
    correct += score;
    if (!pair.hypothesis.ok() && pair.hypothesis.error)
      ++report.failures[pair.hypothesis.error->reason];

    ParseTree ref = pair.reference;
    if (ref.utterance.empty()) ref.utterance = pair.utterance;
    TreeStats stats = compute_stats(ref);
    DepthBucket& bucket = report.per_depth[stats.depth];
    ++bucket.n;
    bucket.em += score;
    length_sums[stats.depth].second += stats.length;
  }
  for (auto& [depth, bucket] : report.per_depth) {
    bucket.em = bucket.n ? bucket.em / bucket.n : 0.0;
    bucket.avg_length =
        bucket.n ? static_cast<double>(length_sums[depth].second) / bucket.n : 0.0;
  }
  report.em = report.n ? static_cast<double>(correct) / report.n : 0.0;
  return report;
}

std::string format_report(const EvalReport& report, bool by_depth) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "n = " << report.n << "\n";
  out << "EM = " << report.em << "\n";
  if (!report.failures.empty()) {
    out << "failures:\n";
    for (const auto& [reason, count] : report.failures)
      out << "  " << recon_reason_name(reason) << ": " << count << "\n";
  }
  if (by_depth) {
    out << "depth\tn\tL\tEM\n";
    for (const auto& [depth, bucket] : report.per_depth) {
      out.precision(2);
      out << depth << "\t" << bucket.n << "\t" << bucket.avg_length << "\t";
      out.precision(4);
      out << bucket.em << "\n";
    }
  }
  return out.str();
}

std::string report_rows(const EvalReport& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  for (const auto& [depth, bucket] : report.per_depth) {
    out.precision(2);
    out << depth << "\t" << bucket.n << "\t" << bucket.avg_length << "\t";
    out.precision(4);
    out << bucket.em << "\n";
  }
  out.precision(2);
  out << "all\t" << report.n << "\t-\t";
  out.precision(4);
  out << report.em << "\n";
  return out.str();
}

}  // namespace topqa
