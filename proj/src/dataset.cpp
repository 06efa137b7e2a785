#include "topqa/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "topqa/generate.hpp"
#include "topqa/text.hpp"

namespace topqa {

namespace {

const char* path_kind_name(PathKind kind) {
  switch (kind) {
    case PathKind::Root: return "root";
    case PathKind::Intent: return "intent";
    case PathKind::Slot: return "slot";
  }
  return "unknown";
}

bool path_kind_from_name(const std::string& name, PathKind& out) {
  if (name == "root") out = PathKind::Root;
  else if (name == "intent") out = PathKind::Intent;
  else if (name == "slot") out = PathKind::Slot;
  else return false;
  return true;
}

void collect_labels(const TreeNode& node, std::set<std::string>& out) {
  if (node.kind != NodeKind::Token) out.insert(node.label);
  for (const TreeNode& child : node.children) collect_labels(child, out);
}

}  // namespace

ParseTree DatasetRecord::parse() const {
  ParseTree tree = parse_linearized(linearized_tree);
  tree.domain = domain;
  tree.utterance = utterance;
  return tree;
}

TsvResult read_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(DatasetErrorKind::IoError, "cannot open: " + path);
  TsvResult result;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols = text::split(line, "\t");
    if (cols.size() != 3) {
      result.rejects.push_back({lineno,
                                "expected 3 tab-separated columns, got " +
                                    std::to_string(cols.size()),
                                line});
      continue;
    }
    // Optional header: the tree column of a real row starts with '['.
    if (lineno == 1 && cols[2].find('[') == std::string::npos) continue;
    DatasetRecord record{cols[0], cols[1], cols[2]};
    try {
      ParseTree tree = record.parse();
      (void)tree;
    } catch (const TreeParseError& e) {
      result.rejects.push_back(
          {lineno, std::string(tree_error_name(e.kind())) + ": " + e.what(), line});
      continue;
    }
    result.records.push_back(std::move(record));
  }
  return result;
}

void write_tsv(std::span<const DatasetRecord> records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError(DatasetErrorKind::IoError, "cannot write: " + path);
  for (const DatasetRecord& r : records)
    out << r.domain << "\t" << r.utterance << "\t" << r.linearized_tree << "\n";
}

void write_qa_jsonl(std::span<const QaInstance> instances, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError(DatasetErrorKind::IoError, "cannot write: " + path);
  for (const QaInstance& q : instances) {
    nlohmann::ordered_json j;
    j["id"] = q.id;
    j["turn"] = q.turn;
    j["kind"] = qa_kind_name(q.kind);
    j["context"] = q.context;
    j["question"] = q.question;
    j["answer"] = q.answer;
    j["masked_question"] = q.masked_question;
    auto path_json = nlohmann::ordered_json::array();
    for (const PathStep& step : q.target_path) {
      nlohmann::ordered_json s;
      s["kind"] = path_kind_name(step.kind);
      s["label"] = step.label;
      s["value"] = step.value;
      path_json.push_back(std::move(s));
    }
    j["target_path"] = std::move(path_json);
    out << j.dump() << "\n";
  }
}

std::vector<QaInstance> read_qa_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(DatasetErrorKind::IoError, "cannot open: " + path);
  std::vector<QaInstance> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::collapse_whitespace(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(DatasetErrorKind::SchemaViolation,
                         "line " + std::to_string(lineno) + ": " + e.what());
    }
    auto require_string = [&](const char* key) -> std::string {
      if (!j.contains(key) || !j[key].is_string())
        throw DatasetError(DatasetErrorKind::SchemaViolation,
                           "line " + std::to_string(lineno) + ": missing string field " + key);
      return j[key].get<std::string>();
    };
    QaInstance q;
    q.id = require_string("id");
    if (!j.contains("turn") || !j["turn"].is_number_integer())
      throw DatasetError(DatasetErrorKind::SchemaViolation,
                         "line " + std::to_string(lineno) + ": missing integer field turn");
    q.turn = j["turn"].get<int>();
    if (!qa_kind_from_name(require_string("kind"), q.kind))
      throw DatasetError(DatasetErrorKind::SchemaViolation,
                         "line " + std::to_string(lineno) + ": unknown kind");
    q.context = require_string("context");
    q.question = require_string("question");
    q.answer = require_string("answer");
    q.masked_question = require_string("masked_question");
    if (!j.contains("target_path") || !j["target_path"].is_array())
      throw DatasetError(DatasetErrorKind::SchemaViolation,
                         "line " + std::to_string(lineno) + ": missing array field target_path");
    for (const auto& s : j["target_path"]) {
      PathStep step;
      if (!s.is_object() || !s.contains("kind") || !s.contains("label") || !s.contains("value") ||
          !path_kind_from_name(s["kind"].get<std::string>(), step.kind))
        throw DatasetError(DatasetErrorKind::SchemaViolation,
                           "line " + std::to_string(lineno) + ": bad target_path step");
      step.label = s["label"].get<std::string>();
      step.value = s["value"].get<std::string>();
      q.target_path.push_back(std::move(step));
    }
    out.push_back(std::move(q));
  }
  return out;
}

void write_hypotheses(std::span<const HypothesisRow> rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError(DatasetErrorKind::IoError, "cannot write: " + path);
  for (const HypothesisRow& row : rows) {
    out << row.domain << "\t" << row.utterance << "\t";
    if (row.result.ok()) {
      out << serialize_linearized(*row.result.tree);
    } else {
      out << "!ERROR:"
          << (row.result.error ? recon_reason_name(row.result.error->reason) : "MalformedAnswer");
    }
    out << "\n";
  }
}

std::vector<HypothesisRow> read_hypotheses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(DatasetErrorKind::IoError, "cannot open: " + path);
  std::vector<HypothesisRow> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols = text::split(line, "\t");
    if (cols.size() != 3)
      throw DatasetError(DatasetErrorKind::ColumnCountMismatch,
                         "line " + std::to_string(lineno) + ": expected 3 columns");
    HypothesisRow row;
    row.domain = cols[0];
    row.utterance = cols[1];
    if (cols[2].rfind("!ERROR:", 0) == 0) {
      ReconReason reason = ReconReason::MalformedAnswer;
      recon_reason_from_name(cols[2].substr(7), reason);
      row.result.error = ReconstructionError{reason, std::nullopt, ""};
    } else {
      try {
        ParseTree tree = parse_linearized(cols[2]);
        tree.domain = row.domain;
        tree.utterance = row.utterance;
        row.result.tree = std::move(tree);
      } catch (const TreeParseError& e) {
        throw DatasetError(DatasetErrorKind::SchemaViolation,
                           "line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<DatasetRecord> sample_spis(std::span<const DatasetRecord> corpus, int k,
                                       uint64_t seed) {
  if (k < 1) k = 1;
  std::vector<std::set<std::string>> labels(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    ParseTree tree = corpus[i].parse();
    collect_labels(tree.root, labels[i]);
  }
  std::vector<size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::map<std::string, int> counts;
  std::vector<bool> keep(corpus.size(), false);
  for (size_t i : order) {
    bool needed = false;
    for (const std::string& label : labels[i])
      if (counts[label] < k) {
        needed = true;
        break;
      }
    if (!needed) continue;
    keep[i] = true;
    for (const std::string& label : labels[i]) ++counts[label];
  }
  std::vector<DatasetRecord> out;
  for (size_t i = 0; i < corpus.size(); ++i)
    if (keep[i]) out.push_back(corpus[i]);
  return out;
}

std::vector<DomainStats> corpus_stats(std::span<const DatasetRecord> records,
                                      const Lexicon& lexicon) {
  std::map<std::string, std::vector<ParseTree>> by_domain;
  std::vector<std::string> domain_order;
  for (const DatasetRecord& r : records) {
    if (!by_domain.count(r.domain)) domain_order.push_back(r.domain);
    by_domain[r.domain].push_back(r.parse());
  }
  std::vector<DomainStats> out;
  for (const std::string& domain : domain_order) {
    const std::vector<ParseTree>& trees = by_domain[domain];
    DomainStats stats;
    stats.domain = domain;
    stats.instances = static_cast<int>(trees.size());
    Ontology ontology = extract_ontology(trees);
    stats.intents = static_cast<int>(ontology.intents().size());
    stats.slots = static_cast<int>(ontology.slots().size());
    long long depth_sum = 0;
    long long question_sum = 0;
    int flat = 0;
    GenOptions opts;
    opts.metadata = false;  // question count does not depend on context
    opts.state = false;
    for (const ParseTree& tree : trees) {
      TreeStats ts = compute_stats(tree);
      depth_sum += ts.depth;
      if (ts.is_flat) ++flat;
      question_sum += static_cast<long long>(generate_multiturn(tree, ontology, lexicon, opts).size());
    }
    if (!trees.empty()) {
      stats.flat_pct = 100.0 * flat / trees.size();
      stats.mean_depth = static_cast<double>(depth_sum) / trees.size();
      stats.mean_questions = static_cast<double>(question_sum) / trees.size();
    }
    out.push_back(std::move(stats));
  }
  return out;
}

std::string format_stats(std::span<const DomainStats> stats) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out << "domain\t#inst\t#int\t#slt\tflat%\tdepth\t#q/inst\n";
  for (const DomainStats& s : stats) {
    out << s.domain << "\t" << s.instances << "\t" << s.intents << "\t" << s.slots << "\t";
    out.precision(0);
    out << s.flat_pct << "%\t";
    out.precision(2);
    out << s.mean_depth << "\t" << s.mean_questions << "\n";
  }
  return out.str();
}

}  // namespace topqa
