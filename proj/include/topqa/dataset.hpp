#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "topqa/answer_parse.hpp"
#include "topqa/ontology.hpp"
#include "topqa/qa.hpp"
#include "topqa/tree.hpp"

namespace topqa {

enum class DatasetErrorKind { IoError, ColumnCountMismatch, SchemaViolation };

class DatasetError : public std::runtime_error {
 public:
  DatasetError(DatasetErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  DatasetErrorKind kind() const { return kind_; }

 private:
  DatasetErrorKind kind_;
};

struct DatasetRecord {
  std::string domain;
  std::string utterance;
  std::string linearized_tree;

  ParseTree parse() const;
};

struct TsvReject {
  int line = 0;
  std::string reason;
  std::string content;
};

struct TsvResult {
  std::vector<DatasetRecord> records;
  std::vector<TsvReject> rejects;
};

// Reads "domain<TAB>utterance<TAB>linearized_tree" rows (an optional header
// row is skipped). Malformed rows land in `rejects` with their line numbers
// rather than being dropped.
TsvResult read_tsv(const std::string& path);
void write_tsv(std::span<const DatasetRecord> records, const std::string& path);

// One JSON object per line: {id, turn, kind, context, question, answer,
// masked_question, target_path}. write∘read∘write is byte-stable.
void write_qa_jsonl(std::span<const QaInstance> instances, const std::string& path);
std::vector<QaInstance> read_qa_jsonl(const std::string& path);

// Hypothesis rows: domain, utterance, then either a linearized tree or
// "!ERROR:<reason>" for failed reconstructions.
struct HypothesisRow {
  std::string domain;
  std::string utterance;
  ReconResult result;
};

void write_hypotheses(std::span<const HypothesisRow> rows, const std::string& path);
std::vector<HypothesisRow> read_hypotheses(const std::string& path);

// Few-shot split: a deterministic greedy pass over a seeded shuffle keeps a
// record when some label in it is still short of k occurrences. Every intent
// and slot label ends up covered min(k, availability) times. Returned in
// corpus order.
std::vector<DatasetRecord> sample_spis(std::span<const DatasetRecord> corpus, int k,
                                       uint64_t seed);

struct DomainStats {
  std::string domain;
  int instances = 0;
  int intents = 0;
  int slots = 0;
  double flat_pct = 0.0;
  double mean_depth = 0.0;
  double mean_questions = 0.0;  // multi-turn questions per utterance
};

std::vector<DomainStats> corpus_stats(std::span<const DatasetRecord> records,
                                      const Lexicon& lexicon);
std::string format_stats(std::span<const DomainStats> stats);

}  // namespace topqa
