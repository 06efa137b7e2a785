#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "topqa/answer_parse.hpp"
#include "topqa/generate.hpp"
#include "topqa/ontology.hpp"
#include "topqa/qa.hpp"
#include "topqa/tree.hpp"

namespace topqa {

class DialogueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the oracle when an instance's target path does not address a
// node of the gold tree.
class PathNotInGold : public DialogueError {
 public:
  using DialogueError::DialogueError;
};

// Anything that can answer questions. Implementations that are safe to call
// from several threads at once say so; the driver then fans a wave out.
class Answerer {
 public:
  virtual ~Answerer() = default;
  virtual std::string answer(const QaInstance& question) = 0;
  virtual bool concurrent_safe() const { return false; }
};

// Ground-truth answer for one instance, computed from the gold tree. Throws
// PathNotInGold when the path cannot be walked.
std::string oracle_answer(const QaInstance& instance, const ParseTree& gold,
                          const Lexicon& lexicon);

class OracleAnswerer : public Answerer {
 public:
  OracleAnswerer(const ParseTree& gold, const Ontology& ontology, const Lexicon& lexicon)
      : gold_(&gold), nat_(ontology, lexicon) {}
  std::string answer(const QaInstance& question) override;
  bool concurrent_safe() const override { return true; }

 private:
  const ParseTree* gold_;
  Naturalizer nat_;
};

// Oracle that garbles each answer with probability p: intent/slot phrases
// are swapped for a uniformly chosen wrong ontology phrase, nested-intent
// answers flip to/from "none". Deterministic under a fixed seed; answers
// must therefore be requested in a deterministic order (single-flight).
class NoisyAnswerer : public Answerer {
 public:
  NoisyAnswerer(const ParseTree& gold, const Ontology& ontology, const Lexicon& lexicon,
                double p, uint64_t seed);
  // Restricts corruption to the given kinds (default: all kinds).
  void restrict_kinds(std::set<QaKind> kinds) { kinds_ = std::move(kinds); }
  std::string answer(const QaInstance& question) override;

 private:
  ParseTree gold_;
  const Ontology* ontology_;
  Naturalizer nat_;
  double p_;
  std::mt19937_64 rng_;
  std::set<QaKind> kinds_;
};

// Bridges to an external process speaking one JSON object per line:
// {"id","context","question"} on its stdin, {"id","answer"} on its stdout.
class PipeAnswerer : public Answerer {
 public:
  explicit PipeAnswerer(const std::string& command);
  ~PipeAnswerer() override;
  std::string answer(const QaInstance& question) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct TranscriptEntry {
  QaInstance instance;
  std::string answer;
  int wave = 0;
};

struct DriveOptions {
  GenOptions gen;
  int budget = 64;  // max questions issued per utterance
};

struct DriveResult {
  // Entries in canonical order (the order static generation uses); the wave
  // field records the issue schedule.
  std::vector<TranscriptEntry> transcript;
  bool budget_exceeded = false;
  // First answer that could not be incorporated; the dialogue stops there.
  std::optional<ReconstructionError> error;
  // Tree rebuilt from the transcript (absent when error is set).
  ReconResult reconstruction;
};

// Runs the multi-turn dialogue for one utterance against an answerer.
// Questions are built only from answers received so far; all questions whose
// prerequisites are satisfied go out in the same wave.
DriveResult drive_multiturn(const std::string& utterance, const std::string& domain,
                            const Ontology& ontology, const Lexicon& lexicon, Answerer& answerer,
                            const DriveOptions& opts = {});

}  // namespace topqa
