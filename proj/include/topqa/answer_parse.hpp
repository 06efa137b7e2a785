#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topqa/ontology.hpp"
#include "topqa/qa.hpp"
#include "topqa/tree.hpp"

namespace topqa {

enum class ReconReason { InvalidEntity, UnlocatableSubutterance, MalformedAnswer, ContradictoryAnswers };

const char* recon_reason_name(ReconReason reason);
bool recon_reason_from_name(const std::string& name, ReconReason& out);

struct ReconstructionError {
  ReconReason reason = ReconReason::MalformedAnswer;
  std::optional<int> turn;
  std::string detail;
};

// A whole-or-nothing outcome: any error voids the tree.
struct ReconResult {
  std::optional<ParseTree> tree;
  std::optional<ReconstructionError> error;

  bool ok() const { return tree.has_value(); }
};

// What one answer established; consumed by the dialogue driver to schedule
// follow-up questions.
struct FeedOutcome {
  std::optional<ReconstructionError> error;
  std::string intent_label;                                  // RootIntent
  std::vector<std::string> slot_labels;                      // Slots
  std::vector<std::pair<std::string, std::string>> values;   // SlotValue: (slot, value)
  std::string nested_intent_label;                           // NestedIntent, empty for "none"
};

// Incremental tree builder fed one (question, answer) pair at a time.
// Anchors resolve by sub-utterance text: first preorder match that has not
// been consumed yet. Errors are sticky; once poisoned every feed fails.
class MultiturnBuilder {
 public:
  MultiturnBuilder(const Naturalizer& naturalizer, std::string domain, std::string utterance);
  ~MultiturnBuilder();
  MultiturnBuilder(MultiturnBuilder&&) noexcept;
  MultiturnBuilder& operator=(MultiturnBuilder&&) noexcept;

  FeedOutcome feed(const QaInstance& question, const std::string& answer);
  ReconResult finish() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Replays a full transcript through MultiturnBuilder.
ReconResult parse_multiturn_answers(
    std::span<const std::pair<QaInstance, std::string>> transcript, const Ontology& ontology,
    const Lexicon& lexicon, const std::string& domain = "", const std::string& utterance = "");

// Rebuilds a tree from a single-turn answer: the first sentence gives the
// root intent and its "where S is V" clauses, each later sentence expands
// the leaf whose text it quotes.
ReconResult parse_singleturn_answer(const std::string& answer, const std::string& utterance,
                                    const Ontology& ontology, const Lexicon& lexicon,
                                    const std::string& domain = "");

}  // namespace topqa
