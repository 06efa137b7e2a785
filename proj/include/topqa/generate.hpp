#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "topqa/ontology.hpp"
#include "topqa/qa.hpp"
#include "topqa/tree.hpp"

namespace topqa {

enum class GenErrorKind { LabelNotInOntology, NoTemplateForKind };

class GenerationError : public std::runtime_error {
 public:
  GenerationError(GenErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  GenErrorKind kind() const { return kind_; }

 private:
  GenErrorKind kind_;
};

struct GenOptions {
  bool metadata = true;      // domain metadata sentences
  bool state = true;         // declarative state sentences
  bool msp = false;          // fill masked_question
  std::string mask_token = "[MASK]";
  bool force_nested = false; // ask nested-intent questions on every slot
  std::string id_prefix = "q";
};

// One intent level of an in-progress dialogue: the address of the intent
// node, the open assertion for this level, and the closed assertions of the
// levels above it (root first).
struct IntentContext {
  std::vector<PathStep> path;          // Root step ... ends with this Intent step
  std::string intent_label;
  std::string base;                    // e.g. "The user's intent is to get directions"
  std::vector<std::string> ancestors;  // closed sentences of enclosing levels
};

IntentContext make_root_context(const std::string& intent_label, const std::string& domain,
                                const std::string& utterance, const Naturalizer& nat);
// Context for an intent nested under `value` of slot `slot_label` inside
// `parent`.
IntentContext make_child_context(const IntentContext& parent, const std::string& slot_label,
                                 const std::string& value, const std::string& intent_label,
                                 const Naturalizer& nat);

// Question builders shared by static generation and the dialogue driver.
// They fill everything except answer/id/turn.
QaInstance root_intent_question(const Ontology& ontology, const Naturalizer& nat,
                                const std::string& domain, const std::string& utterance,
                                const GenOptions& opts);
QaInstance slots_question(const IntentContext& ctx, const Ontology& ontology,
                          const Naturalizer& nat, const std::string& utterance,
                          const GenOptions& opts);
QaInstance slot_value_question(const IntentContext& ctx, const std::string& slot_label,
                               const Naturalizer& nat, const std::string& utterance,
                               const GenOptions& opts);
QaInstance nested_intent_question(const IntentContext& ctx, const std::string& slot_label,
                                  const std::string& value, const Ontology& ontology,
                                  const Naturalizer& nat, const std::string& utterance,
                                  const GenOptions& opts);

// Multi-turn reduction of one tree, answers included, in canonical order
// (per intent node: slots, slot values, nested-intent probes, then child
// intents in surface order). Throws GenerationError when the tree uses a
// label or an edge the ontology does not admit.
std::vector<QaInstance> generate_multiturn(const ParseTree& tree, const Ontology& ontology,
                                           const Lexicon& lexicon, const GenOptions& opts = {});

// Whole tree as one QA pair. The answer describes the decoupled tree, one
// sentence per intent node in preorder.
QaInstance generate_singleturn(const ParseTree& tree, const Ontology& ontology,
                               const Lexicon& lexicon, const GenOptions& opts = {});

// The single-turn answer text alone (used by the gold-tree oracle).
std::string singleturn_answer(const ParseTree& tree, const Naturalizer& nat);

// Rewrites the pair as a declarative sentence with the answer masked out;
// context is preserved, only the interrogative is replaced. Requires state
// sentences for Slots/SlotValue instances (NoTemplateForKind otherwise).
QaInstance to_msp(const QaInstance& instance, const std::string& mask_token = "[MASK]");

}  // namespace topqa
