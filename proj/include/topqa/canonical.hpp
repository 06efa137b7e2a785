#pragma once

#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "topqa/answer_parse.hpp"
#include "topqa/generate.hpp"
#include "topqa/qa.hpp"
#include "topqa/tree.hpp"

namespace topqa {

enum class CanonicalErrorKind { UnknownOrderType, MissingMandatorySlot, NotInCanonicalFragment };

class CanonicalError : public std::runtime_error {
 public:
  CanonicalError(CanonicalErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  CanonicalErrorKind kind() const { return kind_; }

 private:
  CanonicalErrorKind kind_;
};

// One piece of an order template: a literal word, a value slot (optionally
// prefixed/suffixed/decorated, possibly a "; "-joined list, possibly wrapped
// in an extra node such as a negation), or a compound group whose children
// render in a fixed order.
struct GrammarSegment {
  enum class Type { Literal, Value, Group };
  Type type = Type::Value;
  std::string literal;
  std::vector<std::string> slots;        // acceptable labels (alternatives)
  std::string group_label;
  std::vector<std::string> child_slots;  // group children, render order
  std::string prefix;
  std::string suffix;
  std::string wrap;        // wrap each value in this label
  std::string decoration;  // surface suffix, e.g. "-sized"
  bool list = false;
  bool optional = false;
};

struct OrderTemplate {
  std::string label;
  std::vector<GrammarSegment> segments;
};

// Declarative closed-world paraphrase grammar. Parsing relies on the
// per-slot vocabularies: the controlled fragment is exactly what the
// templates generate over those values.
struct CanonicalGrammar {
  std::string domain;
  std::string root_label = "ORDER";
  std::vector<OrderTemplate> orders;
  std::map<std::string, std::set<std::string>> vocab;

  const OrderTemplate* find_order(const std::string& label) const;
};

CanonicalGrammar load_grammar(const std::string& path);

// Canonical phrase for one order subtree, e.g. "two large pizza in the
// everything style". Throws CanonicalError.
std::string render_canonical(const TreeNode& order_subtree, const CanonicalGrammar& grammar);

// Inverse of render_canonical over the grammar's fragment.
TreeNode parse_canonical(const std::string& canonical_text, const CanonicalGrammar& grammar);

// Splits "c1; c2; c3" into orders; needed because "; " also joins value
// lists inside one order.
std::vector<TreeNode> parse_canonical_list(const std::string& text,
                                           const CanonicalGrammar& grammar);

enum class PizzaMode { SingleTurn, MultiTurn };

// Closed-world QA over an order tree. Multi-turn asks one question per
// order, listing prior answers, and ends with a turn answered "none";
// single-turn compresses everything into one pair.
std::vector<QaInstance> generate_pizza_qa(const ParseTree& tree, PizzaMode mode,
                                          const CanonicalGrammar& grammar,
                                          const GenOptions& opts = {});

// Rebuilds the order tree from a multi-turn transcript (answers parsed until
// the terminal "none") or a single-turn answer.
ReconResult parse_pizza_transcript(std::span<const std::pair<QaInstance, std::string>> transcript,
                                   const CanonicalGrammar& grammar, const std::string& domain = "",
                                   const std::string& utterance = "");
ReconResult parse_pizza_st_answer(const std::string& answer, const CanonicalGrammar& grammar,
                                  const std::string& domain = "",
                                  const std::string& utterance = "");

}  // namespace topqa
