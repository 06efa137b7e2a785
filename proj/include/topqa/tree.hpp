#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace topqa {

enum class NodeKind { Intent, Slot, Token };

// One node of a hierarchical intent/slot parse. Intent and Slot nodes carry a
// label ("IN:GET_DIRECTIONS", "SL:DESTINATION", or a bare symbol whose kind is
// fixed by its depth); Token nodes carry one word of surface text in `label`.
struct TreeNode {
  NodeKind kind = NodeKind::Intent;
  std::string label;
  std::vector<TreeNode> children;
  // Surface text this node was anchored to during answer-driven
  // reconstruction; empty for trees parsed from the linearized format.
  std::string sub_utterance;

  bool is_leaf() const { return children.empty(); }
  bool has_intent_child() const;
  bool has_slot_child() const;

  friend bool operator==(const TreeNode& a, const TreeNode& b);
};

struct ParseTree {
  TreeNode root;
  std::string utterance;
  std::string domain;
};

struct TreeStats {
  // Count of labeled (Intent/Slot) nodes on the deepest root-to-leaf label
  // path. Token nodes do not count. Note: inferred definition; the source
  // datasets do not ship one.
  int depth = 0;
  // True iff no Intent occurs below a Slot, equivalently depth <= 2.
  bool is_flat = true;
  // Whitespace-delimited word count of the utterance.
  int length = 0;
};

enum class TreeErrorKind { UnbalancedBrackets, RootNotIntent, EmptyNode, IllegalNesting };

class TreeParseError : public std::runtime_error {
 public:
  TreeParseError(TreeErrorKind kind, size_t position, const std::string& message)
      : std::runtime_error(message), kind_(kind), position_(position) {}
  TreeErrorKind kind() const { return kind_; }
  size_t position() const { return position_; }

 private:
  TreeErrorKind kind_;
  size_t position_;
};

const char* tree_error_name(TreeErrorKind kind);

// Parses the bracketed linearized format: "[LABEL child child ...]".
// Unbracketed words become Token leaves; kind comes from the IN:/SL: prefix
// when present, otherwise from alternation (root is an Intent, Intent
// children are Slots, Slot children are Intents). Throws TreeParseError.
ParseTree parse_linearized(std::string_view s);
TreeNode parse_linearized_node(std::string_view s);

// Canonical serialization: every bracket and label is a token separated by
// single spaces, e.g. "[IN:X [SL:Y a b ] ]". parse_linearized inverts it.
std::string serialize_linearized(const TreeNode& node);
std::string serialize_linearized(const ParseTree& tree);

// Normalizes any parseable linearized string to the canonical spacing
// produced by serialize_linearized.
std::string normalize_linearized(std::string_view s);

// Removes Token nodes that are not under a leaf slot (a Slot with no Intent
// child). Tokens directly under Intents, and under Slots that contain a
// nested Intent, are dropped.
TreeNode to_decoupled(const TreeNode& node);
ParseTree to_decoupled(const ParseTree& tree);

TreeStats compute_stats(const ParseTree& tree);
int label_depth(const TreeNode& node);

// Concatenated Token leaf text of the subtree, left to right, space-joined.
std::string leaf_text(const TreeNode& node);

// True when the tree's Token leaves form a subsequence of the utterance's
// word stream. Trailing .,!?; on utterance words is ignored so that
// annotations that strip final punctuation still align.
bool check_alignment(const ParseTree& tree);

// Structural validation of an already-built tree (kind alternation, label
// prefixes). Returns a diagnostic per violation; empty means valid.
std::vector<std::string> validate_tree(const ParseTree& tree);

}  // namespace topqa
