#include "topqa/tree.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "topqa/text.hpp"

namespace topqa {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool has_intent_prefix(std::string_view label) { return label.rfind("IN:", 0) == 0; }
bool has_slot_prefix(std::string_view label) { return label.rfind("SL:", 0) == 0; }

struct Lexer {
  std::string_view s;
  size_t pos = 0;

  void skip_space() {
    while (pos < s.size() && is_space(s[pos])) ++pos;
  }
  bool eof() {
    skip_space();
    return pos >= s.size();
  }
  char peek() {
    skip_space();
    return s[pos];
  }
  // A run of non-space characters, stopping before brackets so that glued
  // closers like "Street]]]]" split into a word plus bracket tokens.
  std::string read_word() {
    skip_space();
    size_t start = pos;
    while (pos < s.size() && !is_space(s[pos]) && s[pos] != ']' && s[pos] != '[') ++pos;
    return std::string(s.substr(start, pos - start));
  }
};

NodeKind labeled_kind(const std::string& label, std::optional<NodeKind> parent, size_t at) {
  if (has_intent_prefix(label)) {
    if (parent && *parent == NodeKind::Intent)
      throw TreeParseError(TreeErrorKind::IllegalNesting, at,
                           "intent nested directly under intent: " + label);
    return NodeKind::Intent;
  }
  if (has_slot_prefix(label)) {
    if (!parent)
      throw TreeParseError(TreeErrorKind::RootNotIntent, at, "root node is a slot: " + label);
    if (*parent == NodeKind::Slot)
      throw TreeParseError(TreeErrorKind::IllegalNesting, at,
                           "slot nested directly under slot: " + label);
    return NodeKind::Slot;
  }
  // Bare labels alternate with depth; the root is always an intent.
  if (!parent) return NodeKind::Intent;
  return *parent == NodeKind::Intent ? NodeKind::Slot : NodeKind::Intent;
}

// Parses one "[LABEL ...]" node; the opening '[' is already consumed.
TreeNode parse_node(Lexer& lx, std::optional<NodeKind> parent) {
  size_t at = lx.pos;
  std::string label = lx.read_word();
  if (label.empty() || label == "IN:" || label == "SL:")
    throw TreeParseError(TreeErrorKind::EmptyNode, at, "node with empty label");

  TreeNode node;
  node.kind = labeled_kind(label, parent, at);
  node.label = std::move(label);
  while (true) {
    if (lx.eof())
      throw TreeParseError(TreeErrorKind::UnbalancedBrackets, lx.pos, "missing ']'");
    char c = lx.peek();
    if (c == ']') {
      ++lx.pos;
      return node;
    }
    if (c == '[') {
      ++lx.pos;
      node.children.push_back(parse_node(lx, node.kind));
    } else {
      TreeNode tok;
      tok.kind = NodeKind::Token;
      tok.label = lx.read_word();
      node.children.push_back(std::move(tok));
    }
  }
}

void serialize_node(const TreeNode& node, std::string& out) {
  if (node.kind == NodeKind::Token) {
    out.append(node.label);
    return;
  }
  out.push_back('[');
  out.append(node.label);
  for (const TreeNode& child : node.children) {
    out.push_back(' ');
    serialize_node(child, out);
  }
  out.append(" ]");
}

void collect_leaf_words(const TreeNode& node, std::vector<std::string>& out) {
  if (node.kind == NodeKind::Token) {
    out.push_back(node.label);
    return;
  }
  for (const TreeNode& child : node.children) collect_leaf_words(child, out);
}

std::string strip_trailing_punct(std::string w) {
  while (!w.empty()) {
    char c = w.back();
    if (c == '.' || c == ',' || c == '!' || c == '?' || c == ';') {
      w.pop_back();
    } else {
      break;
    }
  }
  return w;
}

void validate_node(const TreeNode& node, const TreeNode* parent, std::vector<std::string>& out) {
  switch (node.kind) {
    case NodeKind::Intent:
      if (has_slot_prefix(node.label))
        out.push_back("intent node with SL: label: " + node.label);
      if (parent && parent->kind == NodeKind::Intent)
        out.push_back("intent under intent: " + node.label);
      break;
    case NodeKind::Slot:
      if (has_intent_prefix(node.label))
        out.push_back("slot node with IN: label: " + node.label);
      if (!parent)
        out.push_back("slot at root: " + node.label);
      else if (parent->kind == NodeKind::Slot)
        out.push_back("slot under slot: " + node.label);
      break;
    case NodeKind::Token:
      if (!node.children.empty())
        out.push_back("token with children: " + node.label);
      break;
  }
  for (const TreeNode& child : node.children) validate_node(child, &node, out);
}

}  // namespace

bool TreeNode::has_intent_child() const {
  return std::any_of(children.begin(), children.end(),
                     [](const TreeNode& c) { return c.kind == NodeKind::Intent; });
}

bool TreeNode::has_slot_child() const {
  return std::any_of(children.begin(), children.end(),
                     [](const TreeNode& c) { return c.kind == NodeKind::Slot; });
}

bool operator==(const TreeNode& a, const TreeNode& b) {
  return a.kind == b.kind && a.label == b.label && a.children == b.children;
}

const char* tree_error_name(TreeErrorKind kind) {
  switch (kind) {
    case TreeErrorKind::UnbalancedBrackets: return "UnbalancedBrackets";
    case TreeErrorKind::RootNotIntent: return "RootNotIntent";
    case TreeErrorKind::EmptyNode: return "EmptyNode";
    case TreeErrorKind::IllegalNesting: return "IllegalNesting";
  }
  return "Unknown";
}

TreeNode parse_linearized_node(std::string_view s) {
  Lexer lx{s};
  if (lx.eof())
    throw TreeParseError(TreeErrorKind::UnbalancedBrackets, 0, "empty input");
  if (lx.peek() != '[')
    throw TreeParseError(TreeErrorKind::UnbalancedBrackets, lx.pos, "expected '['");
  ++lx.pos;
  TreeNode root = parse_node(lx, std::nullopt);
  if (!lx.eof())
    throw TreeParseError(TreeErrorKind::UnbalancedBrackets, lx.pos,
                         "trailing content after root node");
  return root;
}

ParseTree parse_linearized(std::string_view s) {
  ParseTree tree;
  tree.root = parse_linearized_node(s);
  return tree;
}

std::string serialize_linearized(const TreeNode& node) {
  std::string out;
  serialize_node(node, out);
  return out;
}

std::string serialize_linearized(const ParseTree& tree) { return serialize_linearized(tree.root); }

std::string normalize_linearized(std::string_view s) {
  return serialize_linearized(parse_linearized_node(s));
}

TreeNode to_decoupled(const TreeNode& node) {
  TreeNode out;
  out.kind = node.kind;
  out.label = node.label;
  out.sub_utterance = node.sub_utterance;
  bool keep_tokens = node.kind == NodeKind::Slot && !node.has_intent_child();
  for (const TreeNode& child : node.children) {
    if (child.kind == NodeKind::Token) {
      if (keep_tokens) out.children.push_back(child);
    } else {
      out.children.push_back(to_decoupled(child));
    }
  }
  return out;
}

ParseTree to_decoupled(const ParseTree& tree) {
  ParseTree out;
  out.root = to_decoupled(tree.root);
  out.utterance = tree.utterance;
  out.domain = tree.domain;
  return out;
}

int label_depth(const TreeNode& node) {
  if (node.kind == NodeKind::Token) return 0;
  int deepest = 0;
  for (const TreeNode& child : node.children) deepest = std::max(deepest, label_depth(child));
  return 1 + deepest;
}

TreeStats compute_stats(const ParseTree& tree) {
  TreeStats stats;
  stats.depth = label_depth(tree.root);
  stats.is_flat = stats.depth <= 2;
  stats.length = text::word_count(tree.utterance);
  return stats;
}

std::string leaf_text(const TreeNode& node) {
  std::vector<std::string> words;
  collect_leaf_words(node, words);
  return text::join(words, " ");
}

bool check_alignment(const ParseTree& tree) {
  std::vector<std::string> leaves;
  collect_leaf_words(tree.root, leaves);
  std::vector<std::string> words = text::split_words(tree.utterance);
  size_t i = 0;
  for (const std::string& w : words) {
    if (i == leaves.size()) break;
    if (w == leaves[i] || strip_trailing_punct(w) == leaves[i]) ++i;
  }
  return i == leaves.size();
}

std::vector<std::string> validate_tree(const ParseTree& tree) {
  std::vector<std::string> out;
  if (tree.root.kind != NodeKind::Intent) out.push_back("root is not an intent");
  validate_node(tree.root, nullptr, out);
  return out;
}

}  // namespace topqa
