#include "topqa/canonical.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

#include <nlohmann/json.hpp>

#include "topqa/text.hpp"

namespace topqa {

namespace {

// Tokenizes a canonical phrase; ';' becomes its own token so value lists can
// be walked ("mushrooms; olives" -> mushrooms ; olives).
std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  for (std::string w : text::split_words(s)) {
    size_t semis = 0;
    while (w.size() > 1 && w.back() == ';') {
      w.pop_back();
      ++semis;
    }
    if (w == ";") {
      out.push_back(";");
      continue;
    }
    out.push_back(w);
    for (size_t i = 0; i < semis; ++i) out.push_back(";");
  }
  return out;
}

std::vector<TreeNode> token_nodes(const std::string& value) {
  std::vector<TreeNode> out;
  for (const std::string& w : text::split_words(value)) {
    TreeNode tok;
    tok.kind = NodeKind::Token;
    tok.label = w;
    out.push_back(std::move(tok));
  }
  return out;
}

// Node kinds alternate below the ORDER root exactly as the bracketed parser
// would assign them.
NodeKind flip(NodeKind k) { return k == NodeKind::Intent ? NodeKind::Slot : NodeKind::Intent; }

struct Parser {
  const CanonicalGrammar& grammar;
  const std::vector<std::string>& tokens;

  bool words_match(const std::vector<std::string>& words, size_t pos) const {
    for (size_t i = 0; i < words.size(); ++i)
      if (pos + i >= tokens.size() || tokens[pos + i] != words[i]) return false;
    return true;
  }

  // Tries to read one vocabulary value for any of `labels` starting at pos,
  // longest match first. The decoration, when present, hangs off the last
  // token of the surface form.
  std::vector<std::pair<size_t, std::pair<std::string, std::string>>> value_matches(
      const std::vector<std::string>& labels, const std::string& decoration, size_t pos) const {
    std::vector<std::pair<size_t, std::pair<std::string, std::string>>> out;
    for (size_t len = 4; len >= 1; --len) {
      if (pos + len > tokens.size()) continue;
      std::vector<std::string> words(tokens.begin() + pos, tokens.begin() + pos + len);
      if (std::any_of(words.begin(), words.end(),
                      [](const std::string& w) { return w == ";"; }))
        continue;
      if (!decoration.empty()) {
        std::string& last = words.back();
        if (last.size() <= decoration.size() ||
            last.compare(last.size() - decoration.size(), decoration.size(), decoration) != 0)
          continue;
        last = last.substr(0, last.size() - decoration.size());
      }
      std::string value = text::join(words, " ");
      for (const std::string& label : labels) {
        auto it = grammar.vocab.find(label);
        if (it != it_end() && it->second.count(value)) {
          out.push_back({pos + len, {label, value}});
          break;
        }
      }
    }
    return out;
  }

  std::map<std::string, std::set<std::string>>::const_iterator it_end() const {
    return grammar.vocab.end();
  }

  // Matches segments[si..] against tokens[pos..]; children collected into
  // `kids`. Returns true when the whole token stream is consumed.
  bool match(const OrderTemplate& tmpl, size_t si, size_t pos, NodeKind child_kind,
             std::vector<TreeNode>& kids) const {
    if (si == tmpl.segments.size()) return pos == tokens.size();
    const GrammarSegment& seg = tmpl.segments[si];
    size_t checkpoint = kids.size();

    auto try_skip = [&]() -> bool {
      kids.resize(checkpoint);
      return seg.optional && match(tmpl, si + 1, pos, child_kind, kids);
    };

    switch (seg.type) {
      case GrammarSegment::Type::Literal: {
        std::vector<std::string> words = text::split_words(seg.literal);
        if (words_match(words, pos) && match(tmpl, si + 1, pos + words.size(), child_kind, kids))
          return true;
        return try_skip();
      }
      case GrammarSegment::Type::Value: {
        std::vector<std::string> prefix = text::split_words(seg.prefix);
        std::vector<std::string> suffix = text::split_words(seg.suffix);
        if (words_match(prefix, pos)) {
          size_t at = pos + prefix.size();
          std::vector<std::pair<std::string, std::string>> taken;
          if (match_values(tmpl, si, seg, at, suffix, child_kind, kids, taken)) return true;
        }
        return try_skip();
      }
      case GrammarSegment::Type::Group: {
        std::vector<std::string> prefix = text::split_words(seg.prefix);
        if (words_match(prefix, pos)) {
          size_t at = pos + prefix.size();
          TreeNode group;
          group.kind = child_kind;
          group.label = seg.group_label;
          if (match_group(tmpl, si, seg, 0, at, child_kind, group, kids)) return true;
        }
        return try_skip();
      }
    }
    return false;
  }

  bool match_group(const OrderTemplate& tmpl, size_t si, const GrammarSegment& seg,
                   size_t child_at, size_t pos, NodeKind child_kind, TreeNode& group,
                   std::vector<TreeNode>& kids) const {
    if (child_at == seg.child_slots.size()) {
      kids.push_back(group);
      if (match(tmpl, si + 1, pos, child_kind, kids)) return true;
      kids.pop_back();
      return false;
    }
    const std::string label = seg.child_slots[child_at];
    for (const auto& [end, hit] : value_matches({label}, "", pos)) {
      TreeNode child;
      child.kind = flip(child_kind);
      child.label = hit.first;
      child.children = token_nodes(hit.second);
      group.children.push_back(std::move(child));
      if (match_group(tmpl, si, seg, child_at + 1, end, child_kind, group, kids)) return true;
      group.children.pop_back();
    }
    return false;
  }

  bool match_values(const OrderTemplate& tmpl, size_t si, const GrammarSegment& seg, size_t pos,
                    const std::vector<std::string>& suffix, NodeKind child_kind,
                    std::vector<TreeNode>& kids,
                    std::vector<std::pair<std::string, std::string>>& taken) const {
    for (const auto& [end, hit] : value_matches(seg.slots, seg.decoration, pos)) {
      taken.push_back(hit);
      // Continue the list when a ';' follows.
      if (seg.list && end < tokens.size() && tokens[end] == ";") {
        if (match_values(tmpl, si, seg, end + 1, suffix, child_kind, kids, taken)) return true;
      }
      if (words_match(suffix, end)) {
        size_t checkpoint = kids.size();
        for (const auto& [label, value] : taken) {
          TreeNode node;
          node.kind = child_kind;
          if (seg.wrap.empty()) {
            node.label = label;
            node.children = token_nodes(value);
          } else {
            node.label = seg.wrap;
            TreeNode inner;
            inner.kind = flip(child_kind);
            inner.label = label;
            inner.children = token_nodes(value);
            node.children.push_back(std::move(inner));
          }
          kids.push_back(std::move(node));
        }
        if (match(tmpl, si + 1, end + suffix.size(), child_kind, kids)) return true;
        kids.resize(checkpoint);
      }
      taken.pop_back();
    }
    return false;
  }
};

GrammarSegment parse_segment(const nlohmann::json& j) {
  GrammarSegment seg;
  if (j.contains("literal")) {
    seg.type = GrammarSegment::Type::Literal;
    seg.literal = j.at("literal").get<std::string>();
  } else if (j.contains("group")) {
    seg.type = GrammarSegment::Type::Group;
    seg.group_label = j.at("group").get<std::string>();
    for (const auto& c : j.at("children")) seg.child_slots.push_back(c.get<std::string>());
  } else {
    seg.type = GrammarSegment::Type::Value;
    seg.slots.push_back(j.at("slot").get<std::string>());
    for (const auto& a : j.value("alt", nlohmann::json::array()))
      seg.slots.push_back(a.get<std::string>());
  }
  seg.prefix = j.value("prefix", "");
  seg.suffix = j.value("suffix", "");
  seg.wrap = j.value("wrap", "");
  seg.decoration = j.value("decoration", "");
  seg.list = j.value("list", false);
  seg.optional = j.value("optional", false);
  return seg;
}

}  // namespace

const OrderTemplate* CanonicalGrammar::find_order(const std::string& label) const {
  for (const OrderTemplate& t : orders)
    if (t.label == label) return &t;
  return nullptr;
}

CanonicalGrammar load_grammar(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw CanonicalError(CanonicalErrorKind::NotInCanonicalFragment,
                         "cannot open grammar file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw CanonicalError(CanonicalErrorKind::NotInCanonicalFragment,
                         "bad grammar json in " + path + ": " + e.what());
  }
  CanonicalGrammar g;
  g.domain = doc.value("domain", "");
  g.root_label = doc.value("root_label", "ORDER");
  for (const auto& order : doc.value("orders", nlohmann::json::array())) {
    OrderTemplate tmpl;
    tmpl.label = order.at("label").get<std::string>();
    for (const auto& seg : order.value("segments", nlohmann::json::array()))
      tmpl.segments.push_back(parse_segment(seg));
    g.orders.push_back(std::move(tmpl));
  }
  nlohmann::json vocab = doc.value("vocab", nlohmann::json::object());
  for (const auto& [label, values] : vocab.items())
    for (const auto& v : values) g.vocab[label].insert(v.get<std::string>());
  return g;
}

std::string render_canonical(const TreeNode& order_subtree, const CanonicalGrammar& grammar) {
  const OrderTemplate* tmpl = grammar.find_order(order_subtree.label);
  if (!tmpl)
    throw CanonicalError(CanonicalErrorKind::UnknownOrderType,
                         "no template for order type: " + order_subtree.label);
  std::vector<std::string> words;
  for (const GrammarSegment& seg : tmpl->segments) {
    switch (seg.type) {
      case GrammarSegment::Type::Literal:
        words.push_back(seg.literal);
        break;
      case GrammarSegment::Type::Value: {
        std::vector<std::string> values;
        for (const TreeNode& child : order_subtree.children) {
          if (!seg.wrap.empty()) {
            if (child.label != seg.wrap) continue;
            for (const TreeNode& inner : child.children)
              if (std::find(seg.slots.begin(), seg.slots.end(), inner.label) != seg.slots.end())
                values.push_back(leaf_text(inner) + seg.decoration);
          } else if (std::find(seg.slots.begin(), seg.slots.end(), child.label) !=
                     seg.slots.end()) {
            std::string v = leaf_text(child);
            if (!seg.decoration.empty()) {
              // Decorate the last word of the surface form.
              v += seg.decoration;
            }
            values.push_back(std::move(v));
          }
        }
        if (values.empty()) {
          if (seg.optional) continue;
          throw CanonicalError(CanonicalErrorKind::MissingMandatorySlot,
                               order_subtree.label + " is missing " + text::join(seg.slots, "/"));
        }
        if (!seg.prefix.empty()) words.push_back(seg.prefix);
        words.push_back(text::join(values, "; "));
        if (!seg.suffix.empty()) words.push_back(seg.suffix);
        break;
      }
      case GrammarSegment::Type::Group: {
        std::vector<std::string> values;
        for (const TreeNode& child : order_subtree.children) {
          if (child.label != seg.group_label) continue;
          std::vector<std::string> parts;
          for (const std::string& slot : seg.child_slots)
            for (const TreeNode& inner : child.children)
              if (inner.label == slot) parts.push_back(leaf_text(inner));
          values.push_back(text::join(parts, " "));
        }
        if (values.empty()) {
          if (seg.optional) continue;
          throw CanonicalError(CanonicalErrorKind::MissingMandatorySlot,
                               order_subtree.label + " is missing " + seg.group_label);
        }
        if (!seg.prefix.empty()) words.push_back(seg.prefix);
        words.push_back(text::join(values, "; "));
        if (!seg.suffix.empty()) words.push_back(seg.suffix);
        break;
      }
    }
  }
  return text::join(words, " ");
}

TreeNode parse_canonical(const std::string& canonical_text, const CanonicalGrammar& grammar) {
  std::vector<std::string> tokens = tokenize(text::collapse_whitespace(canonical_text));
  if (tokens.empty())
    throw CanonicalError(CanonicalErrorKind::NotInCanonicalFragment, "empty canonical text");
  Parser parser{grammar, tokens};
  for (const OrderTemplate& tmpl : grammar.orders) {
    std::vector<TreeNode> kids;
    // Orders sit directly under the Intent root, so they are Slot nodes and
    // their children are Intents.
    if (parser.match(tmpl, 0, 0, NodeKind::Intent, kids)) {
      TreeNode order;
      order.kind = NodeKind::Slot;
      order.label = tmpl.label;
      order.children = std::move(kids);
      return order;
    }
  }
  throw CanonicalError(CanonicalErrorKind::NotInCanonicalFragment,
                       "not in the canonical fragment: " + canonical_text);
}

std::vector<TreeNode> parse_canonical_list(const std::string& text_in,
                                           const CanonicalGrammar& grammar) {
  std::vector<std::string> fragments = text::split(text::collapse_whitespace(text_in), "; ");
  size_t n = fragments.size();
  // fits[i][j]: fragments[i..j] parse as one order.
  std::vector<std::vector<std::optional<TreeNode>>> fits(
      n, std::vector<std::optional<TreeNode>>(n));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      std::vector<std::string> piece(fragments.begin() + i, fragments.begin() + j + 1);
      try {
        fits[i][j] = parse_canonical(text::join(piece, "; "), grammar);
      } catch (const CanonicalError&) {
      }
    }
  }
  // Greedy-with-backtracking cover of [0, n).
  std::vector<TreeNode> out;
  std::vector<std::pair<size_t, size_t>> stack;
  size_t at = 0;
  size_t take = 0;
  // take = extra fragments beyond the shortest at each position.
  while (at < n) {
    bool advanced = false;
    for (size_t j = at + take; j < n; ++j) {
      if (fits[at][j]) {
        stack.push_back({at, j});
        at = j + 1;
        take = 0;
        advanced = true;
        break;
      }
    }
    if (advanced) continue;
    if (stack.empty())
      throw CanonicalError(CanonicalErrorKind::NotInCanonicalFragment,
                           "cannot split into canonical orders: " + text_in);
    auto [i, j] = stack.back();
    stack.pop_back();
    at = i;
    take = j - i + 1;
  }
  for (const auto& [i, j] : stack) out.push_back(*fits[i][j]);
  return out;
}

std::vector<QaInstance> generate_pizza_qa(const ParseTree& tree, PizzaMode mode,
                                          const CanonicalGrammar& grammar,
                                          const GenOptions& opts) {
  std::string said = "A user said: ``" + tree.utterance + "''";
  std::vector<std::string> canon;
  for (const TreeNode& child : tree.root.children)
    if (child.kind != NodeKind::Token) canon.push_back(render_canonical(child, grammar));

  std::vector<QaInstance> out;
  auto finish = [&](QaInstance& q, const std::string& interrogative, const std::string& tail,
                    const std::string& answer, int turn) {
    q.kind = QaKind::Order;
    q.turn = turn;
    q.id = opts.id_prefix + ":" + std::to_string(turn);
    q.context = said;
    q.question = interrogative;
    q.answer = answer;
    q.target_path.push_back({PathKind::Root, tree.domain, tree.utterance});
    if (opts.msp)
      q.masked_question = said + " The user ordered " + opts.mask_token + tail + ".";
    out.push_back(q);
  };

  if (mode == PizzaMode::SingleTurn) {
    QaInstance q;
    std::string answer =
        canon.empty() ? "none" : "The user ordered " + text::join(canon, "; ");
    finish(q, "What orders did the user place?", "", answer, 1);
    return out;
  }

  for (size_t k = 0; k <= canon.size(); ++k) {
    std::vector<std::string> prior(canon.begin(), canon.begin() + k);
    std::string tail =
        prior.empty() ? "" : " in addition to " + text::join(prior, " and ");
    std::string answer = k < canon.size() ? canon[k] : "none";
    QaInstance q;
    finish(q, "What order did the user place" + tail + "?", tail, answer,
           static_cast<int>(k) + 1);
  }
  return out;
}

namespace {

ReconResult order_tree_from(std::vector<TreeNode> orders, const CanonicalGrammar& grammar,
                            const std::string& domain, const std::string& utterance) {
  ReconResult result;
  ParseTree tree;
  tree.root.kind = NodeKind::Intent;
  tree.root.label = grammar.root_label;
  tree.root.children = std::move(orders);
  tree.domain = domain.empty() ? grammar.domain : domain;
  tree.utterance = utterance;
  result.tree = std::move(tree);
  return result;
}

}  // namespace

ReconResult parse_pizza_transcript(std::span<const std::pair<QaInstance, std::string>> transcript,
                                   const CanonicalGrammar& grammar, const std::string& domain,
                                   const std::string& utterance) {
  ReconResult result;
  std::vector<TreeNode> orders;
  int turn = 0;
  for (const auto& [question, raw] : transcript) {
    ++turn;
    std::string answer = text::collapse_whitespace(raw);
    if (answer == "none") break;
    try {
      orders.push_back(parse_canonical(answer, grammar));
    } catch (const CanonicalError& e) {
      result.error = ReconstructionError{ReconReason::InvalidEntity, turn, e.what()};
      return result;
    }
  }
  std::string utt = utterance;
  if (utt.empty() && !transcript.empty()) utt = transcript.front().first.utterance();
  return order_tree_from(std::move(orders), grammar, domain, utt);
}

ReconResult parse_pizza_st_answer(const std::string& answer, const CanonicalGrammar& grammar,
                                  const std::string& domain, const std::string& utterance) {
  ReconResult result;
  std::string body = text::collapse_whitespace(answer);
  const std::string prefix = "The user ordered ";
  if (body == "none") return order_tree_from({}, grammar, domain, utterance);
  if (body.rfind(prefix, 0) != 0) {
    result.error = ReconstructionError{ReconReason::MalformedAnswer, 1,
                                       "answer does not open with the order template"};
    return result;
  }
  body = body.substr(prefix.size());
  try {
    return order_tree_from(parse_canonical_list(body, grammar), grammar, domain, utterance);
  } catch (const CanonicalError& e) {
    result.error = ReconstructionError{ReconReason::InvalidEntity, 1, e.what()};
    return result;
  }
}

}  // namespace topqa
