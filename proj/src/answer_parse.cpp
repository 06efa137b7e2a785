#include "topqa/answer_parse.hpp"

#include <algorithm>

#include "topqa/text.hpp"

namespace topqa {

namespace {

std::string norm(const std::string& s) { return text::collapse_whitespace(s); }

ReconstructionError err(ReconReason reason, const std::string& detail) {
  return ReconstructionError{reason, std::nullopt, detail};
}

// Splits "a; b; c" into trimmed values; empty pieces dropped.
std::vector<std::string> split_values(const std::string& s) {
  std::vector<std::string> out;
  for (const std::string& piece : text::split(s, ";")) {
    std::string v = norm(piece);
    if (!v.empty()) out.push_back(std::move(v));
  }
  return out;
}

struct BNode {
  NodeKind kind = NodeKind::Slot;
  std::string label;
  std::string value;      // slot surface text
  std::string sub_utt;    // intent anchor
  std::vector<int> kids;
  bool has_value = false;
  bool slots_answered = false;
  bool nested_resolved = false;
};

}  // namespace

const char* recon_reason_name(ReconReason reason) {
  switch (reason) {
    case ReconReason::InvalidEntity: return "InvalidEntity";
    case ReconReason::UnlocatableSubutterance: return "UnlocatableSubutterance";
    case ReconReason::MalformedAnswer: return "MalformedAnswer";
    case ReconReason::ContradictoryAnswers: return "ContradictoryAnswers";
  }
  return "Unknown";
}

bool recon_reason_from_name(const std::string& name, ReconReason& out) {
  for (ReconReason r : {ReconReason::InvalidEntity, ReconReason::UnlocatableSubutterance,
                        ReconReason::MalformedAnswer, ReconReason::ContradictoryAnswers}) {
    if (name == recon_reason_name(r)) {
      out = r;
      return true;
    }
  }
  return false;
}

struct MultiturnBuilder::Impl {
  const Naturalizer* nat;
  std::string domain;
  std::string utterance;
  std::vector<BNode> arena;
  int root = -1;
  std::optional<ReconstructionError> poisoned;
  int turn_count = 0;

  int new_node(BNode node) {
    arena.push_back(std::move(node));
    return static_cast<int>(arena.size()) - 1;
  }

  // First preorder intent node with the given anchor that has not had its
  // slots answered yet.
  int find_intent(int at, const std::string& anchor) {
    if (at < 0) return -1;
    BNode& n = arena[at];
    if (n.kind == NodeKind::Intent && !n.slots_answered && n.sub_utt == anchor) return at;
    for (int kid : n.kids) {
      int hit = find_intent(kid, anchor);
      if (hit >= 0) return hit;
    }
    return -1;
  }

  // First preorder valued slot leaf with the given text whose nested-intent
  // question has not been resolved yet.
  int find_leaf(int at, const std::string& value) {
    if (at < 0) return -1;
    BNode& n = arena[at];
    if (n.kind == NodeKind::Slot && n.has_value && !n.nested_resolved && n.value == value)
      return at;
    for (int kid : n.kids) {
      int hit = find_leaf(kid, value);
      if (hit >= 0) return hit;
    }
    return -1;
  }

  FeedOutcome fail(ReconReason reason, const std::string& detail) {
    FeedOutcome out;
    out.error = ReconstructionError{reason, turn_count, detail};
    if (!poisoned) poisoned = out.error;
    return out;
  }

  FeedOutcome feed(const QaInstance& q, const std::string& raw_answer) {
    ++turn_count;
    if (poisoned) {
      FeedOutcome out;
      out.error = poisoned;
      return out;
    }
    std::string answer = norm(raw_answer);
    switch (q.kind) {
      case QaKind::RootIntent: return feed_root(answer);
      case QaKind::Slots: return feed_slots(q, answer);
      case QaKind::SlotValue: return feed_slot_value(q, answer);
      case QaKind::NestedIntent: return feed_nested(q, answer);
      default:
        return fail(ReconReason::MalformedAnswer,
                    std::string("unexpected question kind in multi-turn transcript: ") +
                        qa_kind_name(q.kind));
    }
  }

  FeedOutcome feed_root(const std::string& answer) {
    if (root >= 0) return fail(ReconReason::ContradictoryAnswers, "second root intent answer");
    DenaturalizeResult r = nat->denaturalize_intent(answer);
    if (r.status != PhraseLookup::Ok)
      return fail(ReconReason::InvalidEntity, "not an intent phrase: " + answer);
    BNode node;
    node.kind = NodeKind::Intent;
    node.label = r.label;
    node.sub_utt = norm(utterance);
    root = new_node(std::move(node));
    FeedOutcome out;
    out.intent_label = r.label;
    return out;
  }

  FeedOutcome feed_slots(const QaInstance& q, const std::string& answer) {
    if (q.target_path.empty() || q.target_path.back().kind != PathKind::Intent)
      return fail(ReconReason::MalformedAnswer, "slots question without an intent anchor");
    const PathStep& anchor = q.target_path.back();
    int at = find_intent(root, norm(anchor.value));
    if (at < 0)
      return fail(ReconReason::ContradictoryAnswers,
                  "no open intent for sub-utterance: " + anchor.value);
    if (!anchor.label.empty() && arena[at].label != anchor.label)
      return fail(ReconReason::ContradictoryAnswers,
                  "intent at " + anchor.value + " is " + arena[at].label + ", question targeted " +
                      anchor.label);
    arena[at].slots_answered = true;
    FeedOutcome out;
    if (answer == "none" || answer.empty()) return out;
    for (const std::string& piece : text::split(answer, ",")) {
      std::string phrase = norm(piece);
      if (phrase.empty()) continue;
      DenaturalizeResult r = nat->denaturalize_slot(phrase);
      if (r.status != PhraseLookup::Ok)
        return fail(ReconReason::InvalidEntity, "not a slot phrase: " + phrase);
      if (std::find(out.slot_labels.begin(), out.slot_labels.end(), r.label) !=
          out.slot_labels.end())
        continue;
      BNode slot;
      slot.kind = NodeKind::Slot;
      slot.label = r.label;
      int idx = new_node(std::move(slot));  // may reallocate the arena
      arena[at].kids.push_back(idx);
      out.slot_labels.push_back(r.label);
    }
    return out;
  }

  FeedOutcome feed_slot_value(const QaInstance& q, const std::string& answer) {
    if (q.target_path.size() < 2 || q.target_path.back().kind != PathKind::Slot)
      return fail(ReconReason::MalformedAnswer, "slot-value question without a slot target");
    const PathStep& slot_step = q.target_path.back();
    const PathStep& anchor = q.target_path[q.target_path.size() - 2];
    // The target is the intent with this anchor holding an unfilled
    // placeholder for the slot.
    auto [at, placeholder] = find_placeholder(root, norm(anchor.value), anchor.label,
                                              slot_step.label);
    if (at < 0)
      return fail(ReconReason::ContradictoryAnswers,
                  "slot " + slot_step.label + " was never announced under " + anchor.value);
    FeedOutcome out;
    std::vector<std::string> values = split_values(answer);
    if (values.empty() || answer == "none") {
      // Nothing to attach; the placeholder stays childless.
      arena[placeholder].has_value = true;
      arena[placeholder].nested_resolved = true;
      return out;
    }
    arena[placeholder].value = values[0];
    arena[placeholder].has_value = true;
    out.values.emplace_back(slot_step.label, values[0]);
    // Extra values become sibling slots right after the placeholder.
    for (size_t i = 1; i < values.size(); ++i) {
      BNode slot;
      slot.kind = NodeKind::Slot;
      slot.label = slot_step.label;
      slot.value = values[i];
      slot.has_value = true;
      int idx = new_node(std::move(slot));  // may reallocate the arena
      auto& kids = arena[at].kids;
      auto pos = std::find(kids.begin(), kids.end(), placeholder);
      size_t insert_at = static_cast<size_t>(pos - kids.begin()) + i;
      kids.insert(kids.begin() + insert_at, idx);
      out.values.emplace_back(slot_step.label, values[i]);
    }
    return out;
  }

  FeedOutcome feed_nested(const QaInstance& q, const std::string& answer) {
    if (q.target_path.empty() || q.target_path.back().kind != PathKind::Slot)
      return fail(ReconReason::MalformedAnswer, "nested-intent question without a slot target");
    const PathStep& slot_step = q.target_path.back();
    int at = find_leaf(root, norm(slot_step.value));
    if (at < 0)
      return fail(ReconReason::UnlocatableSubutterance,
                  "no leaf with text: " + slot_step.value);
    arena[at].nested_resolved = true;
    FeedOutcome out;
    if (answer == "none" || answer.empty()) return out;
    DenaturalizeResult r = nat->denaturalize_intent(answer);
    if (r.status != PhraseLookup::Ok)
      return fail(ReconReason::InvalidEntity, "not an intent phrase: " + answer);
    BNode node;
    node.kind = NodeKind::Intent;
    node.label = r.label;
    node.sub_utt = arena[at].value;
    int idx = new_node(std::move(node));  // may reallocate the arena
    arena[at].kids.push_back(idx);
    out.nested_intent_label = r.label;
    return out;
  }

  std::pair<int, int> find_placeholder(int node, const std::string& anchor,
                                       const std::string& label, const std::string& slot_label) {
    if (node < 0) return {-1, -1};
    BNode& n = arena[node];
    if (n.kind == NodeKind::Intent && n.sub_utt == anchor &&
        (label.empty() || n.label == label)) {
      for (int kid : n.kids) {
        BNode& k = arena[kid];
        if (k.kind == NodeKind::Slot && k.label == slot_label && !k.has_value && k.kids.empty())
          return {node, kid};
      }
    }
    for (int kid : n.kids) {
      auto hit = find_placeholder(kid, anchor, label, slot_label);
      if (hit.first >= 0) return hit;
    }
    return {-1, -1};
  }

  TreeNode export_node(int at) const {
    const BNode& n = arena[at];
    TreeNode out;
    out.kind = n.kind;
    out.label = n.label;
    out.sub_utterance = n.kind == NodeKind::Intent ? n.sub_utt : n.value;
    bool has_intent_kid = false;
    for (int kid : n.kids)
      if (arena[kid].kind == NodeKind::Intent) has_intent_kid = true;
    if (n.kind == NodeKind::Slot && n.has_value && !has_intent_kid) {
      for (const std::string& w : text::split_words(n.value)) {
        TreeNode tok;
        tok.kind = NodeKind::Token;
        tok.label = w;
        out.children.push_back(std::move(tok));
      }
    }
    for (int kid : n.kids) out.children.push_back(export_node(kid));
    return out;
  }
};

MultiturnBuilder::MultiturnBuilder(const Naturalizer& naturalizer, std::string domain,
                                   std::string utterance)
    : impl_(std::make_unique<Impl>()) {
  impl_->nat = &naturalizer;
  impl_->domain = std::move(domain);
  impl_->utterance = std::move(utterance);
}

MultiturnBuilder::~MultiturnBuilder() = default;
MultiturnBuilder::MultiturnBuilder(MultiturnBuilder&&) noexcept = default;
MultiturnBuilder& MultiturnBuilder::operator=(MultiturnBuilder&&) noexcept = default;

FeedOutcome MultiturnBuilder::feed(const QaInstance& question, const std::string& answer) {
  return impl_->feed(question, answer);
}

ReconResult MultiturnBuilder::finish() const {
  ReconResult result;
  if (impl_->poisoned) {
    result.error = impl_->poisoned;
    return result;
  }
  if (impl_->root < 0) {
    result.error = err(ReconReason::MalformedAnswer, "no root intent established");
    return result;
  }
  ParseTree tree;
  tree.root = impl_->export_node(impl_->root);
  tree.domain = impl_->domain;
  tree.utterance = impl_->utterance;
  result.tree = std::move(tree);
  return result;
}

ReconResult parse_multiturn_answers(
    std::span<const std::pair<QaInstance, std::string>> transcript, const Ontology& ontology,
    const Lexicon& lexicon, const std::string& domain, const std::string& utterance) {
  Naturalizer nat(ontology, lexicon);
  std::string dom = domain;
  std::string utt = utterance;
  if (!transcript.empty() && !transcript.front().first.target_path.empty()) {
    const PathStep& anchor = transcript.front().first.target_path.front();
    if (dom.empty()) dom = anchor.label;
    if (utt.empty()) utt = anchor.value;
  }
  MultiturnBuilder builder(nat, dom, utt);
  for (const auto& [question, answer] : transcript) {
    FeedOutcome outcome = builder.feed(question, answer);
    if (outcome.error) {
      ReconResult result;
      result.error = outcome.error;
      return result;
    }
  }
  return builder.finish();
}

namespace {

struct StSentence {
  std::string intent_phrase;
  std::string anchor;  // empty for the first sentence
  std::vector<std::pair<std::string, std::vector<std::string>>> clauses;  // (slot phrase, values)
};

// "S is V" / "S are V1; V2" with the first " is " / " are " as the split.
std::optional<std::pair<std::string, std::vector<std::string>>> parse_clause(
    const std::string& clause) {
  size_t is_at = clause.find(" is ");
  size_t are_at = clause.find(" are ");
  size_t at = std::min(is_at, are_at);
  if (at == std::string::npos) return std::nullopt;
  size_t skip = (at == is_at) ? 4 : 5;
  std::string slot = norm(clause.substr(0, at));
  std::vector<std::string> values = split_values(clause.substr(at + skip));
  if (slot.empty() || values.empty()) return std::nullopt;
  return std::make_pair(slot, values);
}

std::optional<ReconstructionError> parse_st_sentence(const std::string& sentence, bool first,
                                                     StSentence& out) {
  std::string body = norm(sentence);
  if (!body.empty() && body.back() == '.') body.pop_back();
  std::string rest;
  if (first) {
    const std::string prefix = "The user intended to ";
    if (body.rfind(prefix, 0) != 0)
      return err(ReconReason::MalformedAnswer, "answer does not open with an intent sentence");
    rest = body.substr(prefix.size());
  } else {
    const std::string prefix = "The intent for ``";
    if (body.rfind(prefix, 0) != 0)
      return err(ReconReason::MalformedAnswer, "expected an intent sentence: " + body);
    size_t close = body.find("''", prefix.size());
    if (close == std::string::npos)
      return err(ReconReason::MalformedAnswer, "unterminated quote in: " + body);
    out.anchor = body.substr(prefix.size(), close - prefix.size());
    rest = body.substr(close + 2);
    if (rest.rfind(" is ", 0) != 0)
      return err(ReconReason::MalformedAnswer, "expected `` is '' after quote: " + body);
    rest = rest.substr(4);
    if (rest.rfind("to ", 0) == 0) rest = rest.substr(3);
  }
  size_t where_at = rest.find(", where ");
  std::string intent_part = where_at == std::string::npos ? rest : rest.substr(0, where_at);
  out.intent_phrase = norm(intent_part);
  if (out.intent_phrase.empty())
    return err(ReconReason::MalformedAnswer, "empty intent phrase in: " + body);
  if (where_at != std::string::npos) {
    std::string clause_part = rest.substr(where_at + 8);
    for (const std::string& clause : text::split(clause_part, " and ")) {
      auto parsed = parse_clause(clause);
      if (!parsed)
        return err(ReconReason::MalformedAnswer, "clause without is/are: " + clause);
      out.clauses.push_back(std::move(*parsed));
    }
  }
  return std::nullopt;
}

}  // namespace

ReconResult parse_singleturn_answer(const std::string& answer, const std::string& utterance,
                                    const Ontology& ontology, const Lexicon& lexicon,
                                    const std::string& domain) {
  ReconResult result;
  Naturalizer nat(ontology, lexicon);
  std::string body = norm(answer);
  if (body.empty()) {
    result.error = err(ReconReason::MalformedAnswer, "empty answer");
    return result;
  }

  // Later sentences always open with the quoted-anchor template, so split on
  // that delimiter rather than on bare periods (values may contain periods).
  std::vector<std::string> sentences;
  const std::string delim = ". The intent for ``";
  size_t pos = 0;
  while (true) {
    size_t next = body.find(delim, pos);
    if (next == std::string::npos) {
      sentences.push_back(body.substr(pos));
      break;
    }
    sentences.push_back(body.substr(pos, next - pos + 1));
    pos = next + 2;  // keep "The intent for ``"
  }

  std::vector<StSentence> parsed(sentences.size());
  for (size_t i = 0; i < sentences.size(); ++i) {
    if (auto e = parse_st_sentence(sentences[i], i == 0, parsed[i])) {
      result.error = e;
      result.error->turn = 1;
      return result;
    }
  }

  // Build with the same arena machinery used for multi-turn feeds.
  MultiturnBuilder builder(nat, domain, utterance);
  QaInstance root_q;
  root_q.kind = QaKind::RootIntent;
  root_q.target_path.push_back({PathKind::Root, domain, utterance});

  auto apply_sentence = [&](const StSentence& s, const QaInstance& intent_probe,
                            const std::string& anchor) -> std::optional<ReconstructionError> {
    FeedOutcome got = builder.feed(intent_probe, s.intent_phrase);
    if (got.error) return got.error;
    std::string intent_label =
        got.intent_label.empty() ? got.nested_intent_label : got.intent_label;
    if (s.clauses.empty()) return std::nullopt;
    // Announce the slots, then their values, mirroring the multi-turn feeds.
    QaInstance slots_q;
    slots_q.kind = QaKind::Slots;
    slots_q.target_path.push_back({PathKind::Root, domain, utterance});
    slots_q.target_path.push_back({PathKind::Intent, intent_label, norm(anchor)});
    std::vector<std::string> slot_phrases;
    for (const auto& [slot, _] : s.clauses) slot_phrases.push_back(slot);
    FeedOutcome announced = builder.feed(slots_q, text::join(slot_phrases, ", "));
    if (announced.error) return announced.error;
    for (const auto& [slot_phrase, values] : s.clauses) {
      DenaturalizeResult r = nat.denaturalize_slot(slot_phrase);
      if (r.status != PhraseLookup::Ok)
        return err(ReconReason::InvalidEntity, "not a slot phrase: " + slot_phrase);
      QaInstance value_q;
      value_q.kind = QaKind::SlotValue;
      value_q.target_path = slots_q.target_path;
      value_q.target_path.push_back({PathKind::Slot, r.label, ""});
      FeedOutcome valued = builder.feed(value_q, text::join(values, "; "));
      if (valued.error) return valued.error;
    }
    return std::nullopt;
  };

  if (auto e = apply_sentence(parsed[0], root_q, utterance)) {
    result.error = e;
    result.error->turn = 1;
    return result;
  }
  for (size_t i = 1; i < parsed.size(); ++i) {
    QaInstance nested_q;
    nested_q.kind = QaKind::NestedIntent;
    nested_q.target_path.push_back({PathKind::Root, domain, utterance});
    nested_q.target_path.push_back({PathKind::Slot, "", parsed[i].anchor});
    if (auto e = apply_sentence(parsed[i], nested_q, parsed[i].anchor)) {
      result.error = e;
      result.error->turn = 1;
      return result;
    }
  }
  return builder.finish();
}

}  // namespace topqa
