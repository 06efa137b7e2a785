#include "topqa/generate.hpp"

#include <algorithm>
#include <map>

#include "topqa/text.hpp"

namespace topqa {

namespace {

const std::string kEmpty;

std::string quoted(const std::string& s) { return "``" + s + "''"; }

// "A user said, ``U''" opens root-level questions; later turns drop the
// comma. The closed-world order questions use a colon.
std::string said_sentence(const std::string& utterance, bool root_level) {
  return root_level ? "A user said, " + quoted(utterance) : "A user said " + quoted(utterance);
}

std::string assemble(const std::vector<std::string>& parts) {
  std::vector<std::string> nonempty;
  for (const std::string& p : parts)
    if (!p.empty()) nonempty.push_back(p);
  return text::join(nonempty, " ");
}

std::vector<std::string> phrases_of(const std::vector<std::string>& labels,
                                    const Naturalizer& nat, bool plural) {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (const std::string& label : labels) out.push_back(nat.phrase(label, plural));
  return out;
}

std::string state_text(const IntentContext& ctx, const std::string& current) {
  std::vector<std::string> sentences = ctx.ancestors;
  sentences.push_back(current + ".");
  return text::join(sentences, " ");
}

// `masked_state` carries the state sentences the masked form keeps: for
// Slots/SlotValue the declarative extends the innermost assertion, so that
// sentence is not repeated in front of it.
void fill_common(QaInstance& q, const std::string& metadata, const std::string& said,
                 const std::string& state, const std::string& interrogative,
                 const std::string& declarative, const std::string& masked_state,
                 const GenOptions& opts) {
  std::vector<std::string> parts;
  if (opts.metadata) parts.push_back(metadata);
  parts.push_back(said);
  if (opts.state) parts.push_back(state);
  q.context = assemble(parts);
  q.question = interrogative;
  if (opts.msp && !declarative.empty()) {
    std::string decl = declarative;
    text::replace_first(decl, "{MASK}", opts.mask_token);
    std::vector<std::string> masked_parts;
    if (opts.metadata) masked_parts.push_back(metadata);
    masked_parts.push_back(said);
    if (opts.state) masked_parts.push_back(masked_state);
    masked_parts.push_back(decl);
    q.masked_question = assemble(masked_parts);
  }
}

// Distinct slot-child labels in first-occurrence order.
std::vector<std::string> distinct_slot_labels(const TreeNode& intent_node) {
  std::vector<std::string> out;
  for (const TreeNode& child : intent_node.children) {
    if (child.kind != NodeKind::Slot) continue;
    if (std::find(out.begin(), out.end(), child.label) == out.end()) out.push_back(child.label);
  }
  return out;
}

struct StaticWalker {
  const Ontology& ontology;
  const Naturalizer& nat;
  const GenOptions& opts;
  const std::string& utterance;
  std::vector<QaInstance> out;

  void require_intent(const std::string& label) {
    if (!ontology.has_intent(label))
      throw GenerationError(GenErrorKind::LabelNotInOntology, "intent not in ontology: " + label);
  }

  void require_slot_edge(const std::string& intent, const std::string& slot) {
    const auto& admitted = ontology.slots_of(intent);
    if (std::find(admitted.begin(), admitted.end(), slot) == admitted.end())
      throw GenerationError(GenErrorKind::LabelNotInOntology,
                            "slot " + slot + " not admitted under " + intent);
  }

  void require_nested_edge(const std::string& slot, const std::string& intent) {
    if (opts.force_nested && ontology.has_intent(intent)) return;
    const auto& admitted = ontology.nested_intents_of(slot);
    if (std::find(admitted.begin(), admitted.end(), intent) == admitted.end())
      throw GenerationError(GenErrorKind::LabelNotInOntology,
                            "intent " + intent + " not admitted inside " + slot);
  }

  void walk_intent(const TreeNode& node, const IntentContext& ctx) {
    bool ask_slots = ontology.admits_slots(node.label);
    if (!ask_slots && node.has_slot_child())
      throw GenerationError(GenErrorKind::LabelNotInOntology,
                            "ontology admits no slots under " + node.label);
    if (ask_slots) {
      QaInstance q = slots_question(ctx, ontology, nat, utterance, opts);
      std::vector<std::string> labels = distinct_slot_labels(node);
      for (const std::string& s : labels) require_slot_edge(node.label, s);
      q.answer = labels.empty() ? "none" : text::join(phrases_of(labels, nat, false), ", ");
      out.push_back(std::move(q));

      for (const std::string& s : labels) {
        QaInstance sv = slot_value_question(ctx, s, nat, utterance, opts);
        std::vector<std::string> values;
        for (const TreeNode& child : node.children)
          if (child.kind == NodeKind::Slot && child.label == s)
            values.push_back(leaf_text(child));
        sv.answer = text::join(values, "; ");
        out.push_back(std::move(sv));
      }
    }

    // Children are visited grouped by slot label (first-occurrence order):
    // answers report values per slot, so a dialogue rebuilt from them can
    // only know this grouping, and the driver must emit the same sequence.
    std::vector<const TreeNode*> grouped;
    for (const std::string& s : distinct_slot_labels(node))
      for (const TreeNode& child : node.children)
        if (child.kind == NodeKind::Slot && child.label == s) grouped.push_back(&child);

    for (const TreeNode* child : grouped) {
      bool eligible = ontology.admits_nested(child->label) || opts.force_nested;
      const TreeNode* nested = nullptr;
      for (const TreeNode& grand : child->children)
        if (grand.kind == NodeKind::Intent) nested = &grand;
      if (nested) require_nested_edge(child->label, nested->label);
      if (!eligible) {
        if (nested)
          throw GenerationError(GenErrorKind::LabelNotInOntology,
                                "ontology admits no nested intent inside " + child->label);
        continue;
      }
      std::string value = leaf_text(*child);
      QaInstance ni =
          nested_intent_question(ctx, child->label, value, ontology, nat, utterance, opts);
      ni.answer = nested ? nat.phrase(nested->label) : "none";
      out.push_back(std::move(ni));
    }

    for (const TreeNode* child : grouped) {
      for (const TreeNode& grand : child->children) {
        if (grand.kind != NodeKind::Intent) continue;
        require_intent(grand.label);
        IntentContext sub =
            make_child_context(ctx, child->label, leaf_text(*child), grand.label, nat);
        walk_intent(grand, sub);
      }
    }
  }
};

// The text naming a node in the single-turn answer: the leaf-slot text of
// its subtree, or the raw token span when nothing survives decoupling (an
// intent holding all of its text directly).
std::string st_value(const TreeNode& node) {
  std::string dec = leaf_text(to_decoupled(node));
  return dec.empty() ? leaf_text(node) : dec;
}

// Clauses for one intent node of the single-turn answer. Slot groups are
// keyed and ordered by raw label; values within a group are sorted.
std::string st_clauses(const TreeNode& intent_node, const Naturalizer& nat) {
  std::map<std::string, std::vector<std::string>> groups;
  for (const TreeNode& child : intent_node.children)
    if (child.kind == NodeKind::Slot) groups[child.label].push_back(st_value(child));
  if (groups.empty()) return "";
  std::vector<std::string> rendered;
  for (auto& [label, values] : groups) {
    std::sort(values.begin(), values.end());
    if (values.size() == 1) {
      rendered.push_back(nat.phrase(label) + " is " + values[0]);
    } else {
      rendered.push_back(nat.phrase(label, true) + " are " + text::join(values, "; "));
    }
  }
  return ", where " + text::join(rendered, " and ");
}

// `anchor` is the value the parent sentence printed for this intent's slot,
// so later sentences quote exactly the text a reader (or parser) can find.
void st_sentences(const TreeNode& intent_node, const Naturalizer& nat, const std::string* anchor,
                  std::vector<std::string>& out) {
  std::string sentence;
  if (!anchor) {
    sentence = "The user intended to " + nat.phrase(intent_node.label);
  } else {
    sentence = "The intent for " + quoted(*anchor) + " is to " + nat.phrase(intent_node.label);
  }
  sentence += st_clauses(intent_node, nat);
  sentence += ".";
  out.push_back(std::move(sentence));
  for (const TreeNode& child : intent_node.children) {
    if (child.kind != NodeKind::Slot) continue;
    std::string value = st_value(child);
    for (const TreeNode& grand : child.children)
      if (grand.kind == NodeKind::Intent) st_sentences(grand, nat, &value, out);
  }
}

void check_labels(const TreeNode& node, const Ontology& ontology) {
  if (node.kind == NodeKind::Intent && !ontology.has_intent(node.label))
    throw GenerationError(GenErrorKind::LabelNotInOntology, "intent not in ontology: " + node.label);
  if (node.kind == NodeKind::Slot && !ontology.has_slot(node.label))
    throw GenerationError(GenErrorKind::LabelNotInOntology, "slot not in ontology: " + node.label);
  for (const TreeNode& child : node.children) check_labels(child, ontology);
}

}  // namespace

const char* qa_kind_name(QaKind kind) {
  switch (kind) {
    case QaKind::RootIntent: return "root_intent";
    case QaKind::Slots: return "slots";
    case QaKind::SlotValue: return "slot_value";
    case QaKind::NestedIntent: return "nested_intent";
    case QaKind::SingleTurn: return "single_turn";
    case QaKind::Order: return "order";
  }
  return "unknown";
}

bool qa_kind_from_name(const std::string& name, QaKind& out) {
  for (QaKind k : {QaKind::RootIntent, QaKind::Slots, QaKind::SlotValue, QaKind::NestedIntent,
                   QaKind::SingleTurn, QaKind::Order}) {
    if (name == qa_kind_name(k)) {
      out = k;
      return true;
    }
  }
  return false;
}

const std::string& QaInstance::utterance() const {
  return target_path.empty() ? kEmpty : target_path.front().value;
}

const std::string& QaInstance::domain() const {
  return target_path.empty() ? kEmpty : target_path.front().label;
}

IntentContext make_root_context(const std::string& intent_label, const std::string& domain,
                                const std::string& utterance, const Naturalizer& nat) {
  IntentContext ctx;
  ctx.path.push_back({PathKind::Root, domain, utterance});
  ctx.path.push_back({PathKind::Intent, intent_label, utterance});
  ctx.intent_label = intent_label;
  ctx.base = "The user's intent is to " + nat.phrase(intent_label);
  return ctx;
}

IntentContext make_child_context(const IntentContext& parent, const std::string& slot_label,
                                 const std::string& value, const std::string& intent_label,
                                 const Naturalizer& nat) {
  IntentContext ctx;
  ctx.path = parent.path;
  ctx.path.push_back({PathKind::Slot, slot_label, value});
  ctx.path.push_back({PathKind::Intent, intent_label, value});
  ctx.intent_label = intent_label;
  ctx.ancestors = parent.ancestors;
  ctx.ancestors.push_back(parent.base + ", and the " + nat.phrase(slot_label) + " is " + value +
                          ".");
  ctx.base = "The intent included in " + quoted(value) + " is " + nat.phrase(intent_label);
  return ctx;
}

QaInstance root_intent_question(const Ontology& ontology, const Naturalizer& nat,
                                const std::string& domain, const std::string& utterance,
                                const GenOptions& opts) {
  QaInstance q;
  q.kind = QaKind::RootIntent;
  q.target_path.push_back({PathKind::Root, domain, utterance});
  const auto& roots = ontology.root_intents().empty() ? ontology.intents()
                                                      : ontology.root_intents();
  std::string metadata =
      "A user may intend to " + text::natural_join(phrases_of(roots, nat, false), "or") + ".";
  fill_common(q, metadata, said_sentence(utterance, true), "", "What did the user intend to do?",
              "The user's intent is to {MASK}.", "", opts);
  return q;
}

QaInstance slots_question(const IntentContext& ctx, const Ontology& ontology,
                          const Naturalizer& nat, const std::string& utterance,
                          const GenOptions& opts) {
  QaInstance q;
  q.kind = QaKind::Slots;
  q.target_path = ctx.path;
  std::string metadata =
      "The slots for " + nat.phrase(ctx.intent_label) + " may be " +
      text::natural_join(phrases_of(ontology.slots_of(ctx.intent_label), nat, true), "and") + ".";
  fill_common(q, metadata, said_sentence(utterance, false), state_text(ctx, ctx.base),
              "What are the slots?", ctx.base + ", and the slot is {MASK}.",
              text::join(ctx.ancestors, " "), opts);
  return q;
}

QaInstance slot_value_question(const IntentContext& ctx, const std::string& slot_label,
                               const Naturalizer& nat, const std::string& utterance,
                               const GenOptions& opts) {
  QaInstance q;
  q.kind = QaKind::SlotValue;
  q.target_path = ctx.path;
  q.target_path.push_back({PathKind::Slot, slot_label, ""});
  std::string s = nat.phrase(slot_label);
  fill_common(q, "", said_sentence(utterance, false),
              state_text(ctx, ctx.base + ", and the slot is " + s), "What is the " + s + "?",
              ctx.base + ", and the " + s + " is {MASK}.", text::join(ctx.ancestors, " "), opts);
  return q;
}

QaInstance nested_intent_question(const IntentContext& ctx, const std::string& slot_label,
                                  const std::string& value, const Ontology& ontology,
                                  const Naturalizer& nat, const std::string& utterance,
                                  const GenOptions& opts) {
  QaInstance q;
  q.kind = QaKind::NestedIntent;
  q.target_path = ctx.path;
  q.target_path.push_back({PathKind::Slot, slot_label, value});
  std::string s = nat.phrase(slot_label);
  const auto& candidates = ontology.nested_intents_of(slot_label);
  std::string metadata;
  if (!candidates.empty()) {
    metadata = "The nested intent in " + s + " may be " +
               text::natural_join(phrases_of(candidates, nat, false), "and") + ".";
  }
  std::string state = state_text(ctx, ctx.base + ", and the " + s + " is " + value);
  fill_common(q, metadata, said_sentence(utterance, false), state,
              "Is there an intent included in ``" + value + "?''",
              "The intent included in " + quoted(value) + " is {MASK}.", state, opts);
  return q;
}

std::vector<QaInstance> generate_multiturn(const ParseTree& tree, const Ontology& ontology,
                                           const Lexicon& lexicon, const GenOptions& opts) {
  Naturalizer nat(ontology, lexicon);
  if (!ontology.has_intent(tree.root.label))
    throw GenerationError(GenErrorKind::LabelNotInOntology,
                          "intent not in ontology: " + tree.root.label);

  StaticWalker walker{ontology, nat, opts, tree.utterance, {}};
  QaInstance root = root_intent_question(ontology, nat, tree.domain, tree.utterance, opts);
  root.answer = nat.phrase(tree.root.label);
  walker.out.push_back(std::move(root));
  IntentContext ctx = make_root_context(tree.root.label, tree.domain, tree.utterance, nat);
  walker.walk_intent(tree.root, ctx);

  for (size_t i = 0; i < walker.out.size(); ++i) {
    walker.out[i].turn = static_cast<int>(i) + 1;
    walker.out[i].id = opts.id_prefix + ":" + std::to_string(i + 1);
  }
  return walker.out;
}

QaInstance generate_singleturn(const ParseTree& tree, const Ontology& ontology,
                               const Lexicon& lexicon, const GenOptions& opts) {
  Naturalizer nat(ontology, lexicon);
  check_labels(tree.root, ontology);

  QaInstance q;
  q.kind = QaKind::SingleTurn;
  q.turn = 1;
  q.id = opts.id_prefix + ":1";
  q.target_path.push_back({PathKind::Root, tree.domain, tree.utterance});

  std::string metadata =
      "All possible intents from a user are " +
      text::natural_join(phrases_of(ontology.intents(), nat, false), "and") +
      ", and slots could be " +
      text::natural_join(phrases_of(ontology.slots(), nat, true), "and") + ".";
  fill_common(q, metadata, said_sentence(tree.utterance, true), "",
              "What did the user intend to do?", "The user intended to {MASK}.", "", opts);

  q.answer = singleturn_answer(tree, nat);
  return q;
}

std::string singleturn_answer(const ParseTree& tree, const Naturalizer& nat) {
  std::vector<std::string> sentences;
  st_sentences(tree.root, nat, nullptr, sentences);
  return text::join(sentences, " ");
}

QaInstance to_msp(const QaInstance& instance, const std::string& mask_token) {
  QaInstance out = instance;
  std::string decl;
  std::string masked_context = instance.context;
  switch (instance.kind) {
    case QaKind::RootIntent:
      decl = "The user's intent is to " + mask_token + ".";
      break;
    case QaKind::SingleTurn:
      decl = "The user intended to " + mask_token + ".";
      break;
    case QaKind::NestedIntent: {
      if (instance.target_path.empty())
        throw GenerationError(GenErrorKind::NoTemplateForKind, "nested instance without path");
      decl = "The intent included in " + quoted(instance.target_path.back().value) + " is " +
             mask_token + ".";
      break;
    }
    case QaKind::Slots:
    case QaKind::SlotValue: {
      // The open assertion lives in the final state sentence of the context.
      size_t said = instance.context.rfind("A user said");
      size_t close = said == std::string::npos ? std::string::npos
                                               : instance.context.find("''", said);
      if (close == std::string::npos || close + 2 >= instance.context.size())
        throw GenerationError(GenErrorKind::NoTemplateForKind,
                              "state sentences required to build the declarative");
      std::string state = text::collapse_whitespace(instance.context.substr(close + 2));
      if (state.empty() || state.back() != '.')
        throw GenerationError(GenErrorKind::NoTemplateForKind,
                              "state sentences required to build the declarative");
      // Only the innermost assertion extends into the declarative; every
      // state sentence starts with "The ". That sentence is absorbed into
      // the declarative, so the masked context drops it.
      size_t last = state.rfind(". The ");
      std::string sentence = last == std::string::npos ? state : state.substr(last + 2);
      std::string ancestors =
          last == std::string::npos ? "" : state.substr(0, last + 1);
      masked_context = text::collapse_whitespace(instance.context.substr(0, close + 2) +
                                                 (ancestors.empty() ? "" : " " + ancestors));
      sentence.pop_back();
      if (instance.kind == QaKind::Slots) {
        decl = sentence + ", and the slot is " + mask_token + ".";
      } else {
        size_t mark = sentence.rfind(", and the slot is ");
        if (mark == std::string::npos)
          throw GenerationError(GenErrorKind::NoTemplateForKind,
                                "slot-value instance without slot state");
        std::string base = sentence.substr(0, mark);
        std::string slot = sentence.substr(mark + 18);
        decl = base + ", and the " + slot + " is " + mask_token + ".";
      }
      break;
    }
    case QaKind::Order: {
      std::string tail;
      size_t mark = instance.question.find(" in addition to ");
      if (mark != std::string::npos) {
        tail = instance.question.substr(mark, instance.question.size() - mark - 1);
      }
      decl = "The user ordered " + mask_token + tail + ".";
      break;
    }
  }
  out.masked_question = masked_context.empty() ? decl : masked_context + " " + decl;
  return out;
}

}  // namespace topqa
