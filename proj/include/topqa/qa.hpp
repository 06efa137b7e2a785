#pragma once

#include <string>
#include <vector>

namespace topqa {

// Question kinds. The first four drive the per-node multi-turn reduction,
// SingleTurn compresses a whole tree into one pair, Order is the
// closed-world canonical variant (one question per order).
enum class QaKind { RootIntent, Slots, SlotValue, NestedIntent, SingleTurn, Order };

const char* qa_kind_name(QaKind kind);
bool qa_kind_from_name(const std::string& name, QaKind& out);

enum class PathKind { Root, Intent, Slot };

// One step of a tree address. The leading Root step carries the domain in
// `label` and the utterance in `value`; Intent steps carry the sub-utterance
// they were anchored to; Slot steps carry the slot value once known.
struct PathStep {
  PathKind kind = PathKind::Root;
  std::string label;
  std::string value;

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

struct QaInstance {
  std::string id;
  int turn = 1;
  QaKind kind = QaKind::RootIntent;
  // Everything shown to a model before the question: domain metadata, the
  // quoted utterance, and the declarative state sentences, space-joined.
  std::string context;
  // The interrogative sentence alone.
  std::string question;
  std::string answer;
  // Masked-span form: the context with the interrogative replaced by a
  // declarative sentence containing exactly one mask token. Empty unless
  // masked output was requested.
  std::string masked_question;
  std::vector<PathStep> target_path;

  std::string full_question() const {
    return context.empty() ? question : context + " " + question;
  }

  const std::string& utterance() const;
  const std::string& domain() const;

  friend bool operator==(const QaInstance&, const QaInstance&) = default;
};

}  // namespace topqa
