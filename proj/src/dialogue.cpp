#include "topqa/dialogue.hpp"

#include <algorithm>
#include <future>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "topqa/text.hpp"

namespace topqa {

namespace {

std::string norm(const std::string& s) { return text::collapse_whitespace(s); }

// Walks the gold tree along the instance's established path. Returns the
// intent node the path ends in (for RootIntent/Slots/SlotValue) or the slot
// step handling for NestedIntent is done by the caller.
const TreeNode* walk_to_intent(const ParseTree& gold, const std::vector<PathStep>& path,
                               size_t end) {
  const TreeNode* node = nullptr;
  for (size_t i = 0; i < end; ++i) {
    const PathStep& step = path[i];
    switch (step.kind) {
      case PathKind::Root:
        node = &gold.root;
        break;
      case PathKind::Intent: {
        if (!node) throw PathNotInGold("path does not start at the root");
        if (i == 1) {
          if (node->label != step.label)
            throw PathNotInGold("root intent is " + node->label + ", path has " + step.label);
          break;
        }
        // `node` currently points at the slot found in the previous step.
        const TreeNode* found = nullptr;
        for (const TreeNode& child : node->children)
          if (child.kind == NodeKind::Intent && child.label == step.label) {
            found = &child;
            break;
          }
        if (!found) throw PathNotInGold("no nested intent " + step.label);
        node = found;
        break;
      }
      case PathKind::Slot: {
        if (!node) throw PathNotInGold("slot step before root");
        const TreeNode* found = nullptr;
        for (const TreeNode& child : node->children)
          if (child.kind == NodeKind::Slot && child.label == step.label &&
              (step.value.empty() || norm(leaf_text(child)) == norm(step.value))) {
            found = &child;
            break;
          }
        if (!found) throw PathNotInGold("no slot " + step.label + " = " + step.value);
        node = found;
        break;
      }
    }
  }
  return node;
}

std::vector<std::string> distinct_slot_labels(const TreeNode& intent_node) {
  std::vector<std::string> out;
  for (const TreeNode& child : intent_node.children) {
    if (child.kind != NodeKind::Slot) continue;
    if (std::find(out.begin(), out.end(), child.label) == out.end()) out.push_back(child.label);
  }
  return out;
}

}  // namespace

static std::string oracle_answer_with(const QaInstance& instance, const ParseTree& gold,
                                      const Naturalizer& nat) {
  switch (instance.kind) {
    case QaKind::RootIntent:
      return nat.phrase(gold.root.label);
    case QaKind::SingleTurn:
      return singleturn_answer(gold, nat);
    case QaKind::Slots: {
      const TreeNode* node = walk_to_intent(gold, instance.target_path,
                                            instance.target_path.size());
      std::vector<std::string> labels = distinct_slot_labels(*node);
      if (labels.empty()) return "none";
      std::vector<std::string> phrases;
      for (const std::string& s : labels) phrases.push_back(nat.phrase(s));
      return text::join(phrases, ", ");
    }
    case QaKind::SlotValue: {
      if (instance.target_path.empty() || instance.target_path.back().kind != PathKind::Slot)
        throw PathNotInGold("slot-value instance without slot step");
      const std::string& slot = instance.target_path.back().label;
      const TreeNode* node = walk_to_intent(gold, instance.target_path,
                                            instance.target_path.size() - 1);
      std::vector<std::string> values;
      for (const TreeNode& child : node->children)
        if (child.kind == NodeKind::Slot && child.label == slot)
          values.push_back(leaf_text(child));
      if (values.empty()) throw PathNotInGold("no slot " + slot + " in gold");
      return text::join(values, "; ");
    }
    case QaKind::NestedIntent: {
      if (instance.target_path.empty() || instance.target_path.back().kind != PathKind::Slot)
        throw PathNotInGold("nested-intent instance without slot step");
      const TreeNode* slot_node = walk_to_intent(gold, instance.target_path,
                                                 instance.target_path.size());
      for (const TreeNode& child : slot_node->children)
        if (child.kind == NodeKind::Intent) return nat.phrase(child.label);
      return "none";
    }
    case QaKind::Order:
      throw PathNotInGold("order questions are answered by the canonical pipeline");
  }
  throw PathNotInGold("unhandled question kind");
}

std::string oracle_answer(const QaInstance& instance, const ParseTree& gold,
                          const Lexicon& lexicon) {
  // A throwaway ontology over the gold tree gives the naturalizer its label
  // inventory; answers only ever name labels present in the tree.
  const ParseTree* trees = &gold;
  Ontology ontology = extract_ontology(std::span<const ParseTree>(trees, 1));
  Naturalizer nat(ontology, lexicon);
  return oracle_answer_with(instance, gold, nat);
}

std::string OracleAnswerer::answer(const QaInstance& question) {
  return oracle_answer_with(question, *gold_, nat_);
}

NoisyAnswerer::NoisyAnswerer(const ParseTree& gold, const Ontology& ontology,
                             const Lexicon& lexicon, double p, uint64_t seed)
    : gold_(gold), ontology_(&ontology), nat_(ontology, lexicon), p_(p), rng_(seed) {}

std::string NoisyAnswerer::answer(const QaInstance& question) {
  std::string truth;
  try {
    truth = oracle_answer_with(question, gold_, nat_);
  } catch (const PathNotInGold&) {
    // The dialogue has already wandered off the gold tree (an earlier answer
    // was corrupted); keep it moving deterministically.
    switch (question.kind) {
      case QaKind::SlotValue: return "unknown";
      default: return "none";
    }
  }
  bool corrupt = std::bernoulli_distribution(p_)(rng_);
  if (!corrupt || (!kinds_.empty() && !kinds_.count(question.kind))) return truth;

  auto wrong_phrase = [&](const std::vector<std::string>& labels) -> std::string {
    std::vector<std::string> candidates;
    for (const std::string& label : labels) {
      std::string phrase = nat_.phrase(label);
      if (phrase != truth) candidates.push_back(phrase);
    }
    if (candidates.empty()) return "unknown";
    size_t at = std::uniform_int_distribution<size_t>(0, candidates.size() - 1)(rng_);
    return candidates[at];
  };

  switch (question.kind) {
    case QaKind::RootIntent:
      return wrong_phrase(ontology_->intents());
    case QaKind::Slots:
      return wrong_phrase(ontology_->slots());
    case QaKind::SlotValue:
      return wrong_phrase(ontology_->slots());
    case QaKind::NestedIntent:
      return truth == "none" ? wrong_phrase(ontology_->intents()) : "none";
    default:
      return truth;
  }
}

// ---------------------------------------------------------------------------
// Subprocess answerer: line-delimited JSON over a pair of pipes.

struct PipeAnswerer::Impl {
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  std::string buffer;
  int64_t next_id = 0;

  void write_all(const std::string& data) {
    size_t done = 0;
    while (done < data.size()) {
      ssize_t n = ::write(to_child, data.data() + done, data.size() - done);
      if (n <= 0) throw DialogueError("answerer pipe closed while writing");
      done += static_cast<size_t>(n);
    }
  }

  std::string read_line() {
    while (true) {
      size_t nl = buffer.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      ssize_t n = ::read(from_child, chunk, sizeof chunk);
      if (n <= 0) throw DialogueError("answerer pipe closed while reading");
      buffer.append(chunk, static_cast<size_t>(n));
    }
  }
};

PipeAnswerer::PipeAnswerer(const std::string& command) : impl_(std::make_unique<Impl>()) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
    throw DialogueError("cannot create answerer pipes");
  pid_t pid = fork();
  if (pid < 0) throw DialogueError("cannot fork answerer process");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  impl_->pid = pid;
  impl_->to_child = in_pipe[1];
  impl_->from_child = out_pipe[0];
}

PipeAnswerer::~PipeAnswerer() {
  if (impl_->to_child >= 0) close(impl_->to_child);
  if (impl_->from_child >= 0) close(impl_->from_child);
  if (impl_->pid > 0) {
    int status = 0;
    waitpid(impl_->pid, &status, 0);
  }
}

std::string PipeAnswerer::answer(const QaInstance& question) {
  nlohmann::ordered_json req;
  req["id"] = question.id.empty() ? std::to_string(impl_->next_id++) : question.id;
  req["context"] = question.context;
  req["question"] = question.question;
  impl_->write_all(req.dump() + "\n");
  std::string line = impl_->read_line();
  nlohmann::json resp;
  try {
    resp = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DialogueError(std::string("bad answerer response: ") + e.what());
  }
  if (!resp.contains("answer") || !resp["answer"].is_string())
    throw DialogueError("answerer response without string answer");
  return resp["answer"].get<std::string>();
}

// ---------------------------------------------------------------------------
// Driver

namespace {

struct Pending {
  QaInstance question;
  std::vector<int> key;          // canonical position
  IntentContext ctx;             // context this question belongs to
  std::string slot_label;        // SlotValue / NestedIntent
  std::string value;             // NestedIntent
};

struct ContextState {
  IntentContext ctx;
  std::vector<int> key;
  int next_child = 0;  // ordinal of the next slot child (grouped order)
};

}  // namespace

DriveResult drive_multiturn(const std::string& utterance, const std::string& domain,
                            const Ontology& ontology, const Lexicon& lexicon, Answerer& answerer,
                            const DriveOptions& opts) {
  Naturalizer nat(ontology, lexicon);
  MultiturnBuilder builder(nat, domain, utterance);
  DriveResult result;

  std::vector<Pending> pending;
  std::vector<std::pair<std::vector<int>, TranscriptEntry>> entries;
  std::vector<ContextState> contexts;

  Pending root;
  root.question = root_intent_question(ontology, nat, domain, utterance, opts.gen);
  root.key = {0};
  pending.push_back(std::move(root));

  int issued = 0;
  int wave_no = 0;
  while (!pending.empty() && !result.error) {
    ++wave_no;
    std::vector<Pending> wave;
    wave.swap(pending);
    std::sort(wave.begin(), wave.end(),
              [](const Pending& a, const Pending& b) { return a.key < b.key; });
    if (issued + static_cast<int>(wave.size()) > opts.budget) {
      result.budget_exceeded = true;
      wave.resize(std::max(0, opts.budget - issued));
      if (wave.empty()) break;
    }
    issued += static_cast<int>(wave.size());

    std::vector<std::string> answers(wave.size());
    if (answerer.concurrent_safe() && wave.size() > 1) {
      std::vector<std::future<std::string>> futures;
      futures.reserve(wave.size());
      for (const Pending& p : wave)
        futures.push_back(std::async(std::launch::async,
                                     [&answerer, &p] { return answerer.answer(p.question); }));
      for (size_t i = 0; i < futures.size(); ++i) answers[i] = futures[i].get();
    } else {
      for (size_t i = 0; i < wave.size(); ++i) answers[i] = answerer.answer(wave[i].question);
    }

    for (size_t i = 0; i < wave.size() && !result.error; ++i) {
      Pending& p = wave[i];
      FeedOutcome outcome = builder.feed(p.question, answers[i]);
      entries.push_back({p.key, {p.question, answers[i], wave_no}});
      if (outcome.error) {
        result.error = outcome.error;
        break;
      }
      switch (p.question.kind) {
        case QaKind::RootIntent: {
          ContextState cs;
          cs.ctx = make_root_context(outcome.intent_label, domain, utterance, nat);
          cs.key = {1};
          contexts.push_back(cs);
          if (ontology.admits_slots(outcome.intent_label)) {
            Pending q;
            q.question = slots_question(cs.ctx, ontology, nat, utterance, opts.gen);
            q.key = cs.key;
            q.key.push_back(0);
            q.ctx = cs.ctx;
            pending.push_back(std::move(q));
          }
          break;
        }
        case QaKind::Slots: {
          auto cs = std::find_if(contexts.begin(), contexts.end(), [&](const ContextState& c) {
            return c.ctx.path == p.ctx.path;
          });
          for (size_t s = 0; s < outcome.slot_labels.size(); ++s) {
            Pending q;
            q.question =
                slot_value_question(p.ctx, outcome.slot_labels[s], nat, utterance, opts.gen);
            q.key = cs->key;
            q.key.push_back(1);
            q.key.push_back(static_cast<int>(s));
            q.ctx = p.ctx;
            q.slot_label = outcome.slot_labels[s];
            pending.push_back(std::move(q));
          }
          break;
        }
        case QaKind::SlotValue: {
          auto cs = std::find_if(contexts.begin(), contexts.end(), [&](const ContextState& c) {
            return c.ctx.path == p.ctx.path;
          });
          for (const auto& [slot_label, value] : outcome.values) {
            int ordinal = cs->next_child++;
            if (!(ontology.admits_nested(slot_label) || opts.gen.force_nested)) continue;
            Pending q;
            q.question = nested_intent_question(p.ctx, slot_label, value, ontology, nat,
                                                utterance, opts.gen);
            q.key = cs->key;
            q.key.push_back(2);
            q.key.push_back(ordinal);
            q.ctx = p.ctx;
            q.slot_label = slot_label;
            q.value = value;
            pending.push_back(std::move(q));
          }
          break;
        }
        case QaKind::NestedIntent: {
          if (outcome.nested_intent_label.empty()) break;
          auto cs = std::find_if(contexts.begin(), contexts.end(), [&](const ContextState& c) {
            return c.ctx.path == p.ctx.path;
          });
          // The ordinal of this slot child within its parent: position in
          // key order among the parent's nested probes.
          int ordinal = p.key.back();
          ContextState child;
          child.ctx = make_child_context(p.ctx, p.slot_label, p.value,
                                         outcome.nested_intent_label, nat);
          child.key = cs->key;
          child.key.push_back(3);
          child.key.push_back(ordinal);
          contexts.push_back(child);
          if (ontology.admits_slots(outcome.nested_intent_label)) {
            Pending q;
            q.question = slots_question(child.ctx, ontology, nat, utterance, opts.gen);
            q.key = child.key;
            q.key.push_back(0);
            q.ctx = child.ctx;
            pending.push_back(std::move(q));
          }
          break;
        }
        default:
          break;
      }
    }
  }

  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  result.transcript.reserve(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    TranscriptEntry e = std::move(entries[i].second);
    e.instance.turn = static_cast<int>(i) + 1;
    e.instance.id = opts.gen.id_prefix + ":" + std::to_string(i + 1);
    result.transcript.push_back(std::move(e));
  }
  if (!result.error) {
    result.reconstruction = builder.finish();
  } else {
    result.reconstruction.error = result.error;
  }
  return result;
}

}  // namespace topqa
