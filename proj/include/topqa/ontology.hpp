#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "topqa/tree.hpp"

namespace topqa {

class OntologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-domain label inventory: which intents exist, which slots an intent
// admits, and which intents may nest inside a slot. All lists are ordered;
// schema files keep declaration order, extraction sorts lexicographically.
class Ontology {
 public:
  std::string domain;

  const std::vector<std::string>& intents() const { return intents_; }
  const std::vector<std::string>& root_intents() const { return root_intents_; }
  const std::vector<std::string>& slots() const { return slots_; }
  const std::vector<std::string>& slots_of(const std::string& intent) const;
  const std::vector<std::string>& nested_intents_of(const std::string& slot) const;

  bool has_intent(const std::string& label) const { return intent_set_.count(label) > 0; }
  bool has_slot(const std::string& label) const { return slot_set_.count(label) > 0; }
  bool admits_slots(const std::string& intent) const { return !slots_of(intent).empty(); }
  bool admits_nested(const std::string& slot) const { return !nested_intents_of(slot).empty(); }

  void add_intent(const std::string& label, bool root = false);
  void add_slot_edge(const std::string& intent, const std::string& slot);
  void add_nested_edge(const std::string& slot, const std::string& intent);

  void sort_labels();

 private:
  std::vector<std::string> intents_;
  std::vector<std::string> root_intents_;
  std::vector<std::string> slots_;
  std::map<std::string, std::vector<std::string>> slots_of_;
  std::map<std::string, std::vector<std::string>> nested_of_;
  std::set<std::string> intent_set_;
  std::set<std::string> root_set_;
  std::set<std::string> slot_set_;
  std::set<std::pair<std::string, std::string>> slot_edges_;
  std::set<std::pair<std::string, std::string>> nested_edges_;
};

// Builds the ontology observed in a corpus. All trees must share one domain
// (MixedDomains otherwise). Labels come out sorted.
Ontology extract_ontology(std::span<const ParseTree> corpus);

// JSON schema file; arrays keep declaration order.
Ontology load_ontology(const std::string& path);
void save_ontology(const Ontology& ontology, const std::string& path);

class LexiconError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Label -> English phrase overrides. Unlisted labels fall back to the
// mechanical default: strip the IN:/SL: prefix, lowercase, underscores to
// spaces; default plural appends "s".
class Lexicon {
 public:
  struct Entry {
    std::string singular;
    std::string plural;  // empty = derive as singular + "s"
  };

  void set(const std::string& label, const std::string& singular, const std::string& plural = "");
  std::optional<Entry> lookup(const std::string& label) const;
  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::string, Entry> entries_;
};

// Lines "LABEL<TAB>singular[<TAB>plural]"; '#' lines and blanks ignored.
Lexicon load_lexicon(const std::string& path);

// Phrase for a prefixed label. Throws LexiconError on labels without an
// IN:/SL: prefix.
std::string naturalize(const std::string& label, const Lexicon& lexicon, bool plural = false);

enum class PhraseLookup { Ok, UnknownPhrase, AmbiguousPhrase };

struct DenaturalizeResult {
  PhraseLookup status = PhraseLookup::UnknownPhrase;
  std::string label;
};

// Inverse of naturalize over one ontology's labels: accepts singular or
// plural surface forms, case-insensitively, after whitespace collapsing.
class Naturalizer {
 public:
  Naturalizer(const Ontology& ontology, const Lexicon& lexicon);

  std::string phrase(const std::string& label, bool plural = false) const;
  DenaturalizeResult denaturalize(const std::string& phrase) const;
  DenaturalizeResult denaturalize_intent(const std::string& phrase) const;
  DenaturalizeResult denaturalize_slot(const std::string& phrase) const;

  // Phrase collisions between distinct labels; non-empty means the lexicon
  // is not injective over this ontology and round-trips are unsafe.
  const std::vector<std::string>& collisions() const { return collisions_; }

  const Ontology& ontology() const { return *ontology_; }
  const Lexicon& lexicon() const { return *lexicon_; }

 private:
  void index_label(const std::string& label);

  const Ontology* ontology_;
  const Lexicon* lexicon_;
  std::map<std::string, std::vector<std::string>> by_phrase_;
  std::vector<std::string> collisions_;
};

DenaturalizeResult denaturalize(const std::string& phrase, const Ontology& ontology,
                                const Lexicon& lexicon);

}  // namespace topqa
