#include "topqa/ontology.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "topqa/text.hpp"

namespace topqa {

namespace {

const std::vector<std::string> kNoLabels;

void walk_edges(const TreeNode& node, Ontology& out) {
  for (const TreeNode& child : node.children) {
    if (child.kind == NodeKind::Slot) {
      out.add_slot_edge(node.label, child.label);
    } else if (child.kind == NodeKind::Intent) {
      out.add_intent(child.label);
      if (node.kind == NodeKind::Slot) out.add_nested_edge(node.label, child.label);
    }
    walk_edges(child, out);
  }
}

}  // namespace

const std::vector<std::string>& Ontology::slots_of(const std::string& intent) const {
  auto it = slots_of_.find(intent);
  return it == slots_of_.end() ? kNoLabels : it->second;
}

const std::vector<std::string>& Ontology::nested_intents_of(const std::string& slot) const {
  auto it = nested_of_.find(slot);
  return it == nested_of_.end() ? kNoLabels : it->second;
}

void Ontology::add_intent(const std::string& label, bool root) {
  if (intent_set_.insert(label).second) intents_.push_back(label);
  if (root && root_set_.insert(label).second) root_intents_.push_back(label);
}

void Ontology::add_slot_edge(const std::string& intent, const std::string& slot) {
  add_intent(intent);
  if (slot_set_.insert(slot).second) slots_.push_back(slot);
  if (slot_edges_.insert({intent, slot}).second) slots_of_[intent].push_back(slot);
}

void Ontology::add_nested_edge(const std::string& slot, const std::string& intent) {
  add_intent(intent);
  if (slot_set_.insert(slot).second) slots_.push_back(slot);
  if (nested_edges_.insert({slot, intent}).second) nested_of_[slot].push_back(intent);
}

void Ontology::sort_labels() {
  std::sort(intents_.begin(), intents_.end());
  std::sort(root_intents_.begin(), root_intents_.end());
  std::sort(slots_.begin(), slots_.end());
  for (auto& [_, v] : slots_of_) std::sort(v.begin(), v.end());
  for (auto& [_, v] : nested_of_) std::sort(v.begin(), v.end());
}

Ontology extract_ontology(std::span<const ParseTree> corpus) {
  Ontology out;
  for (const ParseTree& tree : corpus) {
    if (out.domain.empty()) out.domain = tree.domain;
    if (tree.domain != out.domain)
      throw OntologyError("mixed domains in corpus: " + out.domain + " vs " + tree.domain);
    out.add_intent(tree.root.label, /*root=*/true);
    walk_edges(tree.root, out);
  }
  out.sort_labels();
  return out;
}

Ontology load_ontology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw OntologyError("cannot open ontology file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw OntologyError("bad ontology json in " + path + ": " + e.what());
  }
  Ontology out;
  out.domain = doc.value("domain", "");
  for (const auto& item : doc.value("intents", nlohmann::json::array())) {
    std::string label = item.at("label").get<std::string>();
    out.add_intent(label);
    for (const auto& slot : item.value("slots", nlohmann::json::array()))
      out.add_slot_edge(label, slot.get<std::string>());
  }
  for (const auto& label : doc.value("root_intents", nlohmann::json::array()))
    out.add_intent(label.get<std::string>(), /*root=*/true);
  for (const auto& item : doc.value("nested_intents", nlohmann::json::array())) {
    std::string slot = item.at("slot").get<std::string>();
    for (const auto& intent : item.value("intents", nlohmann::json::array()))
      out.add_nested_edge(slot, intent.get<std::string>());
  }
  return out;
}

void save_ontology(const Ontology& ontology, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["domain"] = ontology.domain;
  auto intents = nlohmann::ordered_json::array();
  for (const std::string& label : ontology.intents()) {
    nlohmann::ordered_json item;
    item["label"] = label;
    item["slots"] = ontology.slots_of(label);
    intents.push_back(std::move(item));
  }
  doc["intents"] = std::move(intents);
  doc["root_intents"] = ontology.root_intents();
  auto nested = nlohmann::ordered_json::array();
  for (const std::string& slot : ontology.slots()) {
    const auto& list = ontology.nested_intents_of(slot);
    if (list.empty()) continue;
    nlohmann::ordered_json item;
    item["slot"] = slot;
    item["intents"] = list;
    nested.push_back(std::move(item));
  }
  doc["nested_intents"] = std::move(nested);
  std::ofstream out(path);
  if (!out) throw OntologyError("cannot write ontology file: " + path);
  out << doc.dump(2) << "\n";
}

void Lexicon::set(const std::string& label, const std::string& singular,
                  const std::string& plural) {
  entries_[label] = Entry{singular, plural};
}

std::optional<Lexicon::Entry> Lexicon::lookup(const std::string& label) const {
  auto it = entries_.find(label);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LexiconError("cannot open lexicon file: " + path);
  Lexicon out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols = text::split(line, "\t");
    if (cols.size() < 2 || cols[0].empty() || cols[1].empty())
      throw LexiconError("lexicon line " + std::to_string(lineno) +
                         ": expected LABEL<TAB>singular[<TAB>plural]");
    out.set(cols[0], cols[1], cols.size() > 2 ? cols[2] : "");
  }
  return out;
}

std::string naturalize(const std::string& label, const Lexicon& lexicon, bool plural) {
  if (label.rfind("IN:", 0) != 0 && label.rfind("SL:", 0) != 0)
    throw LexiconError("label without IN:/SL: prefix: " + label);
  if (auto entry = lexicon.lookup(label)) {
    if (!plural) return entry->singular;
    return entry->plural.empty() ? entry->singular + "s" : entry->plural;
  }
  std::string phrase = text::to_lower(label.substr(3));
  std::replace(phrase.begin(), phrase.end(), '_', ' ');
  if (plural) phrase += "s";
  return phrase;
}

Naturalizer::Naturalizer(const Ontology& ontology, const Lexicon& lexicon)
    : ontology_(&ontology), lexicon_(&lexicon) {
  for (const std::string& label : ontology.intents()) index_label(label);
  for (const std::string& label : ontology.slots()) index_label(label);
  for (const auto& [phrase, labels] : by_phrase_) {
    std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() > 1)
      collisions_.push_back(phrase + " -> " + text::join(labels, ", "));
  }
}

void Naturalizer::index_label(const std::string& label) {
  by_phrase_[text::to_lower(naturalize(label, *lexicon_, false))].push_back(label);
  by_phrase_[text::to_lower(naturalize(label, *lexicon_, true))].push_back(label);
}

std::string Naturalizer::phrase(const std::string& label, bool plural) const {
  return naturalize(label, *lexicon_, plural);
}

DenaturalizeResult Naturalizer::denaturalize(const std::string& phrase) const {
  std::string key = text::to_lower(text::collapse_whitespace(phrase));
  auto it = by_phrase_.find(key);
  if (it == by_phrase_.end() || key.empty()) return {PhraseLookup::UnknownPhrase, ""};
  std::set<std::string> distinct(it->second.begin(), it->second.end());
  if (distinct.size() > 1) return {PhraseLookup::AmbiguousPhrase, ""};
  return {PhraseLookup::Ok, *distinct.begin()};
}

DenaturalizeResult Naturalizer::denaturalize_intent(const std::string& phrase) const {
  DenaturalizeResult r = denaturalize(phrase);
  if (r.status == PhraseLookup::Ok && !ontology_->has_intent(r.label))
    return {PhraseLookup::UnknownPhrase, ""};
  return r;
}

DenaturalizeResult Naturalizer::denaturalize_slot(const std::string& phrase) const {
  DenaturalizeResult r = denaturalize(phrase);
  if (r.status == PhraseLookup::Ok && !ontology_->has_slot(r.label))
    return {PhraseLookup::UnknownPhrase, ""};
  return r;
}

DenaturalizeResult denaturalize(const std::string& phrase, const Ontology& ontology,
                                const Lexicon& lexicon) {
  return Naturalizer(ontology, lexicon).denaturalize(phrase);
}

}  // namespace topqa
