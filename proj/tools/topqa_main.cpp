// topqa: convert task-oriented parse trees to QA datasets and back.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "topqa/answer_parse.hpp"
#include "topqa/canonical.hpp"
#include "topqa/dataset.hpp"
#include "topqa/dialogue.hpp"
#include "topqa/generate.hpp"
#include "topqa/metrics.hpp"
#include "topqa/text.hpp"

using namespace topqa;

namespace {

struct CommonOpts {
  std::string lexicon_path;
  std::string ontology_path;
  std::string grammar_path;
};

Lexicon load_lexicon_or_default(const std::string& path) {
  if (!path.empty()) return load_lexicon(path);
  if (const char* env = std::getenv("TOPQA_LEXICON")) return load_lexicon(env);
  return Lexicon{};
}

Ontology ontology_for(const CommonOpts& opts, std::span<const DatasetRecord> records) {
  if (!opts.ontology_path.empty()) return load_ontology(opts.ontology_path);
  std::vector<ParseTree> trees;
  trees.reserve(records.size());
  for (const DatasetRecord& r : records) trees.push_back(r.parse());
  return extract_ontology(trees);
}

void report_rejects(const TsvResult& tsv) {
  for (const TsvReject& r : tsv.rejects)
    std::cerr << "reject line " << r.line << ": " << r.reason << "\n";
}

// Groups instances by the id prefix before ':', in file order.
std::vector<std::vector<QaInstance>> group_by_record(std::vector<QaInstance> instances) {
  std::vector<std::vector<QaInstance>> groups;
  std::map<std::string, size_t> index;
  for (QaInstance& q : instances) {
    std::string key = q.id.substr(0, q.id.find(':'));
    auto it = index.find(key);
    if (it == index.end()) it = index.emplace(key, groups.size()).first, groups.emplace_back();
    groups[it->second].push_back(std::move(q));
  }
  return groups;
}

int run_convert(const std::string& input, const std::string& output, const std::string& mode,
                const CommonOpts& common, GenOptions gen, const std::string& save_ontology_path) {
  TsvResult tsv = read_tsv(input);
  report_rejects(tsv);
  std::vector<QaInstance> all;

  if (!common.grammar_path.empty()) {
    CanonicalGrammar grammar = load_grammar(common.grammar_path);
    PizzaMode pm = mode == "st" ? PizzaMode::SingleTurn : PizzaMode::MultiTurn;
    for (size_t i = 0; i < tsv.records.size(); ++i) {
      gen.id_prefix = "r" + std::to_string(i);
      for (QaInstance& q : generate_pizza_qa(tsv.records[i].parse(), pm, grammar, gen))
        all.push_back(std::move(q));
    }
  } else {
    Ontology ontology = ontology_for(common, tsv.records);
    Lexicon lexicon = load_lexicon_or_default(common.lexicon_path);
    if (!save_ontology_path.empty()) save_ontology(ontology, save_ontology_path);
    for (size_t i = 0; i < tsv.records.size(); ++i) {
      gen.id_prefix = "r" + std::to_string(i);
      ParseTree tree = tsv.records[i].parse();
      if (mode == "st") {
        all.push_back(generate_singleturn(tree, ontology, lexicon, gen));
      } else {
        for (QaInstance& q : generate_multiturn(tree, ontology, lexicon, gen))
          all.push_back(std::move(q));
      }
    }
  }
  write_qa_jsonl(all, output);
  std::cerr << "wrote " << all.size() << " instances to " << output << "\n";
  return tsv.rejects.empty() ? 0 : 1;
}

int run_reconstruct(const std::string& qa_path, const std::string& output,
                    const CommonOpts& common) {
  std::vector<QaInstance> instances = read_qa_jsonl(qa_path);
  std::vector<std::vector<QaInstance>> groups = group_by_record(std::move(instances));
  std::vector<HypothesisRow> rows;

  std::optional<CanonicalGrammar> grammar;
  if (!common.grammar_path.empty()) grammar = load_grammar(common.grammar_path);
  std::optional<Ontology> ontology;
  if (!common.ontology_path.empty()) ontology = load_ontology(common.ontology_path);
  Lexicon lexicon = load_lexicon_or_default(common.lexicon_path);

  for (const std::vector<QaInstance>& group : groups) {
    if (group.empty()) continue;
    HypothesisRow row;
    row.domain = group[0].domain();
    row.utterance = group[0].utterance();
    std::vector<std::pair<QaInstance, std::string>> transcript;
    for (const QaInstance& q : group) transcript.push_back({q, q.answer});

    if (group[0].kind == QaKind::Order) {
      if (!grammar) {
        std::cerr << "order instances need --grammar\n";
        return 1;
      }
      bool single = group.size() == 1 && group[0].question.rfind("What orders", 0) == 0;
      row.result = single
                       ? parse_pizza_st_answer(group[0].answer, *grammar, row.domain, row.utterance)
                       : parse_pizza_transcript(transcript, *grammar, row.domain, row.utterance);
    } else {
      if (!ontology) {
        std::cerr << "reconstruction needs --ontology (the answer space)\n";
        return 1;
      }
      if (group[0].kind == QaKind::SingleTurn) {
        row.result = parse_singleturn_answer(group[0].answer, row.utterance, *ontology, lexicon,
                                             row.domain);
      } else {
        row.result =
            parse_multiturn_answers(transcript, *ontology, lexicon, row.domain, row.utterance);
      }
    }
    rows.push_back(std::move(row));
  }
  write_hypotheses(rows, output);
  std::cerr << "wrote " << rows.size() << " hypotheses to " << output << "\n";
  return 0;
}

int run_evaluate(const std::string& hyp_path, const std::string& ref_path, bool by_depth,
                 bool strict_case, bool full_tree, const std::string& rows_path) {
  std::vector<HypothesisRow> hyp = read_hypotheses(hyp_path);
  TsvResult ref = read_tsv(ref_path);
  report_rejects(ref);
  if (hyp.size() != ref.records.size()) {
    std::cerr << "hypothesis count " << hyp.size() << " != reference count " << ref.records.size()
              << "\n";
    return 1;
  }
  std::vector<EvalPair> pairs;
  for (size_t i = 0; i < hyp.size(); ++i) {
    EvalPair pair;
    pair.hypothesis = hyp[i].result;
    pair.reference = ref.records[i].parse();
    pair.utterance = ref.records[i].utterance;
    pairs.push_back(std::move(pair));
  }
  EmOptions em;
  em.case_insensitive = !strict_case;
  em.decouple = !full_tree;
  EvalReport report = evaluate_corpus(pairs, em);
  std::cout << format_report(report, by_depth);
  if (!rows_path.empty()) {
    std::ofstream out(rows_path);
    out << report_rows(report);
  }
  return ref.rejects.empty() ? 0 : 1;
}

int run_roundtrip(const std::string& input, const std::string& mode, double noise, uint64_t seed,
                  const std::string& noise_kinds, const CommonOpts& common, bool by_depth) {
  TsvResult tsv = read_tsv(input);
  report_rejects(tsv);
  std::vector<EvalPair> pairs;

  if (!common.grammar_path.empty()) {
    CanonicalGrammar grammar = load_grammar(common.grammar_path);
    PizzaMode pm = mode == "st" ? PizzaMode::SingleTurn : PizzaMode::MultiTurn;
    for (const DatasetRecord& record : tsv.records) {
      ParseTree tree = record.parse();
      std::vector<QaInstance> qa = generate_pizza_qa(tree, pm, grammar);
      EvalPair pair;
      if (pm == PizzaMode::SingleTurn) {
        pair.hypothesis =
            parse_pizza_st_answer(qa[0].answer, grammar, record.domain, record.utterance);
      } else {
        std::vector<std::pair<QaInstance, std::string>> transcript;
        for (const QaInstance& q : qa) transcript.push_back({q, q.answer});
        pair.hypothesis =
            parse_pizza_transcript(transcript, grammar, record.domain, record.utterance);
      }
      pair.reference = tree;
      pair.utterance = record.utterance;
      pairs.push_back(std::move(pair));
    }
    EmOptions em;
    em.decouple = false;  // order trees hold values under intent-kind nodes
    EvalReport report = evaluate_corpus(pairs, em);
    std::cout << format_report(report, by_depth);
    return tsv.rejects.empty() ? 0 : 1;
  }

  Ontology ontology = ontology_for(common, tsv.records);
  Lexicon lexicon = load_lexicon_or_default(common.lexicon_path);
  for (size_t i = 0; i < tsv.records.size(); ++i) {
    const DatasetRecord& record = tsv.records[i];
    ParseTree tree = record.parse();
    EvalPair pair;
    if (mode == "st") {
      QaInstance st = generate_singleturn(tree, ontology, lexicon);
      pair.hypothesis =
          parse_singleturn_answer(st.answer, record.utterance, ontology, lexicon, record.domain);
    } else {
      std::unique_ptr<Answerer> answerer;
      if (noise > 0) {
        auto noisy = std::make_unique<NoisyAnswerer>(tree, ontology, lexicon, noise, seed + i);
        if (noise_kinds == "root") noisy->restrict_kinds({QaKind::RootIntent});
        answerer = std::move(noisy);
      } else {
        answerer = std::make_unique<OracleAnswerer>(tree, ontology, lexicon);
      }
      DriveResult run =
          drive_multiturn(record.utterance, record.domain, ontology, lexicon, *answerer);
      pair.hypothesis = run.reconstruction;
    }
    pair.reference = tree;
    pair.utterance = record.utterance;
    pairs.push_back(std::move(pair));
  }
  EvalReport report = evaluate_corpus(pairs);
  std::cout << format_report(report, by_depth);
  return tsv.rejects.empty() ? 0 : 1;
}

int run_stats(const std::string& input, const CommonOpts& common) {
  TsvResult tsv = read_tsv(input);
  report_rejects(tsv);
  Lexicon lexicon = load_lexicon_or_default(common.lexicon_path);
  std::vector<DomainStats> stats = corpus_stats(tsv.records, lexicon);
  std::cout << format_stats(stats);
  return tsv.rejects.empty() ? 0 : 1;
}

int run_sample(const std::string& input, const std::string& output, int spis, uint64_t seed) {
  TsvResult tsv = read_tsv(input);
  report_rejects(tsv);
  std::vector<DatasetRecord> subset = sample_spis(tsv.records, spis, seed);
  write_tsv(subset, output);
  std::cerr << "kept " << subset.size() << " of " << tsv.records.size() << " records\n";
  return tsv.rejects.empty() ? 0 : 1;
}

int run_drive(const std::string& input, const std::string& answerer_cmd, double noise,
              uint64_t seed, const CommonOpts& common, const std::string& transcript_path,
              const std::string& output, bool by_depth) {
  TsvResult tsv = read_tsv(input);
  report_rejects(tsv);
  Ontology ontology = ontology_for(common, tsv.records);
  Lexicon lexicon = load_lexicon_or_default(common.lexicon_path);

  std::unique_ptr<PipeAnswerer> pipe;
  if (!answerer_cmd.empty()) pipe = std::make_unique<PipeAnswerer>(answerer_cmd);

  std::vector<QaInstance> transcript_out;
  std::vector<HypothesisRow> rows;
  std::vector<EvalPair> pairs;
  for (size_t i = 0; i < tsv.records.size(); ++i) {
    const DatasetRecord& record = tsv.records[i];
    ParseTree tree = record.parse();
    DriveOptions opts;
    opts.gen.id_prefix = "r" + std::to_string(i);
    std::unique_ptr<Answerer> local;
    Answerer* answerer = pipe.get();
    if (!answerer) {
      if (noise > 0) {
        local = std::make_unique<NoisyAnswerer>(tree, ontology, lexicon, noise, seed + i);
      } else {
        local = std::make_unique<OracleAnswerer>(tree, ontology, lexicon);
      }
      answerer = local.get();
    }
    DriveResult run =
        drive_multiturn(record.utterance, record.domain, ontology, lexicon, *answerer, opts);
    for (const TranscriptEntry& e : run.transcript) {
      QaInstance q = e.instance;
      q.answer = e.answer;
      transcript_out.push_back(std::move(q));
    }
    HypothesisRow row;
    row.domain = record.domain;
    row.utterance = record.utterance;
    row.result = run.reconstruction;
    rows.push_back(row);
    pairs.push_back({run.reconstruction, tree, record.utterance});
  }
  if (!transcript_path.empty()) write_qa_jsonl(transcript_out, transcript_path);
  if (!output.empty()) write_hypotheses(rows, output);
  EvalReport report = evaluate_corpus(pairs);
  std::cout << format_report(report, by_depth);
  return tsv.rejects.empty() ? 0 : 1;
}

// Line-protocol answer server replaying a converted dataset: questions are
// matched by their full text, unknown questions answer "none".
int run_answer(const std::string& qa_path) {
  std::vector<QaInstance> instances = read_qa_jsonl(qa_path);
  std::map<std::string, std::string> by_text;
  for (const QaInstance& q : instances) by_text[q.full_question()] = q.answer;

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      continue;
    }
    std::string context = req.value("context", "");
    std::string question = req.value("question", "");
    std::string key = context.empty() ? question : context + " " + question;
    auto it = by_text.find(key);
    nlohmann::ordered_json resp;
    resp["id"] = req.value("id", "");
    resp["answer"] = it == by_text.end() ? "none" : it->second;
    std::cout << resp.dump() << "\n" << std::flush;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-oriented parse trees as question answering"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string input, output, mode = "mt", qa_path, hyp_path, ref_path;
  std::string save_ontology_path, rows_path, transcript_path, answerer_cmd, noise_kinds = "all";
  GenOptions gen;
  bool no_metadata = false, no_state = false, by_depth = false;
  bool strict_case = false, full_tree = false;
  double noise = 0.0;
  uint64_t seed = 0;
  int spis = 10;

  auto add_common = [&](CLI::App* cmd, bool with_grammar = true) {
    cmd->add_option("--lexicon", common.lexicon_path,
                    "label phrasing file (default: $TOPQA_LEXICON)");
    cmd->add_option("--ontology", common.ontology_path,
                    "ontology schema file (default: extract from the input)");
    if (with_grammar)
      cmd->add_option("--grammar", common.grammar_path,
                      "canonical grammar file (switches to the closed-world pipeline)");
  };

  CLI::App* convert = app.add_subcommand("convert", "tree TSV -> QA JSONL");
  convert->add_option("--input", input, "TSV with domain, utterance, tree")->required();
  convert->add_option("--output", output, "QA JSONL path")->required();
  convert->add_option("--mode", mode, "st or mt")->check(CLI::IsMember({"st", "mt"}));
  convert->add_flag("--msp", gen.msp, "fill masked_question");
  convert->add_option("--mask-token", gen.mask_token, "mask token (default [MASK])");
  convert->add_flag("--no-metadata", no_metadata, "drop domain metadata sentences");
  convert->add_flag("--no-state", no_state, "drop dialogue state sentences");
  convert->add_flag("--force-nested", gen.force_nested,
                    "probe nested intents on every slot, not only ontology-admitted ones");
  convert->add_option("--save-ontology", save_ontology_path, "write the ontology used");
  add_common(convert);

  CLI::App* reconstruct = app.add_subcommand("reconstruct", "QA JSONL -> hypothesis trees");
  reconstruct->add_option("--qa", qa_path, "QA JSONL with answers")->required();
  reconstruct->add_option("--output", output, "hypothesis TSV")->required();
  add_common(reconstruct);

  CLI::App* evaluate = app.add_subcommand("evaluate", "unordered exact match");
  evaluate->add_option("--hyp", hyp_path, "hypothesis TSV")->required();
  evaluate->add_option("--ref", ref_path, "reference TSV")->required();
  evaluate->add_flag("--by-depth", by_depth, "bucket by reference depth");
  evaluate->add_flag("--strict-case", strict_case, "case-sensitive leaf text");
  evaluate->add_flag("--full-tree", full_tree, "compare without decoupling");
  evaluate->add_option("--rows", rows_path, "write machine-readable rows");

  CLI::App* roundtrip = app.add_subcommand("roundtrip", "convert, answer, rebuild, evaluate");
  roundtrip->add_option("--input", input, "TSV with gold trees")->required();
  roundtrip->add_option("--mode", mode, "st or mt")->check(CLI::IsMember({"st", "mt"}));
  roundtrip->add_option("--noise", noise, "answer corruption probability");
  roundtrip->add_option("--seed", seed, "noise seed");
  roundtrip->add_option("--noise-kinds", noise_kinds, "all or root")
      ->check(CLI::IsMember({"all", "root"}));
  roundtrip->add_flag("--by-depth", by_depth, "bucket by reference depth");
  add_common(roundtrip);

  CLI::App* stats = app.add_subcommand("stats", "per-domain corpus statistics");
  stats->add_option("--input", input, "TSV corpus")->required();
  add_common(stats, /*with_grammar=*/false);

  CLI::App* sample = app.add_subcommand("sample", "few-shot label-coverage split");
  sample->add_option("--input", input, "TSV corpus")->required();
  sample->add_option("--output", output, "subset TSV")->required();
  sample->add_option("--spis", spis, "samples per intent and slot");
  sample->add_option("--seed", seed, "shuffle seed");

  CLI::App* drive = app.add_subcommand("drive", "run the multi-turn dialogue per utterance");
  drive->add_option("--input", input, "TSV with gold trees")->required();
  drive->add_option("--answerer-cmd", answerer_cmd,
                    "subprocess speaking the JSONL answer protocol (default: oracle)");
  drive->add_option("--noise", noise, "oracle corruption probability");
  drive->add_option("--seed", seed, "noise seed");
  drive->add_option("--transcript", transcript_path, "write the driven QA JSONL");
  drive->add_option("--output", output, "write hypothesis TSV");
  drive->add_flag("--by-depth", by_depth, "bucket by reference depth");
  add_common(drive, /*with_grammar=*/false);

  CLI::App* answer = app.add_subcommand("answer", "JSONL answer server replaying a dataset");
  answer->add_option("--qa", qa_path, "converted QA JSONL")->required();

  CLI11_PARSE(app, argc, argv);
  gen.metadata = !no_metadata;
  gen.state = !no_state;

  try {
    if (convert->parsed()) return run_convert(input, output, mode, common, gen, save_ontology_path);
    if (reconstruct->parsed()) return run_reconstruct(qa_path, output, common);
    if (evaluate->parsed())
      return run_evaluate(hyp_path, ref_path, by_depth, strict_case, full_tree, rows_path);
    if (roundtrip->parsed())
      return run_roundtrip(input, mode, noise, seed, noise_kinds, common, by_depth);
    if (stats->parsed()) return run_stats(input, common);
    if (sample->parsed()) return run_sample(input, output, spis, seed);
    if (drive->parsed())
      return run_drive(input, answerer_cmd, noise, seed, common, transcript_path, output,
                       by_depth);
    if (answer->parsed()) return run_answer(qa_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
