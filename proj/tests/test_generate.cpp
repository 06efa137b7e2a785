#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "testutil.hpp"
#include "topqa/dataset.hpp"
#include "topqa/generate.hpp"
#include "topqa/text.hpp"

using namespace topqa;
using namespace testutil;

namespace {

struct NavFixture {
  ParseTree tree;
  Ontology ontology;
  Lexicon lexicon;
  nlohmann::json golden;

  NavFixture() {
    TsvResult tsv = read_tsv(data_dir() + "/examples/navigation.tsv");
    REQUIRE(tsv.rejects.empty());
    REQUIRE(tsv.records.size() == 1);
    tree = tsv.records[0].parse();
    ontology = load_ontology(data_dir() + "/navigation.ontology.json");
    lexicon = load_lexicon(data_dir() + "/navigation.lexicon");
    std::ifstream in(data_dir() + "/golden/navigation_qa.json");
    REQUIRE(in.good());
    in >> golden;
  }
};

}  // namespace

TEST_CASE("multi-turn generation reproduces the golden navigation turns") {
  NavFixture fx;
  GenOptions opts;
  opts.msp = true;
  std::vector<QaInstance> qa = generate_multiturn(fx.tree, fx.ontology, fx.lexicon, opts);
  REQUIRE(qa.size() >= 4);

  const auto& golden = fx.golden["multiturn"];
  for (size_t i = 0; i < 4; ++i) {
    CAPTURE(i);
    CHECK(qa[i].full_question() == golden[i]["question"].get<std::string>());
    CHECK(qa[i].answer == golden[i]["answer"].get<std::string>());
    CHECK(qa[i].masked_question == golden[i]["masked_question"].get<std::string>());
  }

  CHECK(qa[0].kind == QaKind::RootIntent);
  CHECK(qa[1].kind == QaKind::Slots);
  CHECK(qa[2].kind == QaKind::SlotValue);
  CHECK(qa[3].kind == QaKind::NestedIntent);

  // The fixture yields 13 questions in canonical order; freeze the first
  // deeper turn as well.
  REQUIRE(qa.size() == 13);
  CHECK(qa[4].full_question() ==
        "The slots for get location may be location modifiers, location's categories, search "
        "radiuses, and locations. A user said ``Look up directions to the nearest parking near "
        "S Beritania Street.'' The user's intent is to get directions, and the destination is "
        "the nearest parking near S Beritania Street. The intent included in ``the nearest "
        "parking near S Beritania Street'' is get location. What are the slots?");
  CHECK(qa[4].answer == "location modifier, location's category");
  CHECK(qa[5].kind == QaKind::SlotValue);
  CHECK(qa[5].answer == "nearest; near S Beritania Street");
  CHECK(qa[6].answer == "parking");
}

TEST_CASE("single-turn generation reproduces the golden pair") {
  NavFixture fx;
  GenOptions opts;
  opts.msp = true;
  QaInstance st = generate_singleturn(fx.tree, fx.ontology, fx.lexicon, opts);
  const auto& golden = fx.golden["singleturn"];
  CHECK(st.full_question() == golden["question"].get<std::string>());
  CHECK(st.answer == golden["answer"].get<std::string>());
  CHECK(st.masked_question == golden["masked_question"].get<std::string>());
  CHECK(st.kind == QaKind::SingleTurn);
}

TEST_CASE("minimal tree: one root question only") {
  ParseTree tree = parse_linearized("[IN:X ]");
  tree.domain = "synthetic";
  tree.utterance = "do the thing";
  std::vector<ParseTree> corpus{tree};
  Ontology ontology = extract_ontology(corpus);
  Lexicon lexicon;
  std::vector<QaInstance> qa = generate_multiturn(tree, ontology, lexicon);
  REQUIRE(qa.size() == 1);
  CHECK(qa[0].kind == QaKind::RootIntent);
  CHECK(qa[0].answer == "x");
  CHECK(qa[0].full_question() ==
        "A user may intend to x. A user said, ``do the thing'' What did the user intend to do?");

  QaInstance st = generate_singleturn(tree, ontology, lexicon);
  CHECK(st.answer == "The user intended to x.");
}

TEST_CASE("slots question is asked when the ontology admits slots the tree lacks") {
  ParseTree with_slot = parse_linearized("[IN:X [SL:Y a ] ]");
  with_slot.domain = "d";
  with_slot.utterance = "a";
  ParseTree bare = parse_linearized("[IN:X ]");
  bare.domain = "d";
  bare.utterance = "b";
  std::vector<ParseTree> corpus{with_slot, bare};
  Ontology ontology = extract_ontology(corpus);
  Lexicon lexicon;
  std::vector<QaInstance> qa = generate_multiturn(bare, ontology, lexicon);
  REQUIRE(qa.size() == 2);
  CHECK(qa[1].kind == QaKind::Slots);
  CHECK(qa[1].answer == "none");
}

TEST_CASE("question count matches the brute-force oracle") {
  TreeGen gen(101);
  std::vector<ParseTree> corpus = gen.corpus(60);
  Ontology ontology = extract_ontology(corpus);
  Lexicon lexicon;
  for (const ParseTree& tree : corpus) {
    std::vector<QaInstance> qa = generate_multiturn(tree, ontology, lexicon);
    CHECK(static_cast<int>(qa.size()) == oracle_question_count(tree, ontology));
  }
}

TEST_CASE("flat trees: 1 + [has slots] + distinct slot labels") {
  ParseTree flat = parse_linearized("[IN:X [SL:A a ] [SL:B b ] [SL:A c ] ]");
  flat.domain = "d";
  flat.utterance = "a b c";
  std::vector<ParseTree> corpus{flat};
  Ontology ontology = extract_ontology(corpus);
  Lexicon lexicon;
  std::vector<QaInstance> qa = generate_multiturn(flat, ontology, lexicon);
  CHECK(qa.size() == 1 + 1 + 2);
}

TEST_CASE("labels outside the ontology are errors") {
  ParseTree tree = parse_linearized("[IN:UNKNOWN [SL:Y a ] ]");
  tree.domain = "d";
  tree.utterance = "a";
  ParseTree other = parse_linearized("[IN:X [SL:Y a ] ]");
  other.domain = "d";
  other.utterance = "a";
  std::vector<ParseTree> corpus{other};
  Ontology ontology = extract_ontology(corpus);
  Lexicon lexicon;
  CHECK_THROWS_AS(generate_multiturn(tree, ontology, lexicon), GenerationError);
  CHECK_THROWS_AS(generate_singleturn(tree, ontology, lexicon), GenerationError);
}

TEST_CASE("metadata and state ablations strip exactly their sentences") {
  NavFixture fx;
  GenOptions all;
  GenOptions no_state;
  no_state.state = false;
  GenOptions no_meta;
  no_meta.metadata = false;
  std::vector<QaInstance> full = generate_multiturn(fx.tree, fx.ontology, fx.lexicon, all);
  std::vector<QaInstance> stateless = generate_multiturn(fx.tree, fx.ontology, fx.lexicon, no_state);
  std::vector<QaInstance> bare = generate_multiturn(fx.tree, fx.ontology, fx.lexicon, no_meta);
  REQUIRE(full.size() == stateless.size());
  REQUIRE(full.size() == bare.size());
  for (size_t i = 0; i < full.size(); ++i) {
    CAPTURE(i);
    // Same interrogative and answer everywhere.
    CHECK(full[i].question == stateless[i].question);
    CHECK(full[i].question == bare[i].question);
    CHECK(full[i].answer == stateless[i].answer);
    CHECK(full[i].answer == bare[i].answer);
    // The stateless context is a prefix (state sentences trail the context).
    CHECK(full[i].context.rfind(stateless[i].context, 0) == 0);
    // The metadata-free context is a suffix.
    CHECK(full[i].context.size() >= bare[i].context.size());
    CHECK(full[i].context.compare(full[i].context.size() - bare[i].context.size(),
                                  bare[i].context.size(), bare[i].context) == 0);
  }
}

TEST_CASE("to_msp rebuilds the generated masked question") {
  NavFixture fx;
  GenOptions opts;
  opts.msp = true;
  std::vector<QaInstance> qa = generate_multiturn(fx.tree, fx.ontology, fx.lexicon, opts);
  for (const QaInstance& q : qa) {
    QaInstance plain = q;
    plain.masked_question.clear();
    QaInstance rebuilt = to_msp(plain, "[MASK]");
    CAPTURE(q.turn);
    CHECK(rebuilt.masked_question == q.masked_question);
    CHECK(rebuilt.answer == q.answer);
    CHECK(text::count_occurrences(q.masked_question, "[MASK]") == 1);
  }

  // Custom mask tokens.
  QaInstance root = qa[0];
  root.masked_question.clear();
  CHECK(to_msp(root, "<extra_id_0>").masked_question ==
        text::split(qa[0].masked_question, "[MASK]")[0] + "<extra_id_0>" +
            text::split(qa[0].masked_question, "[MASK]")[1]);

  // Slots/SlotValue declaratives need state sentences.
  GenOptions no_state;
  no_state.state = false;
  std::vector<QaInstance> stateless =
      generate_multiturn(fx.tree, fx.ontology, fx.lexicon, no_state);
  CHECK_THROWS_AS(to_msp(stateless[1]), GenerationError);
}

TEST_CASE("masked questions carry exactly one mask over random corpora") {
  TreeGen gen(103);
  std::vector<ParseTree> corpus = gen.corpus(30);
  Ontology ontology = extract_ontology(corpus);
  Lexicon lexicon;
  GenOptions opts;
  opts.msp = true;
  for (const ParseTree& tree : corpus) {
    for (const QaInstance& q : generate_multiturn(tree, ontology, lexicon, opts))
      CHECK(text::count_occurrences(q.masked_question, "[MASK]") == 1);
    QaInstance st = generate_singleturn(tree, ontology, lexicon, opts);
    CHECK(text::count_occurrences(st.masked_question, "[MASK]") == 1);
  }
}
