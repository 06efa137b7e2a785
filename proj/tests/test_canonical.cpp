#include <doctest.h>

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "testutil.hpp"
#include "topqa/canonical.hpp"
#include "topqa/text.hpp"
#include "topqa/dataset.hpp"
#include "topqa/metrics.hpp"

using namespace topqa;
using namespace testutil;

namespace {

struct PizzaFixture {
  ParseTree tree;
  CanonicalGrammar grammar;
  nlohmann::json golden;

  PizzaFixture() {
    TsvResult tsv = read_tsv(data_dir() + "/examples/pizza.tsv");
    REQUIRE(tsv.rejects.empty());
    tree = tsv.records.at(0).parse();
    grammar = load_grammar(data_dir() + "/pizza.grammar.json");
    std::ifstream in(data_dir() + "/golden/pizza_qa.json");
    REQUIRE(in.good());
    in >> golden;
  }
};

// Random grammar-valid order subtrees for round-trip checks.
struct OrderGen {
  const CanonicalGrammar& grammar;
  std::mt19937_64 rng;

  OrderGen(const CanonicalGrammar& g, uint64_t seed) : grammar(g), rng(seed) {}

  std::string pick_value(const std::string& label) {
    const auto& vocab = grammar.vocab.at(label);
    size_t at = std::uniform_int_distribution<size_t>(0, vocab.size() - 1)(rng);
    return *std::next(vocab.begin(), at);
  }

  TreeNode slot_node(const std::string& label, const std::string& value, NodeKind kind) {
    TreeNode node;
    node.kind = kind;
    node.label = label;
    for (const std::string& w : text::split_words(value)) {
      TreeNode tok;
      tok.kind = NodeKind::Token;
      tok.label = w;
      node.children.push_back(std::move(tok));
    }
    return node;
  }

  TreeNode order() {
    const OrderTemplate& tmpl =
        grammar.orders[std::uniform_int_distribution<size_t>(0, grammar.orders.size() - 1)(rng)];
    TreeNode node;
    node.kind = NodeKind::Slot;
    node.label = tmpl.label;
    for (const GrammarSegment& seg : tmpl.segments) {
      if (seg.type == GrammarSegment::Type::Literal) continue;
      bool include = !seg.optional || std::bernoulli_distribution(0.6)(rng);
      if (!include) continue;
      if (seg.type == GrammarSegment::Type::Group) {
        TreeNode group;
        group.kind = NodeKind::Intent;
        group.label = seg.group_label;
        for (const std::string& child : seg.child_slots)
          group.children.push_back(slot_node(child, pick_value(child), NodeKind::Slot));
        node.children.push_back(std::move(group));
        continue;
      }
      const std::string& label = seg.slots[std::uniform_int_distribution<size_t>(
          0, seg.slots.size() - 1)(rng)];
      int copies = seg.list ? std::uniform_int_distribution<int>(1, 3)(rng) : 1;
      std::set<std::string> used;
      for (int i = 0; i < copies; ++i) {
        std::string value = pick_value(label);
        if (!used.insert(value).second) continue;
        if (seg.wrap.empty()) {
          node.children.push_back(slot_node(label, value, NodeKind::Intent));
        } else {
          TreeNode wrap;
          wrap.kind = NodeKind::Intent;
          wrap.label = seg.wrap;
          wrap.children.push_back(slot_node(label, value, NodeKind::Slot));
          node.children.push_back(std::move(wrap));
        }
      }
    }
    return node;
  }
};

}  // namespace

TEST_CASE("renders the golden order phrases") {
  PizzaFixture fx;
  REQUIRE(fx.tree.root.children.size() == 3);
  CHECK(render_canonical(fx.tree.root.children[0], fx.grammar) ==
        "two large pizza in the everything style");
  CHECK(render_canonical(fx.tree.root.children[1], fx.grammar) ==
        "two large pizza with mushrooms with extra cheese");
  CHECK(render_canonical(fx.tree.root.children[2], fx.grammar) == "six large-sized cokes");
}

TEST_CASE("render errors are typed") {
  PizzaFixture fx;
  TreeNode unknown;
  unknown.kind = NodeKind::Slot;
  unknown.label = "TACOORDER";
  CHECK_THROWS_AS(render_canonical(unknown, fx.grammar), CanonicalError);

  // Pizza without a size: the size slot is mandatory in the template.
  TreeNode pizza = parse_linearized_node("[X [PIZZAORDER [NUMBER two ] ] ]").children[0];
  try {
    render_canonical(pizza, fx.grammar);
    FAIL("expected MissingMandatorySlot");
  } catch (const CanonicalError& e) {
    CHECK(e.kind() == CanonicalErrorKind::MissingMandatorySlot);
  }
}

TEST_CASE("parses the golden order phrases back") {
  PizzaFixture fx;
  TreeNode pizza2 = parse_canonical("two large pizza with mushrooms with extra cheese", fx.grammar);
  CHECK(canonical_form(pizza2, {.decouple = false}) ==
        canonical_form(fx.tree.root.children[1], {.decouple = false}));
  TreeNode drink = parse_canonical("six large-sized cokes", fx.grammar);
  CHECK(canonical_form(drink, {.decouple = false}) ==
        canonical_form(fx.tree.root.children[2], {.decouple = false}));
  CHECK_THROWS_AS(parse_canonical("", fx.grammar), CanonicalError);
  CHECK_THROWS_AS(parse_canonical("seventy quantum pizzas", fx.grammar), CanonicalError);
}

TEST_CASE("render/parse identity over random grammar subtrees") {
  PizzaFixture fx;
  OrderGen gen(fx.grammar, 77);
  for (int i = 0; i < 200; ++i) {
    TreeNode order = gen.order();
    std::string canon = render_canonical(order, fx.grammar);
    CAPTURE(canon);
    TreeNode back = parse_canonical(canon, fx.grammar);
    CHECK(canonical_form(back, {.decouple = false}) ==
          canonical_form(order, {.decouple = false}));
  }
}

TEST_CASE("multi-turn pizza QA reproduces the golden texts") {
  PizzaFixture fx;
  GenOptions opts;
  opts.msp = true;
  std::vector<QaInstance> qa = generate_pizza_qa(fx.tree, PizzaMode::MultiTurn, fx.grammar, opts);
  const auto& golden = fx.golden["multiturn"];
  REQUIRE(qa.size() == 4);
  for (size_t i = 0; i < 4; ++i) {
    CAPTURE(i);
    CHECK(qa[i].full_question() == golden[i]["question"].get<std::string>());
    CHECK(qa[i].answer == golden[i]["answer"].get<std::string>());
    CHECK(qa[i].masked_question == golden[i]["masked_question"].get<std::string>());
  }
  CHECK(qa.back().answer == "none");
}

TEST_CASE("single-turn pizza QA reproduces the golden texts") {
  PizzaFixture fx;
  GenOptions opts;
  opts.msp = true;
  std::vector<QaInstance> qa = generate_pizza_qa(fx.tree, PizzaMode::SingleTurn, fx.grammar, opts);
  REQUIRE(qa.size() == 1);
  const auto& golden = fx.golden["singleturn"];
  CHECK(qa[0].full_question() == golden["question"].get<std::string>());
  CHECK(qa[0].answer == golden["answer"].get<std::string>());
  CHECK(qa[0].masked_question == golden["masked_question"].get<std::string>());
}

TEST_CASE("empty order: one multi-turn question answered none") {
  PizzaFixture fx;
  ParseTree empty;
  empty.root.kind = NodeKind::Intent;
  empty.root.label = "ORDER";
  empty.domain = "pizza";
  empty.utterance = "nothing for me";
  std::vector<QaInstance> qa = generate_pizza_qa(empty, PizzaMode::MultiTurn, fx.grammar);
  REQUIRE(qa.size() == 1);
  CHECK(qa[0].answer == "none");
}

TEST_CASE("pizza transcripts rebuild the order tree") {
  PizzaFixture fx;
  for (PizzaMode mode : {PizzaMode::MultiTurn, PizzaMode::SingleTurn}) {
    std::vector<QaInstance> qa = generate_pizza_qa(fx.tree, mode, fx.grammar);
    ReconResult got;
    if (mode == PizzaMode::MultiTurn) {
      std::vector<std::pair<QaInstance, std::string>> transcript;
      for (const QaInstance& q : qa) transcript.push_back({q, q.answer});
      got = parse_pizza_transcript(transcript, fx.grammar, "pizza", fx.tree.utterance);
    } else {
      got = parse_pizza_st_answer(qa[0].answer, fx.grammar, "pizza", fx.tree.utterance);
    }
    REQUIRE(got.ok());
    CHECK(unordered_em(*got.tree, fx.tree, {.decouple = false}) == 1);
  }
}

TEST_CASE("pizza round-trip over random order trees, shuffled siblings ignored") {
  PizzaFixture fx;
  OrderGen gen(fx.grammar, 91);
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    ParseTree tree;
    tree.root.kind = NodeKind::Intent;
    tree.root.label = "ORDER";
    tree.domain = "pizza";
    int orders = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int k = 0; k < orders; ++k) tree.root.children.push_back(gen.order());
    tree.utterance = "an utterance";

    std::vector<QaInstance> mt = generate_pizza_qa(tree, PizzaMode::MultiTurn, fx.grammar);
    CHECK(mt.size() == static_cast<size_t>(orders) + 1);
    std::vector<std::pair<QaInstance, std::string>> transcript;
    for (const QaInstance& q : mt) transcript.push_back({q, q.answer});
    ReconResult got = parse_pizza_transcript(transcript, fx.grammar, "pizza", tree.utterance);
    REQUIRE(got.ok());
    CHECK(unordered_em(*got.tree, tree, {.decouple = false}) == 1);

    std::vector<QaInstance> st = generate_pizza_qa(tree, PizzaMode::SingleTurn, fx.grammar);
    ReconResult st_got = parse_pizza_st_answer(st[0].answer, fx.grammar, "pizza", tree.utterance);
    REQUIRE_MESSAGE(st_got.ok(), st[0].answer);
    CHECK(unordered_em(*st_got.tree, tree, {.decouple = false}) == 1);

    // Sibling order is irrelevant under the unordered metric.
    ParseTree shuffled = tree;
    shuffle_siblings(shuffled.root, rng);
    CHECK(unordered_em(*got.tree, shuffled, {.decouple = false}) == 1);
  }
}
