#include <doctest.h>

#include <random>

#include "testutil.hpp"
#include "topqa/text.hpp"
#include "topqa/tree.hpp"

using namespace topqa;
using namespace testutil;

namespace {

const char* kNavTree =
    "[IN:GET_DIRECTIONS [SL:DESTINATION [IN:GET_LOCATION [SL:LOCATION_MODIFIER nearest] "
    "[SL:CATEGORY_LOCATION parking] [SL:LOCATION_MODIFIER [IN:GET_LOCATION "
    "[SL:SEARCH_RADIUS near] [SL:LOCATION S Beritania Street]]]]]]";

}  // namespace

TEST_CASE("parses the navigation example tree") {
  ParseTree tree = parse_linearized(kNavTree);
  CHECK(tree.root.label == "IN:GET_DIRECTIONS");
  CHECK(tree.root.kind == NodeKind::Intent);
  REQUIRE(tree.root.children.size() == 1);
  const TreeNode& dest = tree.root.children[0];
  CHECK(dest.label == "SL:DESTINATION");
  CHECK(dest.kind == NodeKind::Slot);
  const TreeNode& loc = dest.children[0];
  CHECK(loc.label == "IN:GET_LOCATION");
  REQUIRE(loc.children.size() == 3);
  CHECK(leaf_text(loc.children[0]) == "nearest");
  CHECK(leaf_text(loc.children[1]) == "parking");
  CHECK(leaf_text(loc.children[2]) == "near S Beritania Street");
  // Multi-word leaves are separate token nodes.
  const TreeNode& inner = loc.children[2].children[0];
  CHECK(inner.children[1].label == "SL:LOCATION");
  CHECK(inner.children[1].children.size() == 3);
}

TEST_CASE("serialization round-trips and normalizes whitespace") {
  ParseTree tree = parse_linearized(kNavTree);
  std::string canonical = serialize_linearized(tree);
  CHECK(normalize_linearized(kNavTree) == canonical);
  ParseTree again = parse_linearized(canonical);
  CHECK(again.root == tree.root);
}

TEST_CASE("single intent serializes with a space before the bracket") {
  ParseTree tree = parse_linearized("[IN:GET_WEATHER ]");
  CHECK(tree.root.children.empty());
  CHECK(serialize_linearized(tree) == "[IN:GET_WEATHER ]");
  CHECK(serialize_linearized(parse_linearized("[IN:X]")) == "[IN:X ]");
}

TEST_CASE("typed parse errors") {
  auto kind_of = [](const char* s) {
    try {
      parse_linearized(s);
    } catch (const TreeParseError& e) {
      return e.kind();
    }
    FAIL("expected a parse error for: ", s);
    return TreeErrorKind::UnbalancedBrackets;
  };
  CHECK(kind_of("[SL:DESTINATION x]") == TreeErrorKind::RootNotIntent);
  CHECK(kind_of("[IN:A [IN:B x]]") == TreeErrorKind::IllegalNesting);
  CHECK(kind_of("[IN:A [SL:B [SL:C x]]]") == TreeErrorKind::IllegalNesting);
  CHECK(kind_of("[IN:A x") == TreeErrorKind::UnbalancedBrackets);
  CHECK(kind_of("[IN:A ]]") == TreeErrorKind::UnbalancedBrackets);
  CHECK(kind_of("") == TreeErrorKind::UnbalancedBrackets);
  CHECK(kind_of("junk [IN:A ]") == TreeErrorKind::UnbalancedBrackets);
  CHECK(kind_of("[ ]") == TreeErrorKind::EmptyNode);
  CHECK(kind_of("[]") == TreeErrorKind::EmptyNode);
  CHECK(kind_of("[IN:A [SL: x]]") == TreeErrorKind::EmptyNode);
}

TEST_CASE("bare labels get kinds by alternation") {
  ParseTree tree = parse_linearized("[ORDER [PIZZAORDER [NUMBER two ] ] ]");
  CHECK(tree.root.kind == NodeKind::Intent);
  CHECK(tree.root.children[0].kind == NodeKind::Slot);
  CHECK(tree.root.children[0].children[0].kind == NodeKind::Intent);
}

TEST_CASE("random trees round-trip") {
  TreeGen gen(7);
  for (int i = 0; i < 300; ++i) {
    ParseTree tree = gen.tree();
    std::string s = serialize_linearized(tree);
    ParseTree back = parse_linearized(s);
    CHECK(back.root == tree.root);
    CHECK(serialize_linearized(back) == s);
  }
}

TEST_CASE("decoupling matches the token-filter oracle") {
  // The example tree keeps every leaf-slot token.
  ParseTree nav = parse_linearized(kNavTree);
  CHECK(to_decoupled(nav).root == nav.root);

  // A token directly under the root intent is removed.
  ParseTree mixed = parse_linearized("[IN:A hello [SL:B x ] ]");
  ParseTree plain = parse_linearized("[IN:A [SL:B x ] ]");
  CHECK(to_decoupled(mixed).root == plain.root);

  // Slot hosting a nested intent loses its direct tokens.
  ParseTree hosted = parse_linearized("[IN:A [SL:B the thing [IN:C [SL:D x ] ] ] ]");
  ParseTree expect = parse_linearized("[IN:A [SL:B [IN:C [SL:D x ] ] ] ]");
  CHECK(to_decoupled(hosted).root == expect.root);

  TreeGen gen(11);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    ParseTree tree = gen.tree();
    // Sprinkle tokens under intents to make decoupling non-trivial.
    std::vector<TreeNode*> nodes;
    collect_labeled(tree.root, nodes);
    for (TreeNode* n : nodes)
      if (n->kind == NodeKind::Intent && std::bernoulli_distribution(0.3)(rng)) {
        TreeNode tok;
        tok.kind = NodeKind::Token;
        tok.label = "filler" + std::to_string(i);
        n->children.insert(n->children.begin(), tok);
      }
    ParseTree dec = to_decoupled(tree);
    CHECK(text::split_words(leaf_text(dec.root)) == oracle_decoupled_tokens(tree.root));
    CHECK(label_depth(dec.root) == label_depth(tree.root));
  }
}

TEST_CASE("stats: depth, flatness, length") {
  ParseTree nav = parse_linearized(kNavTree);
  nav.utterance = "Look up directions to the nearest parking near S Beritania Street.";
  TreeStats stats = compute_stats(nav);
  CHECK(stats.depth == 6);
  CHECK_FALSE(stats.is_flat);
  CHECK(stats.length == 11);

  ParseTree single = parse_linearized("[IN:X ]");
  single.utterance = "hi";
  CHECK(compute_stats(single).depth == 1);
  CHECK(compute_stats(single).is_flat);

  ParseTree flat = parse_linearized("[IN:X [SL:Y a b ] ]");
  flat.utterance = "a b";
  TreeStats fs = compute_stats(flat);
  CHECK(fs.depth == 2);
  CHECK(fs.is_flat);
  CHECK(fs.length == 2);

  TreeGen gen(5);
  for (int i = 0; i < 100; ++i) {
    ParseTree t = gen.tree();
    TreeStats s = compute_stats(t);
    CHECK(s.depth == oracle_depth(t));
    CHECK(s.is_flat == (s.depth <= 2));
  }
}

TEST_CASE("alignment check tolerates trailing punctuation") {
  ParseTree nav = parse_linearized(kNavTree);
  nav.utterance = "Look up directions to the nearest parking near S Beritania Street.";
  CHECK(check_alignment(nav));
  nav.utterance = "totally different words";
  CHECK_FALSE(check_alignment(nav));
}

TEST_CASE("fuzzed strings never crash and always raise typed errors") {
  TreeGen gen(23);
  std::mt19937_64 rng(29);
  int malformed = 0;
  for (int i = 0; i < 500; ++i) {
    std::string s = serialize_linearized(gen.tree());
    // Corrupt: delete, insert, or flip a few characters.
    int edits = 1 + static_cast<int>(rng() % 3);
    for (int e = 0; e < edits && !s.empty(); ++e) {
      size_t at = rng() % s.size();
      switch (rng() % 3) {
        case 0: s.erase(at, 1); break;
        case 1: s.insert(at, 1, "[]IN:SL x"[rng() % 9]); break;
        default: s[at] = static_cast<char>(32 + rng() % 90); break;
      }
    }
    try {
      ParseTree t = parse_linearized(s);
      // Accidentally still valid: must round-trip.
      CHECK(serialize_linearized(parse_linearized(serialize_linearized(t))) ==
            serialize_linearized(t));
    } catch (const TreeParseError&) {
      ++malformed;  // typed error is the expected outcome
    }
  }
  CHECK(malformed > 0);
}

TEST_CASE("structural validation flags hand-built violations") {
  ParseTree good = parse_linearized("[IN:A [SL:B x ] ]");
  CHECK(validate_tree(good).empty());

  ParseTree bad = good;
  bad.root.kind = NodeKind::Slot;
  CHECK_FALSE(validate_tree(bad).empty());

  ParseTree mislabeled = good;
  mislabeled.root.children[0].label = "IN:B";  // slot node with intent label
  CHECK_FALSE(validate_tree(mislabeled).empty());

  ParseTree token_kids = good;
  TreeNode tok;
  tok.kind = NodeKind::Token;
  tok.label = "y";
  token_kids.root.children[0].children[0].children.push_back(tok);
  CHECK_FALSE(validate_tree(token_kids).empty());
}
