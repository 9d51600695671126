#include <doctest.h>

#include <filesystem>

#include "test_support.hpp"
#include "tfhtmm/errors.hpp"
#include "tfhtmm/trees.hpp"

using namespace tfhtmm;
using tfhtmm::testing::parse_tree;

TEST_CASE("parse a single leaf") {
  const TreeCorpus c = parse_corpus("L=3 M=4\n(0)\n");
  REQUIRE(c.trees.size() == 1);
  CHECK(c.max_degree == 3);
  CHECK(c.alphabet_size == 4);
  CHECK(c.trees[0].size() == 1);
  CHECK(c.trees[0].label(c.trees[0].root()) == 0);
  CHECK_FALSE(c.class_labels.has_value());
}

TEST_CASE("parse full fan-out") {
  const auto t = parse_tree("(3 (0) (0) (0))", 3, 4);
  const auto& root = t.node(t.root());
  CHECK(root.label == 3);
  for (int s = 0; s < 3; ++s) {
    REQUIRE(root.children[s].has_value());
    CHECK(t.node(*root.children[s]).position == s);
    CHECK(t.is_leaf(*root.children[s]));
  }
  CHECK(t.occupied_slots(t.root()) == 3);
}

TEST_CASE("absent slots") {
  const auto t = parse_tree("(1 _ (0) _)", 3, 4);
  const auto& root = t.node(t.root());
  CHECK_FALSE(root.children[0].has_value());
  REQUIRE(root.children[1].has_value());
  CHECK_FALSE(root.children[2].has_value());
  CHECK(t.occupied_slots(t.root()) == 1);
}

TEST_CASE("comments, symbols and class suffixes") {
  const TreeCorpus c = parse_corpus(
      "# corpus\nL=2 M=3 CLASSES=2\nSYM 0 leaf\nSYM 2 big node\n\n(2 (0) (1)) | 1\n(0) | 0\n");
  CHECK(c.trees.size() == 2);
  REQUIRE(c.class_labels.has_value());
  CHECK(*c.class_labels == std::vector<int>{1, 0});
  CHECK(c.num_classes() == 2);
  CHECK(c.symbols.at(2) == "big node");
  CHECK(c.select_class(1).trees.size() == 1);
}

TEST_CASE("parse errors carry line numbers") {
  try {
    parse_corpus("L=2 M=2\n(0)\n(1 (0)\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_corpus("(0)\n"), ParseError);
  CHECK_THROWS_AS(parse_corpus("L=2\n(0)\n"), ParseError);
  CHECK_THROWS_AS(parse_corpus("L=2 M=2\n(0) | 0\n(1)\n"), ParseError);
  CHECK_THROWS_AS(parse_corpus("L=2 M=2\n(0) x\n"), ParseError);
}

TEST_CASE("domain errors for labels and slots") {
  CHECK_THROWS_AS(parse_corpus("L=2 M=2\n(2)\n"), DomainError);
  CHECK_THROWS_AS(parse_corpus("L=2 M=2\n(1 (0) (0) (0))\n"), DomainError);
  CHECK_THROWS_AS(parse_corpus("L=2 M=2 CLASSES=2\n(0) | 2\n"), DomainError);
}

TEST_CASE("structural validation") {
  std::vector<Node> two(2);
  two[0].children = {NodeId{1}};
  two[1].parent = NodeId{0};
  two[1].position = 1;  // wrong slot
  CHECK_THROWS_AS(LabelledTree(two, 0, 2, 1), StructureError);

  std::vector<Node> roots(2);
  CHECK_THROWS_AS(LabelledTree(roots, 0, 2, 1), StructureError);
}

TEST_CASE("leaves") {
  CHECK(parse_tree("(0)", 2, 2).leaves() == std::vector<NodeId>{0});
  const auto t = parse_tree("(1 (0) (0))", 2, 2);
  const auto lv = leaves(t);
  CHECK(lv.size() == 2);
  for (NodeId u : lv) CHECK(u != t.root());
  const auto chain = parse_tree("(1 (1 (0)))", 2, 2);
  REQUIRE(chain.leaves().size() == 1);
  CHECK(chain.node(chain.leaves()[0]).children[0] == std::nullopt);
  CHECK(chain.node(*chain.node(chain.leaves()[0]).parent).parent == chain.root());
}

TEST_CASE("bottom-up order") {
  const auto chain = parse_tree("(1 (1 (0)))", 2, 2);
  const auto order = bottom_up_order(chain);
  REQUIRE(order.size() == 3);
  CHECK(order.back() == chain.root());
  CHECK(*chain.node(order[0]).parent == order[1]);
  CHECK(bottom_up_order(parse_tree("(0)", 2, 2)) == std::vector<NodeId>{0});

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto t = testing::random_tree(1 + static_cast<int>(sample_index(30, rng)), 3, 4, rng);
    std::vector<std::size_t> at(t.size());
    const auto& ord = t.bottom_up_order();
    REQUIRE(ord.size() == t.size());
    for (std::size_t k = 0; k < ord.size(); ++k) at[ord[k]] = k;
    for (NodeId u = 0; u < t.size(); ++u)
      if (t.node(u).parent) CHECK(at[*t.node(u).parent] > at[u]);
  }
}

TEST_CASE("serialise and parse round-trip") {
  Rng rng(9);
  TreeCorpus c;
  c.max_degree = 3;
  c.alphabet_size = 5;
  c.class_count = 2;
  c.symbols[1] = "a";
  std::vector<int> cls;
  for (int i = 0; i < 100; ++i) {
    c.trees.push_back(testing::random_tree(1 + static_cast<int>(sample_index(20, rng)), 3, 5, rng));
    cls.push_back(i % 2);
  }
  c.class_labels = cls;
  const TreeCorpus back = parse_corpus(serialise_corpus(c));
  CHECK(back.trees.size() == c.trees.size());
  CHECK(back.class_labels == c.class_labels);
  CHECK(back.symbols == c.symbols);
  for (std::size_t i = 0; i < c.trees.size(); ++i) {
    CHECK(serialise_tree(back.trees[i]) == serialise_tree(c.trees[i]));
    CHECK(back.trees[i].size() == c.trees[i].size());
  }
  const TreeCorpus again = parse_corpus(serialise_corpus(back));
  for (std::size_t i = 0; i < c.trees.size(); ++i) CHECK(again.trees[i] == back.trees[i]);
  CHECK(serialise_corpus(back) == serialise_corpus(c));
}

TEST_CASE("with_labels keeps the shape") {
  const auto t = parse_tree("(1 (0) _ (1 (0)))", 3, 2);
  const auto relabelled = t.with_labels(std::vector<int>(t.size(), 1));
  CHECK(relabelled.labels() == std::vector<int>(t.size(), 1));
  CHECK(relabelled.bottom_up_order() == t.bottom_up_order());
  CHECK_THROWS_AS(t.with_labels({0}), DomainError);
}

TEST_CASE("corpus files") {
  const auto dir = std::filesystem::temp_directory_path() / "tfhtmm_trees_test";
  const auto path = (dir / "c.trees").string();
  const TreeCorpus c = parse_corpus("L=2 M=2\n(1 (0) (0))\n");
  write_corpus_file(path, c);
  CHECK(read_corpus_file(path).trees[0] == c.trees[0]);
  CHECK_THROWS_AS(read_corpus_file((dir / "missing.trees").string()), IoError);
  std::filesystem::remove_all(dir);
}
