#include <sstream>

#include "doctest.h"
#include "glore/deppath.hpp"
#include "support/synthdata.hpp"

using namespace glore;

namespace {

std::vector<SentenceGraph> parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_conllu(in);
}

std::string conllu_line(int idx, const std::string& surf, int head, const std::string& rel) {
  return std::to_string(idx) + "\t" + surf + "\t_\t_\t_\t_\t" + std::to_string(head) + "\t" +
         rel + "\t_\t_\n";
}

// Henry_Ford founded Ford_Motor_Company (mentions on tokens 1 and 3)
SentenceGraph founded_sentence() {
  SentenceGraph s;
  s.tokens = {{1, "Henry_Ford", 2, "nsubj"},
              {2, "founded", 0, "root"},
              {3, "Ford_Motor_Company", 2, "dobj"}};
  s.mentions = {{1, 1, "HenryFord"}, {3, 3, "FordMotorCo"}};
  s.sentence_id = "ford";
  return s;
}

}  // namespace

TEST_CASE("parse_conllu minimal block") {
  std::string text = conllu_line(1, "Ford", 2, "nsubj") + conllu_line(2, "founded", 0, "root") +
                     conllu_line(3, "Company", 2, "dobj") + "\n";
  auto sentences = parse_text(text);
  REQUIRE(sentences.size() == 1);
  CHECK(sentences[0].tokens.size() == 3);
  CHECK(sentences[0].tokens[1].head == 0);
  CHECK(sentences[0].sentence_id == "s1");
}

TEST_CASE("parse_conllu rejects cyclic heads") {
  std::string text = conllu_line(1, "a", 2, "x") + conllu_line(2, "b", 3, "x") +
                     conllu_line(3, "c", 1, "x") + "\n";
  CHECK_THROWS_WITH_AS(parse_text(text), doctest::Contains("s1"), Error);
}

TEST_CASE("parse_conllu empty input") {
  auto sentences = parse_text("");
  CHECK(sentences.empty());
}

TEST_CASE("parse_conllu mentions, sent_id, and errors") {
  SUBCASE("mentions and sent_id round through") {
    std::string text = "# sent_id = doc1.s7\n" + conllu_line(1, "Ford", 2, "nsubj") +
                       conllu_line(2, "founded", 0, "root") + conllu_line(3, "Acme", 2, "dobj") +
                       "#MENTION\t1\t1\tford\n#MENTION\t3\t3\tacme\n\n";
    auto sentences = parse_text(text);
    REQUIRE(sentences.size() == 1);
    CHECK(sentences[0].sentence_id == "doc1.s7");
    REQUIRE(sentences[0].mentions.size() == 2);
    CHECK(sentences[0].mentions[0].entity_id == "ford");
  }
  SUBCASE("wrong column count is an error with the line number") {
    CHECK_THROWS_WITH_AS(parse_text("1\tFord\t2\tnsubj\n\n"), doctest::Contains("line 1"), Error);
  }
  SUBCASE("mention span out of bounds") {
    std::string text = conllu_line(1, "a", 0, "root") + "#MENTION\t1\t4\tx\n\n";
    CHECK_THROWS_AS(parse_text(text), Error);
  }
  SUBCASE("overlapping mentions") {
    std::string text = conllu_line(1, "a", 2, "x") + conllu_line(2, "b", 0, "root") +
                       "#MENTION\t1\t2\tx\n#MENTION\t2\t2\ty\n\n";
    CHECK_THROWS_AS(parse_text(text), Error);
  }
  SUBCASE("multiword ranges and empty nodes are skipped") {
    std::string text = "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n" + conllu_line(1, "a", 2, "x") +
                       conllu_line(2, "b", 0, "root") + "\n";
    auto sentences = parse_text(text);
    REQUIRE(sentences.size() == 1);
    CHECK(sentences[0].tokens.size() == 2);
  }
  SUBCASE("multiple roots rejected") {
    std::string text = conllu_line(1, "a", 0, "root") + conllu_line(2, "b", 0, "root") + "\n";
    CHECK_THROWS_AS(parse_text(text), Error);
  }
}

TEST_CASE("mention_head selects the span token with an external head") {
  SentenceGraph s;
  // 7 tokens; span {3,4}: head(3)=4 internal, head(4)=7 external -> 4
  s.tokens = {{1, "t1", 7, "a"}, {2, "t2", 7, "a"}, {3, "t3", 4, "a"}, {4, "t4", 7, "a"},
              {5, "t5", 7, "a"}, {6, "t6", 7, "a"}, {7, "t7", 0, "root"}};
  s.sentence_id = "mh";
  CHECK(mention_head(s, {3, 4, "x"}) == 4);
  // single-token mention
  CHECK(mention_head(s, {2, 2, "x"}) == 2);
  // span {1,2}: both heads external -> leftmost
  SentenceGraph s2;
  s2.tokens = {{1, "t1", 5, "a"}, {2, "t2", 6, "a"}, {3, "t3", 5, "a"}, {4, "t4", 5, "a"},
               {5, "t5", 0, "root"}, {6, "t6", 5, "a"}};
  s2.sentence_id = "mh2";
  CHECK(mention_head(s2, {1, 2, "x"}) == 1);
}

TEST_CASE("extract_path reproduces the canonical founder example") {
  SentenceGraph s = founded_sentence();
  auto path = extract_path(s, s.mentions[1], s.mentions[0]);  // company -> person
  REQUIRE(path.has_value());
  CHECK(render_relation(*path) == "<-dobj> founded <nsubj>");

  auto back = extract_path(s, s.mentions[0], s.mentions[1]);  // person -> company
  REQUIRE(back.has_value());
  CHECK(render_relation(*back) == "<-nsubj> founded <dobj>");
  CHECK(*back == reverse_relation(*path));
}

TEST_CASE("extract_path blocks paths through other entities") {
  // chain a -> b -> c; b sits on the a..c path
  SentenceGraph s;
  s.tokens = {{1, "a", 2, "nsubj"}, {2, "b", 0, "root"}, {3, "c", 2, "dobj"}};
  s.mentions = {{1, 1, "A"}, {2, 2, "B"}, {3, 3, "C"}};
  s.sentence_id = "blocked";
  CHECK_FALSE(extract_path(s, s.mentions[0], s.mentions[2]).has_value());
  // the adjacent pair is still fine
  CHECK(extract_path(s, s.mentions[0], s.mentions[1]).has_value());
}

TEST_CASE("extract_path matches the BFS oracle on random trees") {
  Rng rng(101);
  for (int trial = 0; trial < 400; ++trial) {
    SentenceGraph s = synth::random_sentence(rng, 12);
    int n = static_cast<int>(s.tokens.size());
    int a = 1 + static_cast<int>(rng.index(n));
    int b = 1 + static_cast<int>(rng.index(n));
    if (a == b) continue;
    s.mentions = {{a, a, "A"}, {b, b, "B"}};
    auto got = extract_path(s, s.mentions[0], s.mentions[1]);
    auto want = synth::bfs_path_oracle(s, s.mentions[0], s.mentions[1]);
    REQUIRE(got.has_value() == want.has_value());
    if (got) CHECK(render_relation(*got) == render_relation(*want));
  }
}

TEST_CASE("extract_path is antisymmetric under argument swap") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    SentenceGraph s = synth::random_sentence(rng, 10);
    int n = static_cast<int>(s.tokens.size());
    int a = 1 + static_cast<int>(rng.index(n));
    int b = 1 + static_cast<int>(rng.index(n));
    if (a == b) continue;
    s.mentions = {{a, a, "A"}, {b, b, "B"}};
    auto fwd = extract_path(s, s.mentions[0], s.mentions[1]);
    auto bwd = extract_path(s, s.mentions[1], s.mentions[0]);
    REQUIRE(fwd.has_value());
    REQUIRE(bwd.has_value());
    CHECK(*bwd == reverse_relation(*fwd));
    CHECK(relation_length(*fwd) == relation_length(*bwd));
  }
}

TEST_CASE("reverse_relation examples and involution") {
  TextualRelation t = parse_relation("<-dobj> founded <nsubj>");
  CHECK(render_relation(reverse_relation(t)) == "<-nsubj> founded <dobj>");

  TextualRelation palindrome = parse_relation("<-conj> apples <conj>");
  CHECK(reverse_relation(palindrome) == palindrome);

  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    TextualRelation r = synth::sample_pattern_relation(static_cast<int>(rng.index(4)), rng);
    CHECK(reverse_relation(reverse_relation(r)) == r);
    CHECK(is_symmetric(r) == (render_relation(r) == render_relation(reverse_relation(r))));
  }
}

TEST_CASE("is_symmetric examples") {
  CHECK(is_symmetric(parse_relation("<-conj> apples <conj>")));
  CHECK_FALSE(is_symmetric(parse_relation("<-dobj> founded <nsubj>")));
  CHECK_FALSE(is_symmetric(parse_relation("<nmod>")));
}

TEST_CASE("relation_length counts lexical and dependency elements alike") {
  CHECK(relation_length(parse_relation("<-dobj> founded <nsubj>")) == 3);
  CHECK(relation_length(parse_relation("<nmod>")) == 1);
  TextualRelation t;
  for (int i = 0; i < 4; ++i) {
    t.elements.push_back(PathElement::dep("d" + std::to_string(i), DepDirection::up));
    t.elements.push_back(PathElement::lexical("w" + std::to_string(i)));
  }
  t.elements.push_back(PathElement::dep("last", DepDirection::down));
  CHECK(relation_length(t) == 9);
}

TEST_CASE("render and parse") {
  SUBCASE("canonical example") {
    TextualRelation t;
    t.elements = {PathElement::dep("dobj", DepDirection::up), PathElement::lexical("founded"),
                  PathElement::dep("nsubj", DepDirection::down)};
    CHECK(render_relation(t) == "<-dobj> founded <nsubj>");
  }
  SUBCASE("single element with subtype label") {
    TextualRelation t = parse_relation("<nmod:in>");
    REQUIRE(t.elements.size() == 1);
    CHECK(t.elements[0].kind == PathElement::Kind::dep);
    CHECK(t.elements[0].text == "nmod:in");
    CHECK(t.elements[0].direction == DepDirection::down);
  }
  SUBCASE("rejects relations without a leading edge") {
    CHECK_THROWS_AS(parse_relation("founded"), Error);
    CHECK_THROWS_AS(parse_relation("<-dobj> founded"), Error);
    CHECK_THROWS_AS(parse_relation(""), Error);
  }
  SUBCASE("rejects malformed bracket tokens") {
    CHECK_THROWS_AS(parse_relation("<>"), Error);
    CHECK_THROWS_AS(parse_relation("<->"), Error);
    CHECK_THROWS_AS(parse_relation("<-dobj> <foo<bar>"), Error);
    CHECK_THROWS_AS(parse_relation("<nsubj"), Error);
  }
  SUBCASE("round-trip is the identity on random relations") {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
      TextualRelation t = synth::sample_pattern_relation(static_cast<int>(rng.index(6)), rng);
      CHECK(parse_relation(render_relation(t)) == t);
    }
  }
}

TEST_CASE("parse_relation never crashes on junk, and accepts what it parses") {
  Rng rng(123);
  const std::string alphabet = "<>- abcxyz:_.";
  for (int trial = 0; trial < 500; ++trial) {
    std::string junk;
    size_t len = rng.index(24);
    for (size_t i = 0; i < len; ++i) junk.push_back(alphabet[rng.index(alphabet.size())]);
    try {
      TextualRelation rel = parse_relation(junk);
      // anything accepted must round-trip
      CHECK(parse_relation(render_relation(rel)) == rel);
    } catch (const Error&) {
      // rejection is fine
    }
  }
}

TEST_CASE("extract_sentence_triples emits both ordered directions") {
  SentenceGraph s = founded_sentence();
  auto triples = extract_sentence_triples(s);
  REQUIRE(triples.size() == 2);
  CHECK(triples[0].subject == "HenryFord");
  CHECK(triples[0].rendered == "<-nsubj> founded <dobj>");
  CHECK(triples[0].object == "FordMotorCo");
  CHECK(triples[1].subject == "FordMotorCo");
  CHECK(triples[1].rendered == "<-dobj> founded <nsubj>");
  CHECK(triples[1].sentence_id == "ford");
}

TEST_CASE("lexical surfaces are lowercased and sanitized") {
  SentenceGraph s;
  s.tokens = {{1, "a", 2, "nsubj"}, {2, "FOUNDED<X>", 0, "root"}, {3, "c", 2, "dobj"}};
  s.mentions = {{1, 1, "A"}, {3, 3, "C"}};
  s.sentence_id = "norm";
  auto path = extract_path(s, s.mentions[0], s.mentions[1]);
  REQUIRE(path.has_value());
  CHECK(render_relation(*path) == "<-nsubj> foundedx <dobj>");
  CHECK(parse_relation(render_relation(*path)) == *path);
}
