#include <doctest.h>

#include "nester/data.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

using namespace nester;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/nester_data_") + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

/// Independent generator of random pairwise-disjoint span sets.
std::vector<EntitySpan> random_disjoint_spans(Index n, Index num_types, std::mt19937_64& rng) {
  std::vector<EntitySpan> spans;
  std::uniform_int_distribution<Index> type(0, num_types - 1);
  std::uniform_int_distribution<Index> len(1, 3);
  std::bernoulli_distribution use(0.5);
  Index at = 0;
  while (at < n) {
    Index l = std::min(len(rng), n - at);
    if (use(rng)) spans.push_back({at, at + l - 1, type(rng)});
    at += l + (use(rng) ? 1 : 0);
  }
  return spans;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("split_layers on a three-level mention") {
  // Outermost [0,8], with [2,8] and [6,8] nested inside.
  std::vector<EntitySpan> spans = {{0, 8, 0}, {2, 8, 1}, {6, 8, 1}};
  LayerSplit split = split_layers(spans);
  REQUIRE(split.outermost.size() == 1);
  CHECK(split.outermost[0] == spans[0]);
  REQUIRE(split.inner.size() == 2);
  CHECK(std::set<EntitySpan>(split.inner.begin(), split.inner.end()) ==
        std::set<EntitySpan>{spans[1], spans[2]});
}

TEST_CASE("split_layers simple cases") {
  LayerSplit single = split_layers({{1, 3, 0}});
  CHECK(single.outermost.size() == 1);
  CHECK(single.inner.empty());

  LayerSplit two = split_layers({{0, 4, 0}, {0, 2, 1}, {3, 4, 1}});
  CHECK(two.outermost.size() == 1);
  CHECK(two.inner.size() == 2);
}

TEST_CASE("split_layers rejects crossing and duplicated outermost spans") {
  CHECK_THROWS_AS(split_layers({{0, 3, 0}, {2, 5, 0}}), DataError);
  CHECK_THROWS_AS(split_layers({{0, 3, 0}, {0, 3, 1}}), DataError);
  // crossing spans are fine when both sit under one outermost span
  CHECK_NOTHROW(split_layers({{0, 5, 0}, {0, 3, 1}, {2, 4, 1}}));
}

TEST_CASE("split_layers partitions and inner spans are contained") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Index n = std::uniform_int_distribution<Index>(1, 12)(rng);
    auto outer = random_disjoint_spans(n, 3, rng);
    std::vector<EntitySpan> all = outer;
    // nest a random sub-span inside some outer spans
    for (const auto& o : outer) {
      if (o.length() >= 2 && std::bernoulli_distribution(0.6)(rng)) {
        Index s = std::uniform_int_distribution<Index>(o.start, o.end)(rng);
        Index e = std::uniform_int_distribution<Index>(s, o.end)(rng);
        if (!(s == o.start && e == o.end)) all.push_back({s, e, 2});
      }
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    LayerSplit split = split_layers(all);
    CHECK(split.outermost.size() + split.inner.size() == all.size());
    std::set<EntitySpan> uni(split.outermost.begin(), split.outermost.end());
    uni.insert(split.inner.begin(), split.inner.end());
    CHECK(uni == std::set<EntitySpan>(all.begin(), all.end()));
    for (const auto& e : split.inner) {
      bool contained = std::any_of(split.outermost.begin(), split.outermost.end(),
                                   [&](const EntitySpan& o) { return strictly_contains(o, e); });
      CHECK(contained);
    }
  }
}

TEST_CASE("bioes encoding examples") {
  // span [1,3] of type 1 over 5 tokens, two types
  auto labels = bioes_encode({{1, 3, 1}}, 5, 2);
  const Index o = 8;
  CHECK(labels == std::vector<Index>{o, 4, 5, 6, o});  // O B-1 I-1 E-1 O
  CHECK(bioes_encode({{2, 2, 1}}, 3, 2) == std::vector<Index>{o, o, 7});  // singleton = S
  CHECK(bioes_encode({}, 2, 2) == std::vector<Index>{o, o});
  CHECK_THROWS_AS(bioes_encode({{0, 2, 0}, {2, 3, 1}}, 5, 2), DataError);
}

TEST_CASE("bioes decode handles every length-2 pattern") {
  const Index num_types = 2;
  const Index k = 4 * num_types + 1;
  // Enumerate all label pairs: decode must round-trip exactly when the
  // pair is a well-formed BIOES sequence, and only then.
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) {
      std::vector<Index> seq = {a, b};
      auto spans = bioes_decode(seq, num_types);
      bool well_formed = false;
      std::vector<EntitySpan> expect;
      auto role = [&](Index t) { return t == 8 ? 'O' : "BIES"[t % 4]; };
      char ra = role(a), rb = role(b);
      if ((ra == 'O' || ra == 'S') && (rb == 'O' || rb == 'S')) {
        well_formed = true;
        if (ra == 'S') expect.push_back({0, 0, a / 4});
        if (rb == 'S') expect.push_back({1, 1, b / 4});
      } else if (ra == 'B' && rb == 'E' && a / 4 == b / 4) {
        well_formed = true;
        expect.push_back({0, 1, a / 4});
      }
      if (well_formed) {
        CHECK(spans == expect);
        CHECK(bioes_encode(spans, 2, num_types) == seq);
      } else {
        CHECK(bioes_encode(spans, 2, num_types) != seq);
      }
    }
  }
  CHECK(bioes_decode({5, 6}, 2).empty());  // I-1 E-1
  auto two = bioes_decode({3, 7}, 2);      // S-0 S-1
  REQUIRE(two.size() == 2);
  CHECK(two[0] == EntitySpan{0, 0, 0});
  CHECK(two[1] == EntitySpan{1, 1, 1});
}

TEST_CASE("bioes decode of encode is the identity on random disjoint sets") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    Index n = std::uniform_int_distribution<Index>(1, 14)(rng);
    auto spans = random_disjoint_spans(n, 3, rng);
    auto labels = bioes_encode(spans, n, 3);
    auto back = bioes_decode(labels, 3);
    std::sort(spans.begin(), spans.end());
    std::sort(back.begin(), back.end());
    CHECK(back == spans);
  }
}

TEST_CASE("bioes decode never throws on random label sequences") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 500; ++trial) {
    Index n = std::uniform_int_distribution<Index>(1, 12)(rng);
    std::vector<Index> labels(n);
    for (auto& l : labels) l = std::uniform_int_distribution<Index>(0, 12)(rng);
    CHECK_NOTHROW(bioes_decode(labels, 3));
  }
}

TEST_CASE("corpus loading") {
  std::string path = temp_path("corpus.jsonl");
  write_file(path,
             R"({"tokens": ["a", "b"], "entities": [{"start": 0, "end": 1, "type": "PER"}]})"
             "\n");
  Corpus c = load_corpus(path);
  REQUIRE(c.sentences.size() == 1);
  CHECK(c.sentences[0].tokens == std::vector<std::string>{"a", "b"});
  REQUIRE(c.sentences[0].entities.size() == 1);
  CHECK(c.sentences[0].entities[0] == EntitySpan{0, 1, 0});
  CHECK(c.labels.num_types() == 1);
  CHECK(c.labels.type_name(0) == "PER");
  CHECK(c.labels.type_name(1) == "O");
}

TEST_CASE("corpus validation errors carry line numbers") {
  std::string path = temp_path("bad_span.jsonl");
  write_file(path, R"({"tokens": ["a", "b"], "entities": [{"start": 0, "end": 2, "type": "PER"}]})"
                   "\n");
  try {
    load_corpus(path);
    CHECK(false);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }

  write_file(path, "{not json\n");
  CHECK_THROWS_AS(load_corpus(path), DataError);
}

TEST_CASE("label inventory is sorted with O last") {
  std::string path = temp_path("types.jsonl");
  write_file(path,
             R"({"tokens": ["x", "y", "z"], "entities": [{"start": 0, "end": 0, "type": "ORG"}, {"start": 1, "end": 1, "type": "GPE"}, {"start": 2, "end": 2, "type": "PER"}]})"
             "\n");
  Corpus c = load_corpus(path);
  CHECK(c.labels.types() == std::vector<std::string>{"GPE", "ORG", "PER"});
  CHECK(c.labels.o_id() == 3);
  CHECK(c.labels.bioes_name(0) == "B-GPE");
  CHECK(c.labels.bioes_name(c.labels.bioes_o()) == "O");
}

TEST_CASE("embedding loading") {
  std::string path = temp_path("emb.txt");
  write_file(path, "The 0.5 -1.5 2.0\ncat 0.1 0.2 0.3\n");
  EmbeddingTable t = EmbeddingTable::load(path, 3);
  CHECK(t.tokens.size() == 3);  // <unk> + 2
  CHECK(t.lookup("THE") == 1);  // lookup lowercases
  CHECK(t.lookup("dog") == 0);  // unknown
  CHECK(t.vectors(1, 1) == doctest::Approx(-1.5));

  write_file(path, "cat 0.1 0.2\n");
  try {
    EmbeddingTable::load(path, 3);
    CHECK(false);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("expected 3") != std::string::npos);
  }
}

TEST_CASE("gold score tensor is one-hot with inner spans only") {
  std::vector<EntitySpan> inner = {{0, 1, 0}, {2, 2, 1}};
  GoldScoreTensor g = build_gold_scores(inner, 3, 2);
  Mat onehot = g.onehot();
  for (Index c = 0; c < 9; ++c) CHECK(onehot.row(c).sum() == 1.0);
  CHECK(g.type_at(0, 1) == 0);
  CHECK(g.type_at(2, 2) == 1);
  CHECK(g.type_at(0, 0) == 2);  // O
  CHECK(g.type_at(1, 0) == 2);  // below diagonal stays O

  // duplicate (start, end) with two types: first wins, warning emitted
  std::ostringstream warn;
  GoldScoreTensor g2 = build_gold_scores({{0, 1, 1}, {0, 1, 0}}, 2, 2, &warn);
  CHECK(g2.type_at(0, 1) == 1);
  CHECK(warn.str().find("warning") != std::string::npos);
}

TEST_CASE("save_corpus round-trips through load_corpus") {
  Corpus c;
  c.labels = LabelInventory({"GPE", "PER"});
  AnnotatedSentence s;
  s.tokens = {"ada", "met", "bo"};
  s.entities = {{0, 0, 1}, {2, 2, 0}};
  c.sentences.push_back(s);
  std::string path = temp_path("round.jsonl");
  save_corpus(c, path);
  Corpus back = load_corpus(path);
  REQUIRE(back.sentences.size() == 1);
  CHECK(back.sentences[0].tokens == s.tokens);
  CHECK(back.sentences[0].entities == s.entities);
}

}  // TEST_SUITE
