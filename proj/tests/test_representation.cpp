#include <doctest.h>

#include "nester/representation.hpp"

using namespace nester;

namespace {

EmbeddingTable tiny_table(Index dim) {
  EmbeddingTable t;
  t.dim = dim;
  t.tokens = {"<unk>", "ab", "ba", "cat", "dog"};
  for (size_t i = 0; i < t.tokens.size(); ++i) t.index.emplace(t.tokens[i], static_cast<Index>(i));
  std::mt19937_64 rng(99);
  t.vectors = uniform_init(static_cast<Index>(t.tokens.size()), dim, dim, rng);
  t.vectors.row(0).setZero();
  return t;
}

CharInventory tiny_chars() {
  CharInventory inv;
  for (unsigned char c : std::string("abcdogt")) inv.add(c);
  return inv;
}

Representation make_repr(Real dropout_rate = 0.0, std::uint64_t seed = 4) {
  ReprConfig cfg;
  cfg.d_w = 6;
  cfg.d_c = 4;
  cfg.d_x = 8;
  cfg.dropout_rate = dropout_rate;
  std::mt19937_64 rng(seed);
  return Representation(cfg, tiny_table(6), tiny_chars(), rng);
}

}  // namespace

TEST_SUITE("representation") {

TEST_CASE("config invariants") {
  ReprConfig cfg;
  cfg.d_c = 5;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  cfg.d_c = 4;
  cfg.d_x = 7;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  cfg.d_x = 8;
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), DataError);
}

TEST_CASE("char encoding is deterministic, case-sensitive and total") {
  Representation repr = make_repr();
  Mat a1 = repr.char_encode("ab").value();
  Mat a2 = repr.char_encode("ab").value();
  CHECK(a1 == a2);
  Mat b = repr.char_encode("ba").value();
  CHECK((a1 - b).cwiseAbs().maxCoeff() > 1e-12);
  // unknown characters map to the unknown embedding, casing preserved
  CHECK_NOTHROW(repr.char_encode("AB!"));
  CHECK((repr.char_encode("AB").value() - a1).cwiseAbs().maxCoeff() > 1e-12);
  CHECK_THROWS_AS(repr.char_encode(""), std::invalid_argument);
}

TEST_CASE("token representation layout") {
  Representation repr = make_repr();
  Tensor t = repr.token_represent({"ab", "zzz", "cat"});
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 6 + 4);
  // known token carries its embedding row in the word slot
  Mat expect = repr.word_emb.value().row(1);
  CHECK(t.value().row(0).head(6) == expect.row(0));
  // out-of-vocabulary token falls back to the unknown row
  CHECK(t.value().row(1).head(6) == repr.word_emb.value().row(0));
}

TEST_CASE("context encoding shape and evaluation-mode purity") {
  Representation repr = make_repr(0.5);
  std::mt19937_64 rng(1);
  std::vector<std::string> tokens = {"ab", "cat", "dog", "ba"};
  Tensor x1 = repr.encode(tokens, false, rng);
  Tensor x2 = repr.encode(tokens, false, rng);
  CHECK(x1.rows() == 4);
  CHECK(x1.cols() == 8);
  CHECK(x1.value() == x2.value());

  // single-token sentence works
  Tensor single = repr.encode({"cat"}, false, rng);
  CHECK(single.rows() == 1);

  // training mode consumes randomness (dropout masks differ)
  Tensor d1 = repr.encode(tokens, true, rng);
  Tensor d2 = repr.encode(tokens, true, rng);
  CHECK((d1.value() - d2.value()).cwiseAbs().maxCoeff() > 1e-12);
}

TEST_CASE("backward direction carries information leftward") {
  Representation repr = make_repr();
  std::mt19937_64 rng(1);
  Mat base = repr.encode({"ab", "cat", "dog"}, false, rng).value();
  Mat changed = repr.encode({"ab", "cat", "ba"}, false, rng).value();
  // perturbing the last token must perturb the first row
  CHECK((base.row(0) - changed.row(0)).cwiseAbs().maxCoeff() > 1e-12);
}

TEST_CASE("mirrored parameters reproduce the reversed encoding") {
  Representation repr = make_repr();
  Representation mirrored = make_repr();
  // swap the two context directions
  mirrored.ctx_fwd = repr.ctx_bwd;
  mirrored.ctx_bwd = repr.ctx_fwd;

  std::mt19937_64 rng(1);
  std::vector<std::string> tokens = {"ab", "cat", "dog", "ba"};
  std::vector<std::string> reversed(tokens.rbegin(), tokens.rend());

  Mat t_fwd = repr.token_represent(tokens).value();
  Mat x = repr.context_encode(repr.token_represent(tokens), false, rng).value();
  Mat xr = mirrored.context_encode(mirrored.token_represent(reversed), false, rng).value();

  const Index n = 4, h = 4;
  for (Index i = 0; i < n; ++i) {
    // row i of x = [fwd(i); bwd(i)]; mirrored run reversed: row (n-1-i) = [bwd(i); fwd(i)]
    Mat a(1, 2 * h);
    a << x.row(i).tail(h), x.row(i).head(h);
    CHECK((a - xr.row(n - 1 - i)).cwiseAbs().maxCoeff() < 1e-9);
  }
  (void)t_fwd;
}

TEST_CASE("char cache reuses subgraphs within a batch") {
  Representation repr = make_repr();
  EncodeCache cache;
  Tensor a = repr.char_encode("ab", &cache);
  Tensor b = repr.char_encode("ab", &cache);
  CHECK(a.node().get() == b.node().get());
}

}  // TEST_SUITE
