#include <doctest.h>

#include "nester/graph.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace nester;

namespace {

Mat random_mat(Index rows, Index cols, std::mt19937_64& rng, Real lo = -1.0, Real hi = 1.0) {
  std::uniform_real_distribution<Real> dist(lo, hi);
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

GraphModule tiny_module(Index d_x, Index d_f, Index num_labels, std::uint64_t seed,
                        bool linear = false) {
  GraphConfig cfg;
  cfg.d_x = d_x;
  cfg.d_f = d_f;
  cfg.num_labels = num_labels;
  cfg.linear_features = linear;
  std::mt19937_64 rng(seed);
  return GraphModule(cfg, rng);
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("entity graph holds all in-span ordered pairs") {
  DirectedGraph g = build_entity_graph({{0, 2, 0}}, 4);
  std::set<std::pair<Index, Index>> expect = {{0, 1}, {0, 2}, {1, 2}};
  CHECK(std::set<std::pair<Index, Index>>(g.edges.begin(), g.edges.end()) == expect);

  CHECK(build_entity_graph({{3, 3, 0}}, 4).edges.empty());

  DirectedGraph two = build_entity_graph({{0, 1, 0}, {3, 4, 1}}, 5);
  std::set<std::pair<Index, Index>> expect2 = {{0, 1}, {3, 4}};
  CHECK(std::set<std::pair<Index, Index>>(two.edges.begin(), two.edges.end()) == expect2);
}

TEST_CASE("entity graph edge count follows the pair formula") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    Index n = std::uniform_int_distribution<Index>(1, 12)(rng);
    // random disjoint spans
    std::vector<EntitySpan> spans;
    Index at = 0;
    Index want = 0;
    while (at < n) {
      Index len = std::uniform_int_distribution<Index>(1, 4)(rng);
      len = std::min(len, n - at);
      if (std::bernoulli_distribution(0.6)(rng)) {
        spans.push_back({at, at + len - 1, 0});
        want += len * (len - 1) / 2;
      }
      at += len;
    }
    CHECK(static_cast<Index>(build_entity_graph(spans, n).edges.size()) == want);
  }
}

TEST_CASE("adjacent graph is the left-to-right chain") {
  DirectedGraph g = build_adjacent_graph(4);
  CHECK(g.edges == std::vector<std::pair<Index, Index>>{{0, 1}, {1, 2}, {2, 3}});
  CHECK(build_adjacent_graph(1).edges.empty());
  for (Index n = 1; n < 20; ++n) {
    CHECK(static_cast<Index>(build_adjacent_graph(n).edges.size()) == n - 1);
  }
}

TEST_CASE("bigcn empty and single-edge sums") {
  std::mt19937_64 rng(42);
  BiGcnParams p = BiGcnParams::init(3, 2, rng);
  // bias inside the per-edge summand: give it a nonzero value
  p.b_out.raw_value() = random_mat(1, 2, rng);
  p.b_in.raw_value() = random_mat(1, 2, rng);
  Mat xv = random_mat(2, 3, rng);
  Tensor x = Tensor::from_mat(xv);

  // isolated nodes: zero feature vector
  Tensor none = bigcn(x, Tensor::from_mat(Mat::Zero(2, 2)), p);
  CHECK(none.value() == Mat::Zero(2, 4));

  // single edge (0,1)
  Mat adj = Mat::Zero(2, 2);
  adj(0, 1) = 1.0;
  Mat f = bigcn(x, Tensor::from_mat(adj), p).value();
  Mat out0 = (xv.row(1) * p.w_out.value() + p.b_out.value()).cwiseMax(0.0);
  Mat in1 = (xv.row(0) * p.w_in.value() + p.b_in.value()).cwiseMax(0.0);
  CHECK((f.row(0).head(2) - out0.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((f.row(1).tail(2) - in1.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(f.row(0).tail(2) == Mat::Zero(1, 2).row(0));  // no incoming edge at node 0
}

TEST_CASE("edge weights scale messages linearly before the nonlinearity") {
  std::mt19937_64 rng(43);
  BiGcnParams p = BiGcnParams::init(3, 2, rng);
  Mat xv = random_mat(3, 3, rng);
  Tensor x = Tensor::from_mat(xv);
  Mat w1 = Mat::Zero(3, 3), w2 = Mat::Zero(3, 3);
  w1(0, 1) = 0.35;
  w2(0, 1) = 0.70;
  // compare pre-activation sums via the identity ReLU(z)-ReLU(-z) = z
  auto pre = [&](const Mat& adj) {
    Mat plus = bigcn(x, Tensor::from_mat(adj), p).value();
    Mat minus = bigcn(x, Tensor::from_mat(Mat(-adj)), p).value();
    return Mat(plus - minus);
  };
  CHECK((2.0 * pre(w1) - pre(w2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("aggregate is affine with bias rows at zero features") {
  GraphModule g = tiny_module(4, 4, 3, 7);
  Tensor zero = Tensor::from_mat(Mat::Zero(3, 8));
  Mat f = g.aggregate(zero, zero).value();
  for (Index i = 0; i < 3; ++i) CHECK(f.row(i) == g.b_combine.value().row(0));

  std::mt19937_64 rng(44);
  Tensor f1 = Tensor::from_mat(random_mat(3, 8, rng));
  Tensor f2 = Tensor::from_mat(random_mat(3, 8, rng));
  Mat lhs = g.aggregate(scale(f1, 2.0), f2).value() - g.aggregate(f1, f2).value();
  Mat rhs = g.aggregate(f1, zero).value() - g.aggregate(zero, zero).value();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(f.rows() == 3);
  CHECK(f.cols() == 4);
}

TEST_CASE("entity scores are normalized over types for every cell") {
  GraphModule g = tiny_module(4, 4, 4, 8);
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    Index n = std::uniform_int_distribution<Index>(1, 7)(rng);
    Tensor f = Tensor::from_mat(random_mat(n, 4, rng, -3, 3));
    Tensor m = g.entity_scores(f);
    CHECK(m.shape() == Shape{n, n, 4});
    for (Index c = 0; c < n * n; ++c) {
      CHECK(std::abs(m.value().row(c).sum() - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("zero scorer parameters yield the uniform distribution") {
  GraphModule g = tiny_module(4, 4, 5, 9);
  g.w_type.raw_value().setZero();
  std::mt19937_64 rng(46);
  Mat m = g.entity_scores(Tensor::from_mat(random_mat(3, 4, rng))).value();
  for (Index c = 0; c < m.rows(); ++c) {
    for (Index l = 0; l < 5; ++l) CHECK(m(c, l) == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("pair scorer is asymmetric in the span endpoints") {
  GraphModule g = tiny_module(4, 4, 3, 10);
  std::mt19937_64 rng(47);
  Tensor f = Tensor::from_mat(random_mat(3, 4, rng));
  Mat m = g.entity_scores(f).value();
  // M(0,1) vs M(1,0)
  CHECK((m.row(0 * 3 + 1) - m.row(1 * 3 + 0)).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("inner loss on exact predictions is zero") {
  GoldScoreTensor gold = build_gold_scores({{0, 1, 0}}, 2, 2);
  Tensor m = Tensor::from_mat(gold.onehot(), {2, 2, 3});
  CHECK(inner_loss(m, gold, 1.5).item() == doctest::Approx(0.0));
}

TEST_CASE("inner loss matches the closed form on a single entity cell") {
  const Real p = 0.37, lambda1 = 1.5;
  GoldScoreTensor gold = build_gold_scores({{0, 1, 1}}, 2, 2);
  Mat m = gold.onehot();
  m.row(0 * 2 + 1) << 0.0, p, 1.0 - p;  // gold type 1 gets probability p
  Real loss = inner_loss(Tensor::from_mat(m, {2, 2, 3}), gold, lambda1).item();
  CHECK(loss == doctest::Approx(-lambda1 * std::log(p)).epsilon(1e-12));
}

TEST_CASE("inner loss grows with lambda1 when an entity cell is imperfect") {
  GoldScoreTensor gold = build_gold_scores({{0, 1, 1}}, 2, 2);
  Mat m = gold.onehot();
  m.row(1) << 0.1, 0.8, 0.1;
  Tensor mt = Tensor::from_mat(m, {2, 2, 3});
  Real at_1 = inner_loss(mt, gold, 1.0).item();
  Real at_2 = inner_loss(mt, gold, 2.0).item();
  CHECK(at_2 > at_1);
  CHECK(inner_loss(mt, gold, 1.5).item() >= 0.0);
}

TEST_CASE("inner loss gradient via the full scorer passes finite differences") {
  GraphModule g = tiny_module(4, 4, 3, 11);
  std::mt19937_64 rng(48);
  Tensor x = Tensor::from_mat(random_mat(3, 4, rng), true);
  Mat adj1 = build_entity_graph({{0, 2, 0}}, 3).adjacency();
  Mat adj2 = build_adjacent_graph(3).adjacency();
  GoldScoreTensor gold = build_gold_scores({{1, 2, 1}}, 3, 2);
  auto loss = [&]() {
    Tensor f = g.features(x, Tensor::from_mat(adj1), Tensor::from_mat(adj2));
    return inner_loss(g.entity_scores(f), gold, 1.5);
  };
  std::vector<Tensor> params = g.params();
  params.push_back(x);
  CHECK(gradient_check(loss, params, 1e-5) < 1e-4);
}

TEST_CASE("score graph keeps only entity-argmax cells") {
  // hand cells over a 2-token sentence, L = 2 (one entity type + O)
  Mat m(4, 2);
  m << 0.4, 0.6,   // (0,0): argmax O -> no edge
       0.7, 0.3,   // (0,1): entity, weight 0.7
       0.9, 0.1,   // (1,0): below diagonal, ignored
       0.5, 0.5;   // (1,1): tie including O -> resolves to O
  WeightedGraph g = score_to_graph(m, 2, 1);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].from == 0);
  CHECK(g.edges[0].to == 1);
  CHECK(g.edges[0].weight == doctest::Approx(0.7));
}

TEST_CASE("non-O argmax ties resolve to the lowest type id") {
  Eigen::RowVectorXd v(4);
  v << 0.4, 0.4, 0.1, 0.1;  // types 0 and 1 tie, O (id 3) loses
  CHECK(argmax_type(v, 3) == 0);
  Eigen::RowVectorXd u(4);
  u << 0.25, 0.25, 0.25, 0.25;  // uniform tie includes O
  CHECK(argmax_type(u, 3) == 3);
}

TEST_CASE("score graph properties on random tensors") {
  std::mt19937_64 rng(49);
  for (int trial = 0; trial < 100; ++trial) {
    Index n = std::uniform_int_distribution<Index>(1, 8)(rng);
    Index l = std::uniform_int_distribution<Index>(2, 5)(rng);
    Mat logits = random_mat(n * n, l, rng, -2, 2);
    Mat probs(n * n, l);
    for (Index c = 0; c < n * n; ++c) {
      Eigen::ArrayXd e = (logits.row(c).array() - logits.row(c).maxCoeff()).exp();
      probs.row(c) = (e / e.sum()).matrix().transpose();
    }
    WeightedGraph g = score_to_graph(probs, n, l - 1);
    for (const auto& e : g.edges) {
      CHECK(e.from <= e.to);
      CHECK(e.weight > 0.0);
      CHECK(e.weight <= 1.0);
      CHECK(argmax_type(probs.row(e.from * n + e.to), l - 1) != l - 1);
    }
  }
}

TEST_CASE("span gate mirrors score_to_graph and routes gradients") {
  GraphModule g = tiny_module(4, 4, 3, 12);
  std::mt19937_64 rng(50);
  Tensor f = Tensor::from_mat(random_mat(4, 4, rng), true);
  Tensor m = g.entity_scores(f);
  Tensor gate = span_gate(m, 4, 2);
  WeightedGraph wg = score_to_graph(m.value(), 4, 2);
  Mat expect = Mat::Zero(4, 4);
  for (const auto& e : wg.edges) expect(e.from, e.to) = e.weight;
  CHECK(gate.value() == expect);

  auto loss = [&]() { return sum_all(span_gate(g.entity_scores(f), 4, 2)); };
  CHECK(gradient_check(loss, {f, g.w_type}, 1e-5) < 1e-4);
}

TEST_CASE("feedback representation with an empty score graph is the linear part") {
  GraphModule g = tiny_module(4, 6, 3, 13);
  std::mt19937_64 rng(51);
  Mat xv = random_mat(3, 4, rng);
  Tensor x = Tensor::from_mat(xv);
  Tensor gate = Tensor::from_mat(Mat::Zero(3, 3));
  Mat got = g.feedback(x, gate).value();
  Mat want = xv * g.w_keep.value();
  want.rowwise() += g.b_keep.value().row(0);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(got.rows() == 3);
  CHECK(got.cols() == 6);
}

TEST_CASE("feedback propagates along score-graph edges") {
  GraphModule g = tiny_module(4, 4, 3, 14);
  std::mt19937_64 rng(52);
  Mat xv = random_mat(3, 4, rng);
  Mat gate = Mat::Zero(3, 3);
  gate(0, 2) = 0.8;
  Mat base = g.feedback(Tensor::from_mat(xv), Tensor::from_mat(gate)).value();
  Mat xp = xv;
  xp.row(2).array() += 0.25;  // perturb the edge target
  Mat moved = g.feedback(Tensor::from_mat(xp), Tensor::from_mat(gate)).value();
  CHECK((base.row(0) - moved.row(0)).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("decode_inner inverts the gold tensor and matches a cell scan") {
  GoldScoreTensor gold = build_gold_scores({{0, 1, 0}, {2, 2, 1}}, 3, 2);
  auto spans = decode_inner(gold.onehot(), 3, 2);
  CHECK(std::set<EntitySpan>(spans.begin(), spans.end()) ==
        std::set<EntitySpan>{{0, 1, 0}, {2, 2, 1}});

  // all-O argmax: empty
  GoldScoreTensor empty_gold = build_gold_scores({}, 3, 2);
  CHECK(decode_inner(empty_gold.onehot(), 3, 2).empty());

  // independent brute-force scan over random probability tensors
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    Index n = std::uniform_int_distribution<Index>(1, 6)(rng);
    Mat probs = random_mat(n * n, 3, rng, 0.0, 1.0);
    auto got = decode_inner(probs, n, 2);
    std::set<EntitySpan> want;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i; j < n; ++j) {
        const auto row = probs.row(i * n + j);
        Real best = std::max({row(0), row(1), row(2)});
        if (row(2) == best) continue;  // O wins ties
        want.insert({i, j, row(0) == best ? 0 : 1});
      }
    }
    CHECK(std::set<EntitySpan>(got.begin(), got.end()) == want);
  }
}

}  // TEST_SUITE
