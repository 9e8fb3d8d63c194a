#include "nester/model.hpp"

#include <set>

namespace nester {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_graph: return "no-graph";
    case Variant::no_feedback: return "no-feedback";
  }
  return "full";
}

Variant variant_from_name(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "no-graph") return Variant::no_graph;
  if (name == "no-feedback") return Variant::no_feedback;
  throw DataError("unknown variant: " + name + " (expected full, no-graph or no-feedback)");
}

void Hyperparams::validate() const {
  if (lr_flat <= 0 || lr_graph <= 0) throw DataError("learning rates must be positive");
  if (lambda1 <= 0 || lambda2 < 0) throw DataError("lambda1 must be positive, lambda2 non-negative");
  if (dropout < 0 || dropout >= 1) throw DataError("dropout must lie in [0,1)");
  if (hidden_bilstm <= 0 || hidden_gcn <= 0) throw DataError("hidden sizes must be positive");
  if (hidden_gcn % 2 != 0) throw DataError("hidden_gcn must be even");
  if (batch_size <= 0 || epochs <= 0) throw DataError("batch size and epochs must be positive");
  if (d_w <= 0 || d_c <= 0 || d_c % 2 != 0) throw DataError("embedding dims must be positive, d_c even");
}

namespace {

ReprConfig repr_config(const Hyperparams& hp) {
  ReprConfig cfg;
  cfg.d_w = hp.d_w;
  cfg.d_c = hp.d_c;
  cfg.d_x = 2 * hp.hidden_bilstm;
  cfg.dropout_rate = hp.dropout;
  return cfg;
}

}  // namespace

Model::Model(LabelInventory labels_in, Hyperparams hp_in, Variant variant_in,
             const EmbeddingTable& table, const CharInventory& chars)
    : labels(std::move(labels_in)), hp(hp_in), variant(variant_in) {
  hp.validate();
  if (labels.num_types() < 1) throw DataError("model needs at least one entity type");
  std::mt19937_64 rng(hp.seed);
  repr = Representation(repr_config(hp), table, chars, rng);
  flat = FlatEncoder(2 * hp.hidden_bilstm, hp.hidden_gcn, hp.hidden_bilstm, labels.num_bioes(), rng);
  crf = Crf::init(labels.num_bioes());
  apply_bioes_constraints(crf.transitions.raw_value(), labels.num_types());
  GraphConfig gcfg;
  gcfg.d_x = 2 * hp.hidden_bilstm;
  gcfg.d_f = hp.hidden_gcn;
  gcfg.num_labels = labels.num_labels();
  gcfg.linear_features = variant == Variant::no_graph;
  graph = GraphModule(gcfg, rng);
}

std::vector<EntitySpan> SentenceRun::predictions() const {
  std::set<EntitySpan> uniq(pred_outer.begin(), pred_outer.end());
  uniq.insert(pred_inner.begin(), pred_inner.end());
  return {uniq.begin(), uniq.end()};
}

SentenceRun Model::run(const std::vector<std::string>& tokens, const std::vector<EntitySpan>* gold,
                       bool training, std::mt19937_64& rng, EncodeCache* cache) const {
  const Index n = static_cast<Index>(tokens.size());
  const Index num_types = labels.num_types();
  const Index o_id = labels.o_id();
  SentenceRun out;

  std::vector<Index> y_gold;
  GoldScoreTensor gold_cells;
  if (gold) {
    LayerSplit split = split_layers(*gold);
    y_gold = bioes_encode(split.outermost, n, num_types);
    gold_cells = build_gold_scores(split.inner, n, num_types);
  }

  // First flat pass over the context representation.
  Tensor x = repr.encode(tokens, training, rng, cache);
  Tensor p_first = flat.emissions(x, FlatInput::context);
  out.y_first = crf.viterbi(p_first.value()).first;
  out.spans_first = bioes_decode(out.y_first, num_types);

  // Graph features from the decoded entity graph plus the chain graph.
  Tensor adj_entity = Tensor::from_mat(build_entity_graph(out.spans_first, n).adjacency());
  Tensor adj_chain = Tensor::from_mat(build_adjacent_graph(n).adjacency());
  Tensor f = graph.features(x, adj_entity, adj_chain);
  out.scores = graph.entity_scores(f);
  out.pred_inner = decode_inner(out.scores.value(), n, o_id);

  if (gold) out.loss_inner = inner_loss(out.scores, gold_cells, hp.lambda1);

  if (variant == Variant::no_feedback) {
    out.y_final = out.y_first;
    if (gold) out.loss_outer = crf.nll(p_first, y_gold);
  } else {
    Tensor gate = span_gate(out.scores, n, o_id);
    Tensor x_new = graph.feedback(x, gate);
    Tensor p_final = flat.emissions(x_new, FlatInput::feedback);
    out.y_final = crf.viterbi(p_final.value()).first;
    if (gold) out.loss_outer = add(crf.nll(p_first, y_gold), crf.nll(p_final, y_gold));
  }
  out.pred_outer = bioes_decode(out.y_final, num_types);
  return out;
}

std::vector<EntitySpan> Model::predict(const std::vector<std::string>& tokens) const {
  EncodeCache cache;
  return run(tokens, nullptr, false, eval_rng_, &cache).predictions();
}

std::vector<Tensor> Model::flat_group() const {
  std::vector<Tensor> out = repr.params();
  for (const auto& p : flat.params()) out.push_back(p);
  out.push_back(crf.transitions);
  return out;
}

std::vector<Tensor> Model::graph_group() const { return graph.params(); }

std::vector<std::pair<std::string, Tensor>> Model::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto put = [&](const std::string& name, const Tensor& t) { out.emplace_back(name, t); };

  put("repr.word_emb", repr.word_emb);
  put("repr.char_emb", repr.char_emb);
  auto put_cell = [&](const std::string& prefix, const LstmCell& c) {
    put(prefix + ".w_ih", c.w_ih);
    put(prefix + ".w_hh", c.w_hh);
    put(prefix + ".b", c.b);
  };
  put_cell("repr.char_fwd", repr.char_fwd);
  put_cell("repr.char_bwd", repr.char_bwd);
  put_cell("repr.ctx_fwd", repr.ctx_fwd);
  put_cell("repr.ctx_bwd", repr.ctx_bwd);

  auto put_dir = [&](const std::string& prefix, const FlatEncoder::Direction& d) {
    put(prefix + ".w_ih_ctx", d.w_ih_ctx);
    put(prefix + ".w_ih_fb", d.w_ih_fb);
    put(prefix + ".w_hh", d.w_hh);
    put(prefix + ".b", d.b);
  };
  put_dir("flat.fwd", flat.fwd);
  put_dir("flat.bwd", flat.bwd);
  put("flat.emit_w", flat.emit_w);
  put("flat.emit_b", flat.emit_b);
  put("crf.trans", crf.transitions);

  auto put_gcn = [&](const std::string& prefix, const BiGcnParams& g) {
    put(prefix + ".w_out", g.w_out);
    put(prefix + ".b_out", g.b_out);
    put(prefix + ".w_in", g.w_in);
    put(prefix + ".b_in", g.b_in);
  };
  if (variant == Variant::no_graph) {
    put("graph.w_linear", graph.w_linear);
    put("graph.b_linear", graph.b_linear);
  } else {
    put_gcn("graph.gcn_entity", graph.gcn_entity);
    put_gcn("graph.gcn_adjacent", graph.gcn_adjacent);
    put("graph.proj_entity", graph.proj_entity);
    put("graph.proj_adjacent", graph.proj_adjacent);
    put("graph.w_combine", graph.w_combine);
    put("graph.b_combine", graph.b_combine);
  }
  put_gcn("graph.gcn_score", graph.gcn_score);
  put("graph.proj_score", graph.proj_score);
  put("graph.w_pair_start", graph.w_pair_start);
  put("graph.w_pair_end", graph.w_pair_end);
  put("graph.w_type", graph.w_type);
  put("graph.w_keep", graph.w_keep);
  put("graph.b_keep", graph.b_keep);
  return out;
}

}  // namespace nester
