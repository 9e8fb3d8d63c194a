#include "nester/representation.hpp"

namespace nester {

void ReprConfig::validate() const {
  if (d_w <= 0 || d_c <= 0 || d_x <= 0) throw DataError("representation dims must be positive");
  if (d_c % 2 != 0) throw DataError("d_c must be even (two character directions)");
  if (d_x % 2 != 0) throw DataError("d_x must be even (two context directions)");
  if (dropout_rate < 0 || dropout_rate >= 1) throw DataError("dropout rate must lie in [0,1)");
}

Tensor dropout(const Tensor& t, Real rate, bool training, std::mt19937_64& rng) {
  if (!training || rate == 0.0) return t;
  std::bernoulli_distribution keep(1.0 - rate);
  Mat mask(t.rows(), t.cols());
  const Real scaleup = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.rows(); ++i) {
    for (Index j = 0; j < mask.cols(); ++j) mask(i, j) = keep(rng) ? scaleup : 0.0;
  }
  return cmul(t, Tensor::from_mat(mask, t.shape(), false));
}

Representation::Representation(ReprConfig cfg, const EmbeddingTable& table,
                               const CharInventory& chars, std::mt19937_64& rng)
    : cfg_(cfg), table_(table), chars_(chars) {
  cfg_.validate();
  if (table_.dim != cfg_.d_w) {
    throw DataError("embedding table dim " + std::to_string(table_.dim) + " does not match d_w " +
                    std::to_string(cfg_.d_w));
  }
  const Index d_ce = cfg_.d_c / 2;
  word_emb = Tensor::from_mat(table_.vectors, true);
  char_emb = Tensor::from_mat(uniform_init(chars_.size(), d_ce, d_ce, rng), true);
  char_fwd = LstmCell::init(d_ce, cfg_.d_c / 2, rng);
  char_bwd = LstmCell::init(d_ce, cfg_.d_c / 2, rng);
  ctx_fwd = LstmCell::init(cfg_.d_w + cfg_.d_c, cfg_.d_x / 2, rng);
  ctx_bwd = LstmCell::init(cfg_.d_w + cfg_.d_c, cfg_.d_x / 2, rng);
}

Tensor Representation::char_encode(const std::string& token, EncodeCache* cache) const {
  if (token.empty()) throw std::invalid_argument("char_encode: empty token");
  if (cache) {
    auto it = cache->char_vecs.find(token);
    if (it != cache->char_vecs.end()) return it->second;
  }
  std::vector<Index> ids;
  ids.reserve(token.size());
  for (unsigned char c : token) ids.push_back(chars_.lookup(c));
  Tensor embs = gather_rows(char_emb, ids);
  auto hf = lstm_run(char_fwd, embs, false);
  auto hb = lstm_run(char_bwd, embs, true);
  Tensor vec = concat_cols(hf.back(), hb.front());  // final state of each direction
  if (cache) cache->char_vecs.emplace(token, vec);
  return vec;
}

Tensor Representation::token_represent(const std::vector<std::string>& tokens,
                                       EncodeCache* cache) const {
  if (tokens.empty()) throw DataError("token_represent: empty sentence");
  std::vector<Index> word_ids;
  word_ids.reserve(tokens.size());
  for (const auto& t : tokens) word_ids.push_back(table_.lookup(t));
  Tensor words = gather_rows(word_emb, word_ids);

  std::vector<Tensor> char_rows;
  char_rows.reserve(tokens.size());
  for (const auto& t : tokens) char_rows.push_back(char_encode(t, cache));
  return concat_cols(words, concat_rows(char_rows));
}

Tensor Representation::context_encode(const Tensor& t, bool training, std::mt19937_64& rng) const {
  Tensor in = dropout(t, cfg_.dropout_rate, training, rng);
  Tensor x = bilstm_encode(ctx_fwd, ctx_bwd, in);
  return dropout(x, cfg_.dropout_rate, training, rng);
}

Tensor Representation::encode(const std::vector<std::string>& tokens, bool training,
                              std::mt19937_64& rng, EncodeCache* cache) const {
  return context_encode(token_represent(tokens, cache), training, rng);
}

std::vector<Tensor> Representation::params() const {
  std::vector<Tensor> out = {word_emb, char_emb};
  for (const auto& cell : {char_fwd, char_bwd, ctx_fwd, ctx_bwd}) {
    for (const auto& p : cell.params()) out.push_back(p);
  }
  return out;
}

}  // namespace nester
