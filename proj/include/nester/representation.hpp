#pragma once

#include "nester/data.hpp"
#include "nester/lstm.hpp"

#include <unordered_map>

namespace nester {

struct ReprConfig {
  Index d_w = 100;        // word embedding dim
  Index d_c = 50;         // character feature dim (two directions)
  Index d_x = 512;        // context representation dim (two directions)
  Real dropout_rate = 0.5;

  void validate() const;
};

/// Inverted dropout; identity when not training or rate == 0.
Tensor dropout(const Tensor& t, Real rate, bool training, std::mt19937_64& rng);

/// Per-batch memo for character encodings: parameters are frozen while a
/// batch graph is alive, so equal tokens share one subgraph.
struct EncodeCache {
  std::unordered_map<std::string, Tensor> char_vecs;
};

/// Word representation: [word embedding ; char feature] per token, then a
/// context BiLSTM.
class Representation {
 public:
  Representation() = default;
  Representation(ReprConfig cfg, const EmbeddingTable& table, const CharInventory& chars,
                 std::mt19937_64& rng);

  Tensor char_encode(const std::string& token, EncodeCache* cache = nullptr) const;
  Tensor token_represent(const std::vector<std::string>& tokens, EncodeCache* cache = nullptr) const;
  Tensor context_encode(const Tensor& t, bool training, std::mt19937_64& rng) const;
  Tensor encode(const std::vector<std::string>& tokens, bool training, std::mt19937_64& rng,
                EncodeCache* cache = nullptr) const;

  std::vector<Tensor> params() const;
  const ReprConfig& config() const { return cfg_; }
  const EmbeddingTable& table() const { return table_; }
  const CharInventory& chars() const { return chars_; }

  // Parameter storage, exposed for optimizers, checkpointing and tests.
  Tensor word_emb;
  Tensor char_emb;
  LstmCell char_fwd, char_bwd;
  LstmCell ctx_fwd, ctx_bwd;

 private:
  ReprConfig cfg_;
  EmbeddingTable table_;  // token -> row mapping (vectors live in word_emb)
  CharInventory chars_;
};

}  // namespace nester
