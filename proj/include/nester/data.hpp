#pragma once

#include "nester/tensor.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace nester {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inclusive token span carrying an entity type id in [0, num_types).
struct EntitySpan {
  Index start = 0;
  Index end = 0;
  Index label = 0;

  Index length() const { return end - start + 1; }
  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

/// True when outer strictly contains inner: same-extent spans do not count.
bool strictly_contains(const EntitySpan& outer, const EntitySpan& inner);

std::string span_to_string(const EntitySpan& s);

struct AnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<EntitySpan> entities;

  Index size() const { return static_cast<Index>(tokens.size()); }
};

/// Entity type names sorted lexicographically; 'O' is always the last id.
class LabelInventory {
 public:
  LabelInventory() = default;
  explicit LabelInventory(std::vector<std::string> types);

  Index num_types() const { return static_cast<Index>(types_.size()); }
  Index num_labels() const { return num_types() + 1; }  // including 'O'
  Index o_id() const { return num_types(); }
  const std::vector<std::string>& types() const { return types_; }
  const std::string& type_name(Index id) const;
  Index type_id(const std::string& name) const;
  bool has_type(const std::string& name) const;

  // BIOES tag space over the types: per type {B, I, E, S}, then 'O'.
  Index num_bioes() const { return 4 * num_types() + 1; }
  Index bioes_o() const { return 4 * num_types(); }
  std::string bioes_name(Index tag) const;

  friend bool operator==(const LabelInventory&, const LabelInventory&) = default;

 private:
  std::vector<std::string> types_;
};

struct LayerSplit {
  std::vector<EntitySpan> outermost;
  std::vector<EntitySpan> inner;
};

/// Partitions spans into outermost (not strictly contained in any other)
/// and inner. Crossing or type-duplicated outermost spans are annotation
/// errors: the flat sequence layer cannot encode them.
LayerSplit split_layers(const std::vector<EntitySpan>& entities);

/// BIOES encoding of pairwise-disjoint spans. Tag ids: type t maps to
/// {B,I,E,S} = {4t..4t+3}, 'O' = 4*num_types.
std::vector<Index> bioes_encode(const std::vector<EntitySpan>& outermost, Index n, Index num_types);

/// Tolerant inverse: ill-formed fragments yield no span.
std::vector<EntitySpan> bioes_decode(const std::vector<Index>& labels, Index num_types);

/// Word-embedding table; row 0 is the unknown token. Lookup lowercases.
struct EmbeddingTable {
  Index dim = 0;
  std::vector<std::string> tokens;
  std::unordered_map<std::string, Index> index;
  Mat vectors;

  Index lookup(const std::string& token) const;
  static EmbeddingTable load(const std::string& path, Index dim);
};

/// Byte-level character inventory; index 0 is the unknown character.
struct CharInventory {
  std::vector<unsigned char> bytes;
  std::array<Index, 256> index{};

  CharInventory();
  static CharInventory from_sentences(const std::vector<AnnotatedSentence>& sentences);
  Index size() const { return static_cast<Index>(bytes.size()) + 1; }
  Index lookup(unsigned char c) const { return index[c]; }
  void add(unsigned char c);
};

struct Corpus {
  std::vector<AnnotatedSentence> sentences;
  LabelInventory labels;
};

/// Line-delimited records: {"tokens": [...], "entities": [{"start","end","type"}]}.
Corpus load_corpus(const std::string& path);
Corpus load_corpus(const std::string& path, const LabelInventory& labels);
void save_corpus(const Corpus& corpus, const std::string& path);
void write_sentence(std::ostream& out, const AnnotatedSentence& sentence, const LabelInventory& labels);

/// Gold span-type assignment for inner entities: one type id per (i, j)
/// cell, 'O' everywhere no inner entity starts at i and ends at j. When two
/// inner spans share (start, end), the first in input order wins.
struct GoldScoreTensor {
  Index n = 0;
  Index num_labels = 0;
  std::vector<Index> type_per_cell;  // n*n entries, row-major over (i, j)

  Index type_at(Index i, Index j) const { return type_per_cell[i * n + j]; }
  /// Dense one-hot view, (n*n) x num_labels.
  Mat onehot() const;
};

GoldScoreTensor build_gold_scores(const std::vector<EntitySpan>& inner, Index n, Index num_types,
                                  std::ostream* warnings = nullptr);

}  // namespace nester
