#pragma once

#include "nester/data.hpp"

namespace nester {

/// Layer statistics of a corpus, reported alongside generated data.
struct CorpusStats {
  Index sentences = 0;
  Index with_overlap = 0;  // sentences holding at least one nested pair
  Index mentions = 0;
  Index outermost = 0;
  Index inner = 0;
};

CorpusStats corpus_stats(const Corpus& corpus);
void write_stats(std::ostream& out, const CorpusStats& stats);

/// Template-generated nested-NER corpus over a fixed four-type inventory
/// (FAC, GPE, ORG, PER) with nesting two to three levels deep. Deterministic
/// per seed; over half of the sentences carry nested mentions.
Corpus synth_corpus(Index n_sentences, std::uint64_t seed);

/// Closed vocabulary of the generator (lowercase, sorted).
std::vector<std::string> synth_vocabulary();

/// Deterministic random embeddings covering the given vocabulary.
void write_embeddings(const std::string& path, const std::vector<std::string>& vocab, Index dim,
                      std::uint64_t seed);

}  // namespace nester
