#include "nester/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

namespace nester {

namespace {

// Word pools. Every slot filler is lowercase; person and place tokens are
// capitalized so the character encoder sees a casing cue.
const std::vector<std::string> kFirst = {"Alice", "Bob",   "Carol", "David", "Erin",
                                         "Frank", "Grace", "Henry", "Irene", "Jonas"};
const std::vector<std::string> kLast = {"Stone", "Rivers", "Hale", "Fox", "Moss", "Vale"};
const std::vector<std::string> kOrg = {"Acme",   "Globex", "Initech", "Vertex",
                                       "Zenith", "Kestrel", "Halcyon", "Apexon"};
const std::vector<std::string> kOrgSuffix = {"Corp", "Labs", "Group", "Holdings"};
const std::vector<std::string> kCity = {"Springfield", "Shelbyville", "Ogdenville", "Arlen",
                                        "Langley",     "Quahog",      "Riverton",   "Maplewood"};
const std::vector<std::string> kRegion = {"region", "district", "valley", "coast"};

// Type ids follow the lexicographic inventory {FAC, GPE, ORG, PER}.
constexpr Index kFac = 0, kGpe = 1, kOrg_ = 2, kPer = 3;

struct Draw {
  std::mt19937_64& rng;
  const std::string& from(const std::vector<std::string>& pool) {
    std::uniform_int_distribution<size_t> d(0, pool.size() - 1);
    return pool[d(rng)];
  }
};

using TemplateFn = AnnotatedSentence (*)(Draw&);

// Three levels: PER spans the whole apposition, a GPE chain sits inside.
AnnotatedSentence tpl_mayor(Draw& d) {
  AnnotatedSentence s;
  s.tokens = {d.from(kFirst), d.from(kLast), ",", "mayor", "of", "the", d.from(kCity),
              d.from(kRegion), ",", "spoke", "yesterday"};
  s.entities = {{0, 7, kPer}, {5, 7, kGpe}, {6, 6, kGpe}};
  return s;
}

// Facility containing an organization and a city.
AnnotatedSentence tpl_tower(Draw& d) {
  AnnotatedSentence s;
  s.tokens = {"the", d.from(kOrg), d.from(kOrgSuffix), "tower", "in", d.from(kCity), "opened"};
  s.entities = {{0, 5, kFac}, {1, 2, kOrg_}, {5, 5, kGpe}};
  return s;
}

// Same-type nesting: a person inside a person, plus an organization.
AnnotatedSentence tpl_chairman(Draw& d) {
  AnnotatedSentence s;
  s.tokens = {"chairman", d.from(kFirst), d.from(kLast), "of", d.from(kOrg), d.from(kOrgSuffix),
              "resigned"};
  s.entities = {{0, 5, kPer}, {1, 2, kPer}, {4, 5, kOrg_}};
  return s;
}

// Three levels: facility over a GPE chain.
AnnotatedSentence tpl_office(Draw& d) {
  AnnotatedSentence s;
  s.tokens = {"the", "office", "in", "the", d.from(kCity), d.from(kRegion), "closed"};
  s.entities = {{0, 5, kFac}, {3, 5, kGpe}, {4, 4, kGpe}};
  return s;
}

// Organization named after a city.
AnnotatedSentence tpl_committee(Draw& d) {
  AnnotatedSentence s;
  s.tokens = {"the", d.from(kCity), "committee", "met", "again"};
  s.entities = {{0, 2, kOrg_}, {1, 1, kGpe}};
  return s;
}

// Flat sentences: the same surface material without nesting, so span
// membership and not word identity separates inner from outermost.
AnnotatedSentence tpl_visit(Draw& d) {
  AnnotatedSentence s;
  s.tokens = {d.from(kFirst), "visited", d.from(kCity), "today"};
  s.entities = {{0, 0, kPer}, {2, 2, kGpe}};
  return s;
}

AnnotatedSentence tpl_hire(Draw& d) {
  AnnotatedSentence s;
  s.tokens = {"the", d.from(kOrg), d.from(kOrgSuffix), "hired", d.from(kFirst), d.from(kLast)};
  s.entities = {{0, 2, kOrg_}, {4, 5, kPer}};
  return s;
}

AnnotatedSentence tpl_tour(Draw& d) {
  AnnotatedSentence s;
  s.tokens = {"crowds", "toured", "the", d.from(kCity), d.from(kRegion), "yesterday"};
  s.entities = {{2, 4, kGpe}};
  return s;
}

AnnotatedSentence tpl_press(Draw& d) {
  AnnotatedSentence s;
  s.tokens = {d.from(kFirst), d.from(kLast), "spoke", "at", "the", "press", "event"};
  s.entities = {{0, 1, kPer}};
  return s;
}

AnnotatedSentence tpl_storm(Draw& d) {
  AnnotatedSentence s;
  s.tokens = {"storms", "reached", d.from(kCity), "overnight"};
  s.entities = {{2, 2, kGpe}};
  return s;
}

AnnotatedSentence tpl_plain(Draw& d) {
  AnnotatedSentence s;
  s.tokens = {"trains", "run", "daily", "near", "the", d.from(kRegion)};
  (void)d;
  return s;
}

const std::vector<TemplateFn> kTemplates = {
    tpl_mayor, tpl_tower, tpl_chairman, tpl_office, tpl_committee,  // nested
    tpl_visit, tpl_hire,  tpl_tour,     tpl_press,  tpl_storm,  tpl_plain,
};
constexpr size_t kNestedTemplates = 5;

}  // namespace

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.sentences = static_cast<Index>(corpus.sentences.size());
  for (const auto& s : corpus.sentences) {
    LayerSplit split = split_layers(s.entities);
    st.mentions += static_cast<Index>(s.entities.size());
    st.outermost += static_cast<Index>(split.outermost.size());
    st.inner += static_cast<Index>(split.inner.size());
    if (!split.inner.empty()) ++st.with_overlap;
  }
  return st;
}

void write_stats(std::ostream& out, const CorpusStats& st) {
  auto pct = [](Index part, Index whole) {
    return whole > 0 ? 100.0 * static_cast<Real>(part) / static_cast<Real>(whole) : 0.0;
  };
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "# sentences %lld\nwith o.l.   %lld (%.0f%%)\n# mentions  %lld\noutermost   %lld "
                "(%.0f%%)\ninner       %lld (%.0f%%)\n",
                static_cast<long long>(st.sentences), static_cast<long long>(st.with_overlap),
                pct(st.with_overlap, st.sentences), static_cast<long long>(st.mentions),
                static_cast<long long>(st.outermost), pct(st.outermost, st.mentions),
                static_cast<long long>(st.inner), pct(st.inner, st.mentions));
  out << buf;
}

Corpus synth_corpus(Index n_sentences, std::uint64_t seed) {
  if (n_sentences < 1) throw DataError("synth_corpus: need at least one sentence");
  Corpus corpus;
  corpus.labels = LabelInventory({"FAC", "GPE", "ORG", "PER"});
  std::mt19937_64 rng(seed);
  Draw draw{rng};
  std::uniform_int_distribution<size_t> pick(0, kTemplates.size() - 1);
  std::bernoulli_distribution nested(0.55);
  std::uniform_int_distribution<size_t> pick_nested(0, kNestedTemplates - 1);
  std::uniform_int_distribution<size_t> pick_flat(kNestedTemplates, kTemplates.size() - 1);

  for (Index i = 0; i < n_sentences; ++i) {
    size_t t;
    if (static_cast<size_t>(i) < kTemplates.size()) {
      t = static_cast<size_t>(i);  // first pass covers every template
    } else {
      t = nested(rng) ? pick_nested(rng) : pick_flat(rng);
    }
    corpus.sentences.push_back(kTemplates[t](draw));
  }
  return corpus;
}

std::vector<std::string> synth_vocabulary() {
  std::set<std::string> vocab;
  auto add_pool = [&](const std::vector<std::string>& pool) {
    for (const auto& w : pool) {
      std::string lower = w;
      for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      vocab.insert(lower);
    }
  };
  add_pool(kFirst);
  add_pool(kLast);
  add_pool(kOrg);
  add_pool(kOrgSuffix);
  add_pool(kCity);
  add_pool(kRegion);
  for (const char* w :
       {"the", ",", "mayor", "of", "spoke", "yesterday", "tower", "in", "opened", "chairman",
        "resigned", "office", "closed", "committee", "met", "again", "visited", "today", "hired",
        "crowds", "toured", "at", "press", "event", "storms", "reached", "overnight", "trains",
        "run", "daily", "near"}) {
    vocab.insert(w);
  }
  return {vocab.begin(), vocab.end()};
}

void write_embeddings(const std::string& path, const std::vector<std::string>& vocab, Index dim,
                      std::uint64_t seed) {
  if (dim <= 0) throw DataError("write_embeddings: dim must be positive");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embeddings file: " + path);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> dist(-0.5, 0.5);
  char buf[32];
  for (const auto& token : vocab) {
    out << token;
    for (Index i = 0; i < dim; ++i) {
      std::snprintf(buf, sizeof(buf), " %.6f", dist(rng));
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace nester
