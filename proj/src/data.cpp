#include "nester/data.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nester {

namespace {

using nlohmann::json;

std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void validate_sentence(const AnnotatedSentence& s, Index num_types, size_t line_no) {
  if (s.tokens.empty()) {
    throw DataError("line " + std::to_string(line_no) + ": sentence has no tokens");
  }
  std::set<EntitySpan> seen;
  for (const auto& e : s.entities) {
    if (e.start < 0 || e.start > e.end || e.end >= s.size()) {
      throw DataError("line " + std::to_string(line_no) + ": span " + span_to_string(e) +
                      " out of range for sentence of length " + std::to_string(s.size()));
    }
    if (e.label < 0 || e.label >= num_types) {
      throw DataError("line " + std::to_string(line_no) + ": span " + span_to_string(e) +
                      " carries an invalid type id");
    }
    if (!seen.insert(e).second) {
      throw DataError("line " + std::to_string(line_no) + ": duplicate span " + span_to_string(e));
    }
  }
}

struct RawEntity {
  Index start, end;
  std::string type;
};

struct RawSentence {
  std::vector<std::string> tokens;
  std::vector<RawEntity> entities;
  size_t line_no;
};

std::vector<RawSentence> parse_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::vector<RawSentence> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    RawSentence s;
    s.line_no = line_no;
    try {
      s.tokens = rec.at("tokens").get<std::vector<std::string>>();
      for (const auto& ent : rec.value("entities", json::array())) {
        RawEntity e;
        e.start = ent.at("start").get<Index>();
        e.end = ent.at("end").get<Index>();
        e.type = ent.at("type").get<std::string>();
        s.entities.push_back(std::move(e));
      }
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

bool strictly_contains(const EntitySpan& outer, const EntitySpan& inner) {
  return outer.start <= inner.start && inner.end <= outer.end &&
         !(outer.start == inner.start && outer.end == inner.end);
}

std::string span_to_string(const EntitySpan& s) {
  return "[" + std::to_string(s.start) + "," + std::to_string(s.end) + "]#" + std::to_string(s.label);
}

LabelInventory::LabelInventory(std::vector<std::string> types) : types_(std::move(types)) {
  std::sort(types_.begin(), types_.end());
  types_.erase(std::unique(types_.begin(), types_.end()), types_.end());
  for (const auto& t : types_) {
    if (t == "O") throw DataError("'O' is reserved and cannot be an entity type");
    if (t.empty()) throw DataError("empty entity type name");
  }
}

const std::string& LabelInventory::type_name(Index id) const {
  static const std::string o = "O";
  if (id == o_id()) return o;
  if (id < 0 || id > num_types()) throw DataError("type id " + std::to_string(id) + " out of range");
  return types_[id];
}

Index LabelInventory::type_id(const std::string& name) const {
  auto it = std::lower_bound(types_.begin(), types_.end(), name);
  if (it == types_.end() || *it != name) throw DataError("unknown entity type: " + name);
  return static_cast<Index>(it - types_.begin());
}

bool LabelInventory::has_type(const std::string& name) const {
  return std::binary_search(types_.begin(), types_.end(), name);
}

std::string LabelInventory::bioes_name(Index tag) const {
  if (tag == bioes_o()) return "O";
  static const char* kPrefix = "BIES";
  return std::string(1, kPrefix[tag % 4]) + "-" + types_[tag / 4];
}

LayerSplit split_layers(const std::vector<EntitySpan>& entities) {
  LayerSplit out;
  for (const auto& e : entities) {
    bool contained = false;
    for (const auto& other : entities) {
      if (strictly_contains(other, e)) {
        contained = true;
        break;
      }
    }
    (contained ? out.inner : out.outermost).push_back(e);
  }
  for (size_t a = 0; a < out.outermost.size(); ++a) {
    for (size_t b = a + 1; b < out.outermost.size(); ++b) {
      const auto& x = out.outermost[a];
      const auto& y = out.outermost[b];
      if (x.start == y.start && x.end == y.end) {
        throw DataError("outermost span annotated with two types: " + span_to_string(x) + " vs " +
                        span_to_string(y));
      }
      bool overlap = x.start <= y.end && y.start <= x.end;
      if (overlap) {
        throw DataError("crossing outermost spans: " + span_to_string(x) + " and " + span_to_string(y));
      }
    }
  }
  return out;
}

std::vector<Index> bioes_encode(const std::vector<EntitySpan>& outermost, Index n, Index num_types) {
  const Index o = 4 * num_types;
  std::vector<Index> labels(n, o);
  for (const auto& e : outermost) {
    if (e.start < 0 || e.end >= n) throw DataError("span " + span_to_string(e) + " out of range");
    for (Index i = e.start; i <= e.end; ++i) {
      if (labels[i] != o) throw DataError("overlapping spans in BIOES encoding at token " + std::to_string(i));
    }
    if (e.start == e.end) {
      labels[e.start] = 4 * e.label + 3;  // S
    } else {
      labels[e.start] = 4 * e.label;  // B
      for (Index i = e.start + 1; i < e.end; ++i) labels[i] = 4 * e.label + 1;  // I
      labels[e.end] = 4 * e.label + 2;  // E
    }
  }
  return labels;
}

std::vector<EntitySpan> bioes_decode(const std::vector<Index>& labels, Index num_types) {
  const Index o = 4 * num_types;
  std::vector<EntitySpan> out;
  const Index n = static_cast<Index>(labels.size());
  Index i = 0;
  while (i < n) {
    Index tag = labels[i];
    if (tag < 0 || tag > o) {
      ++i;  // unknown tag id from a model; skip
      continue;
    }
    if (tag == o) {
      ++i;
      continue;
    }
    Index type = tag / 4;
    Index role = tag % 4;
    if (role == 3) {  // S
      out.push_back({i, i, type});
      ++i;
      continue;
    }
    if (role != 0) {  // I or E without a B: ill-formed
      ++i;
      continue;
    }
    // B-type: consume I-type* then require E-type.
    Index j = i + 1;
    while (j < n && labels[j] == 4 * type + 1) ++j;
    if (j < n && labels[j] == 4 * type + 2) {
      out.push_back({i, j, type});
      i = j + 1;
    } else {
      ++i;  // B without a matching E: drop the fragment
    }
  }
  return out;
}

Index EmbeddingTable::lookup(const std::string& token) const {
  auto it = index.find(lowercase(token));
  return it == index.end() ? 0 : it->second;
}

EmbeddingTable EmbeddingTable::load(const std::string& path, Index dim) {
  if (dim <= 0) throw DataError("embedding dimension must be positive");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path);

  EmbeddingTable table;
  table.dim = dim;
  table.tokens.push_back("<unk>");
  table.index.emplace("<unk>", 0);
  std::vector<std::vector<Real>> rows;

  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream is(line);
    std::string token;
    is >> token;
    std::vector<Real> values;
    Real v;
    while (is >> v) values.push_back(v);
    if (static_cast<Index>(values.size()) != dim) {
      throw DataError("line " + std::to_string(line_no) + ": embedding row for '" + token + "' has " +
                      std::to_string(values.size()) + " values, expected " + std::to_string(dim));
    }
    std::string key = lowercase(token);
    if (table.index.count(key)) continue;  // first occurrence wins
    table.index.emplace(key, static_cast<Index>(table.tokens.size()));
    table.tokens.push_back(key);
    rows.push_back(std::move(values));
  }

  table.vectors = Mat::Zero(static_cast<Index>(table.tokens.size()), dim);
  for (size_t r = 0; r < rows.size(); ++r) {
    for (Index c = 0; c < dim; ++c) table.vectors(static_cast<Index>(r) + 1, c) = rows[r][c];
  }
  return table;
}

CharInventory::CharInventory() { index.fill(0); }

void CharInventory::add(unsigned char c) {
  if (index[c] != 0) return;
  bytes.push_back(c);
  index[c] = static_cast<Index>(bytes.size());
}

CharInventory CharInventory::from_sentences(const std::vector<AnnotatedSentence>& sentences) {
  CharInventory inv;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) {
      for (unsigned char c : t) inv.add(c);
    }
  }
  return inv;
}

Corpus load_corpus(const std::string& path) {
  auto raw = parse_jsonl(path);
  std::vector<std::string> types;
  for (const auto& s : raw) {
    for (const auto& e : s.entities) types.push_back(e.type);
  }
  Corpus corpus;
  corpus.labels = LabelInventory(std::move(types));
  for (const auto& rs : raw) {
    AnnotatedSentence s;
    s.tokens = rs.tokens;
    for (const auto& e : rs.entities) s.entities.push_back({e.start, e.end, corpus.labels.type_id(e.type)});
    validate_sentence(s, corpus.labels.num_types(), rs.line_no);
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

Corpus load_corpus(const std::string& path, const LabelInventory& labels) {
  auto raw = parse_jsonl(path);
  Corpus corpus;
  corpus.labels = labels;
  for (const auto& rs : raw) {
    AnnotatedSentence s;
    s.tokens = rs.tokens;
    for (const auto& e : rs.entities) {
      if (!labels.has_type(e.type)) {
        throw DataError("line " + std::to_string(rs.line_no) + ": entity type '" + e.type +
                        "' not in the model's label inventory");
      }
      s.entities.push_back({e.start, e.end, labels.type_id(e.type)});
    }
    validate_sentence(s, labels.num_types(), rs.line_no);
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

void write_sentence(std::ostream& out, const AnnotatedSentence& sentence, const LabelInventory& labels) {
  json rec;
  rec["tokens"] = sentence.tokens;
  rec["entities"] = json::array();
  for (const auto& e : sentence.entities) {
    rec["entities"].push_back({{"start", e.start}, {"end", e.end}, {"type", labels.type_name(e.label)}});
  }
  out << rec.dump() << "\n";
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const auto& s : corpus.sentences) write_sentence(out, s, corpus.labels);
}

Mat GoldScoreTensor::onehot() const {
  Mat m = Mat::Zero(n * n, num_labels);
  for (Index c = 0; c < n * n; ++c) m(c, type_per_cell[c]) = 1.0;
  return m;
}

GoldScoreTensor build_gold_scores(const std::vector<EntitySpan>& inner, Index n, Index num_types,
                                  std::ostream* warnings) {
  GoldScoreTensor g;
  g.n = n;
  g.num_labels = num_types + 1;
  g.type_per_cell.assign(n * n, num_types);  // 'O'
  for (const auto& e : inner) {
    Index cell = e.start * n + e.end;
    if (g.type_per_cell[cell] != num_types) {
      if (g.type_per_cell[cell] != e.label && warnings) {
        *warnings << "warning: span [" << e.start << "," << e.end
                  << "] carries two inner types; keeping the first\n";
      }
      continue;
    }
    g.type_per_cell[cell] = e.label;
  }
  return g;
}

}  // namespace nester
