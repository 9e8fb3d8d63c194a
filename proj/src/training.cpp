#include "nester/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>

namespace nester {

Trainer::Trainer(Model& m) : model(m), rng(m.hp.seed) {
  flat_params_ = model.flat_group();
  graph_params_ = model.graph_group();
  for (const auto& p : graph_params_) {
    adam_m.push_back(Mat::Zero(p.rows(), p.cols()));
    adam_v.push_back(Mat::Zero(p.rows(), p.cols()));
  }
}

StepStats Trainer::train_step(const std::vector<const AnnotatedSentence*>& batch) {
  if (batch.empty()) throw DataError("train_step: empty batch");

  for (auto& p : flat_params_) p.zero_grad();
  for (auto& p : graph_params_) p.zero_grad();

  EncodeCache cache;
  Tensor loss_outer, loss_inner;
  for (const AnnotatedSentence* s : batch) {
    SentenceRun run = model.run(s->tokens, &s->entities, true, rng, &cache);
    loss_outer = loss_outer.defined() ? add(loss_outer, run.loss_outer) : run.loss_outer;
    loss_inner = loss_inner.defined() ? add(loss_inner, run.loss_inner) : run.loss_inner;
  }
  loss_inner = scale(loss_inner, 1.0 / static_cast<Real>(batch.size()));
  Tensor loss_total = add(loss_outer, scale(loss_inner, model.hp.lambda2));

  StepStats stats{loss_outer.item(), loss_inner.item(), loss_total.item()};
  if (!std::isfinite(stats.loss_total)) {
    throw NumericError("train_step: non-finite loss (outer=" + std::to_string(stats.loss_outer) +
                       ", inner=" + std::to_string(stats.loss_inner) + "); step aborted");
  }

  // Flat group follows the outer loss only; graph group follows the total.
  loss_outer.backward();
  std::vector<Mat> flat_grads;
  flat_grads.reserve(flat_params_.size());
  for (auto& p : flat_params_) {
    flat_grads.push_back(p.grad());
    p.zero_grad();
  }
  for (auto& p : graph_params_) p.zero_grad();
  loss_total.backward();

  Real sq = 0;
  for (const auto& g : flat_grads) sq += g.squaredNorm();
  for (const auto& p : graph_params_) sq += p.grad().squaredNorm();
  const Real norm = std::sqrt(sq);
  const Real clip = norm > kClipNorm ? kClipNorm / norm : 1.0;

  for (size_t i = 0; i < flat_params_.size(); ++i) {
    flat_params_[i].raw_value() -= model.hp.lr_flat * clip * flat_grads[i];
  }
  ++adam_t;
  const Real bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<Real>(adam_t));
  const Real bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<Real>(adam_t));
  for (size_t i = 0; i < graph_params_.size(); ++i) {
    Mat g = clip * graph_params_[i].grad();
    adam_m[i] = kAdamBeta1 * adam_m[i] + (1.0 - kAdamBeta1) * g;
    adam_v[i] = kAdamBeta2 * adam_v[i] + (1.0 - kAdamBeta2) * g.cwiseProduct(g);
    Mat update = (adam_m[i] / bc1).array() / ((adam_v[i] / bc2).array().sqrt() + kAdamEps);
    graph_params_[i].raw_value() -= model.hp.lr_graph * update.matrix();
  }
  return stats;
}

std::vector<EpochRecord> run_training(Model& model, Trainer& trainer, const Corpus& train,
                                      const Corpus* dev, const TrainOptions& options) {
  if (train.sentences.empty()) throw DataError("run_training: empty training corpus");
  const Index epochs = options.epochs > 0 ? options.epochs : model.hp.epochs;
  const Index batch_size = model.hp.batch_size;

  std::vector<size_t> order(train.sentences.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochRecord> log;
  Real best_dev = -1.0;
  Index since_best = 0;

  for (Index epoch = 1; epoch <= epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), trainer.rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (size_t at = 0; at < order.size(); at += batch_size) {
      std::vector<const AnnotatedSentence*> batch;
      for (size_t i = at; i < std::min(order.size(), at + batch_size); ++i) {
        batch.push_back(&train.sentences[order[i]]);
      }
      StepStats stats = trainer.train_step(batch);
      rec.loss_outer += stats.loss_outer;
      rec.loss_inner += stats.loss_inner;
      rec.loss_total += stats.loss_total;
    }
    if (dev) {
      rec.has_dev = true;
      rec.dev = evaluate_model(model, *dev);
    }
    log.push_back(rec);
    if (options.progress) {
      char buf[256];
      if (rec.has_dev) {
        std::snprintf(buf, sizeof(buf), "epoch %3lld  outer %.4f  inner %.4f  total %.4f  dev-f1 %.4f",
                      static_cast<long long>(epoch), rec.loss_outer, rec.loss_inner, rec.loss_total,
                      rec.dev.f1);
      } else {
        std::snprintf(buf, sizeof(buf), "epoch %3lld  outer %.4f  inner %.4f  total %.4f",
                      static_cast<long long>(epoch), rec.loss_outer, rec.loss_inner, rec.loss_total);
      }
      (*options.progress) << buf << "\n";
    }

    if (dev) {
      if (rec.dev.f1 > best_dev) {
        best_dev = rec.dev.f1;
        since_best = 0;
        if (!options.checkpoint_path.empty()) save_checkpoint(model, &trainer, options.checkpoint_path);
      } else {
        ++since_best;
        if (options.early_stop && since_best >= options.patience) break;
      }
    }
  }
  if (!dev && !options.checkpoint_path.empty()) {
    save_checkpoint(model, &trainer, options.checkpoint_path);
  }
  return log;
}

// -- checkpoint io -------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'N', 'E', 'S', 'T', 'E', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_f64(std::ostream& out, Real v) { out.write(reinterpret_cast<const char*>(&v), 8); }

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_mat(std::ostream& out, const Mat& m) {
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw CheckpointError("checkpoint truncated");
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw CheckpointError("checkpoint truncated");
  return v;
}

Real read_f64(std::istream& in) {
  Real v;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw CheckpointError("checkpoint truncated");
  return v;
}

std::string read_string(std::istream& in) {
  std::uint32_t len = read_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw CheckpointError("checkpoint truncated");
  return s;
}

Mat read_mat(std::istream& in) {
  Index rows = static_cast<Index>(read_u64(in));
  Index cols = static_cast<Index>(read_u64(in));
  if (rows <= 0 || cols <= 0) throw CheckpointError("checkpoint holds an empty tensor");
  Mat m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
  if (!in) throw CheckpointError("checkpoint truncated");
  return m;
}

struct RawCheckpoint {
  std::uint8_t variant;
  Hyperparams hp;
  std::vector<std::string> types;
  std::vector<std::string> vocab;
  Index emb_dim;
  std::vector<unsigned char> chars;
  std::vector<std::pair<std::string, Mat>> params;
  bool has_optimizer = false;
  std::uint64_t adam_t = 0;
  std::vector<std::pair<Mat, Mat>> slots;
};

RawCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw CheckpointError("not a model checkpoint (bad magic header): " + path);
  }
  std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  RawCheckpoint raw;
  raw.variant = static_cast<std::uint8_t>(read_u32(in));
  raw.hp.lr_flat = read_f64(in);
  raw.hp.lr_graph = read_f64(in);
  raw.hp.dropout = read_f64(in);
  raw.hp.lambda1 = read_f64(in);
  raw.hp.lambda2 = read_f64(in);
  raw.hp.hidden_bilstm = static_cast<Index>(read_u64(in));
  raw.hp.hidden_gcn = static_cast<Index>(read_u64(in));
  raw.hp.batch_size = static_cast<Index>(read_u64(in));
  raw.hp.epochs = static_cast<Index>(read_u64(in));
  raw.hp.seed = read_u64(in);
  raw.hp.d_w = static_cast<Index>(read_u64(in));
  raw.hp.d_c = static_cast<Index>(read_u64(in));

  std::uint32_t ntypes = read_u32(in);
  for (std::uint32_t i = 0; i < ntypes; ++i) raw.types.push_back(read_string(in));
  std::uint32_t nvocab = read_u32(in);
  for (std::uint32_t i = 0; i < nvocab; ++i) raw.vocab.push_back(read_string(in));
  raw.emb_dim = static_cast<Index>(read_u64(in));
  std::uint32_t nchars = read_u32(in);
  for (std::uint32_t i = 0; i < nchars; ++i) {
    raw.chars.push_back(static_cast<unsigned char>(read_u32(in)));
  }
  std::uint32_t nparams = read_u32(in);
  for (std::uint32_t i = 0; i < nparams; ++i) {
    std::string name = read_string(in);
    raw.params.emplace_back(std::move(name), read_mat(in));
  }
  raw.has_optimizer = read_u32(in) != 0;
  if (raw.has_optimizer) {
    raw.adam_t = read_u64(in);
    std::uint32_t nslots = read_u32(in);
    for (std::uint32_t i = 0; i < nslots; ++i) {
      Mat m = read_mat(in);
      Mat v = read_mat(in);
      raw.slots.emplace_back(std::move(m), std::move(v));
    }
  }
  return raw;
}

void assign_params(Model& model, const RawCheckpoint& raw) {
  auto named = model.named_params();
  if (named.size() != raw.params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(raw.params.size()) +
                          " tensors, model expects " + std::to_string(named.size()));
  }
  for (size_t i = 0; i < named.size(); ++i) {
    auto& [name, tensor] = named[i];
    const auto& [saved_name, saved] = raw.params[i];
    if (name != saved_name) {
      throw CheckpointError("checkpoint tensor '" + saved_name + "' does not match model tensor '" +
                            name + "'");
    }
    if (saved.rows() != tensor.rows() || saved.cols() != tensor.cols()) {
      throw CheckpointError("checkpoint tensor '" + name + "' has storage " +
                            std::to_string(saved.rows()) + "x" + std::to_string(saved.cols()) +
                            ", model expects " + std::to_string(tensor.rows()) + "x" +
                            std::to_string(tensor.cols()));
    }
    tensor.raw_value() = saved;
  }
}

void assign_optimizer(Trainer& trainer, const RawCheckpoint& raw) {
  if (!raw.has_optimizer) return;
  if (raw.slots.size() != trainer.adam_m.size()) {
    throw CheckpointError("checkpoint optimizer slots do not match the graph parameter group");
  }
  trainer.adam_t = raw.adam_t;
  for (size_t i = 0; i < raw.slots.size(); ++i) {
    trainer.adam_m[i] = raw.slots[i].first;
    trainer.adam_v[i] = raw.slots[i].second;
  }
}

std::string inventory_to_string(const std::vector<std::string>& types) {
  std::string out = "{";
  for (size_t i = 0; i < types.size(); ++i) {
    if (i) out += ",";
    out += types[i];
  }
  return out + "}";
}

}  // namespace

void save_checkpoint(const Model& model, const Trainer* trainer, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(model.variant));
  write_f64(out, model.hp.lr_flat);
  write_f64(out, model.hp.lr_graph);
  write_f64(out, model.hp.dropout);
  write_f64(out, model.hp.lambda1);
  write_f64(out, model.hp.lambda2);
  write_u64(out, static_cast<std::uint64_t>(model.hp.hidden_bilstm));
  write_u64(out, static_cast<std::uint64_t>(model.hp.hidden_gcn));
  write_u64(out, static_cast<std::uint64_t>(model.hp.batch_size));
  write_u64(out, static_cast<std::uint64_t>(model.hp.epochs));
  write_u64(out, model.hp.seed);
  write_u64(out, static_cast<std::uint64_t>(model.hp.d_w));
  write_u64(out, static_cast<std::uint64_t>(model.hp.d_c));

  write_u32(out, static_cast<std::uint32_t>(model.labels.types().size()));
  for (const auto& t : model.labels.types()) write_string(out, t);
  const auto& table = model.repr.table();
  write_u32(out, static_cast<std::uint32_t>(table.tokens.size()));
  for (const auto& t : table.tokens) write_string(out, t);
  write_u64(out, static_cast<std::uint64_t>(table.dim));
  const auto& chars = model.repr.chars();
  write_u32(out, static_cast<std::uint32_t>(chars.bytes.size()));
  for (unsigned char c : chars.bytes) write_u32(out, c);

  auto named = model.named_params();
  write_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    write_string(out, name);
    write_mat(out, tensor.value());
  }

  write_u32(out, trainer ? 1 : 0);
  if (trainer) {
    write_u64(out, trainer->adam_t);
    write_u32(out, static_cast<std::uint32_t>(trainer->adam_m.size()));
    for (size_t i = 0; i < trainer->adam_m.size(); ++i) {
      write_mat(out, trainer->adam_m[i]);
      write_mat(out, trainer->adam_v[i]);
    }
  }
  if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
  RawCheckpoint raw = read_checkpoint(path);
  EmbeddingTable table;
  table.dim = raw.emb_dim;
  table.tokens = raw.vocab;
  for (size_t i = 0; i < raw.vocab.size(); ++i) {
    table.index.emplace(raw.vocab[i], static_cast<Index>(i));
  }
  table.vectors = Mat::Zero(static_cast<Index>(raw.vocab.size()), raw.emb_dim);
  CharInventory chars;
  for (unsigned char c : raw.chars) chars.add(c);

  auto model = std::make_unique<Model>(LabelInventory(raw.types), raw.hp,
                                       static_cast<Variant>(raw.variant), table, chars);
  assign_params(*model, raw);
  return model;
}

void load_checkpoint_into(Model& model, Trainer* trainer, const std::string& path) {
  RawCheckpoint raw = read_checkpoint(path);
  LabelInventory saved(raw.types);
  if (!(saved == model.labels)) {
    throw CheckpointError("label inventory mismatch: checkpoint has " +
                          inventory_to_string(saved.types()) + ", model has " +
                          inventory_to_string(model.labels.types()));
  }
  if (static_cast<Variant>(raw.variant) != model.variant) {
    throw CheckpointError("checkpoint variant '" + variant_name(static_cast<Variant>(raw.variant)) +
                          "' does not match model variant '" + variant_name(model.variant) + "'");
  }
  assign_params(model, raw);
  if (trainer) assign_optimizer(*trainer, raw);
}

}  // namespace nester
