#include "nester/cli.hpp"

#include "nester/eval.hpp"
#include "nester/synth.hpp"
#include "nester/training.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

namespace nester {

namespace {

namespace fs = std::filesystem;

void write_metrics_log(const std::string& path, const std::vector<EpochRecord>& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metrics log: " + path);
  for (const auto& rec : log) {
    nlohmann::json j = {{"epoch", rec.epoch},
                        {"loss_outer", rec.loss_outer},
                        {"loss_inner", rec.loss_inner},
                        {"loss_total", rec.loss_total}};
    if (rec.has_dev) {
      j["dev_p"] = rec.dev.p;
      j["dev_r"] = rec.dev.r;
      j["dev_f1"] = rec.dev.f1;
    }
    out << j.dump() << "\n";
  }
}

}  // namespace

void cmd_train(const RunConfig& config, std::ostream& log) {
  config.echo(log);
  Corpus train = load_corpus(config.corpus);
  std::optional<Corpus> dev;
  if (!config.dev_corpus.empty()) {
    dev = load_corpus(config.dev_corpus, train.labels);
  }
  EmbeddingTable table = EmbeddingTable::load(config.embeddings, config.hp.d_w);
  CharInventory chars = CharInventory::from_sentences(train.sentences);

  Model model(train.labels, config.hp, config.variant, table, chars);
  Trainer trainer(model);

  TrainOptions options;
  options.checkpoint_path = config.checkpoint;
  options.early_stop = !config.no_early_stop;
  options.progress = &log;
  auto records = run_training(model, trainer, train, dev ? &*dev : nullptr, options);

  if (!config.report_dir.empty()) {
    fs::create_directories(config.report_dir);
    write_metrics_log((fs::path(config.report_dir) / "train_metrics.jsonl").string(), records);
  }
  log << "checkpoint written to " << config.checkpoint << "\n";
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
  config.echo(log);
  auto model = load_checkpoint(config.checkpoint);
  Corpus corpus = load_corpus(config.corpus, model->labels);
  EvalReport report = evaluate_spans(gold_spans(corpus), predict_corpus(*model, corpus), model->labels);

  write_report_table(log, report);
  fs::create_directories(config.report_dir);
  std::ofstream records((fs::path(config.report_dir) / "eval_report.jsonl").string());
  if (!records) throw DataError("cannot write report to " + config.report_dir);
  write_report_records(records, report);
  std::ofstream table((fs::path(config.report_dir) / "eval_report.txt").string());
  write_report_table(table, report);
}

void cmd_predict(const RunConfig& config, std::ostream& log) {
  config.echo(log);
  auto model = load_checkpoint(config.checkpoint);
  Corpus corpus = load_corpus(config.corpus, model->labels);

  std::ofstream file;
  bool to_stdout = config.out.empty() || config.out == "-";
  if (!to_stdout) {
    file.open(config.out);
    if (!file) throw DataError("cannot write predictions to " + config.out);
  }
  std::ostream& out = to_stdout ? log : file;

  EncodeCache cache;
  std::mt19937_64 idle(0);
  for (const auto& sentence : corpus.sentences) {
    AnnotatedSentence pred;
    pred.tokens = sentence.tokens;
    pred.entities = model->run(sentence.tokens, nullptr, false, idle, &cache).predictions();
    write_sentence(out, pred, model->labels);
  }
}

void cmd_bench(const RunConfig& config, std::ostream& log) {
  config.echo(log);
  auto model = load_checkpoint(config.checkpoint);
  Corpus corpus = load_corpus(config.corpus, model->labels);
  ThroughputReport r = throughput(*model, corpus, config.hp.batch_size);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "tokens %ld  median pass %.3f s  throughput %.1f tokens/s  batch %lld  passes %d\n",
                r.tokens, r.seconds, r.tokens_per_second, static_cast<long long>(r.batch_size),
                r.passes);
  log << buf;
}

void cmd_synth(const RunConfig& config, std::ostream& log) {
  config.echo(log);
  Corpus corpus = synth_corpus(config.synth_count, config.hp.seed);
  save_corpus(corpus, config.corpus);
  log << "wrote " << corpus.sentences.size() << " sentences to " << config.corpus << "\n";
  if (!config.embeddings.empty()) {
    write_embeddings(config.embeddings, synth_vocabulary(), config.emb_dim, config.hp.seed);
    log << "wrote embeddings (dim " << config.emb_dim << ") to " << config.embeddings << "\n";
  }
  write_stats(log, corpus_stats(corpus));
}

int run_command(const RunConfig& config, std::ostream& log, std::ostream& err) {
  try {
    config.validate();
    if (config.mode == "train") cmd_train(config, log);
    else if (config.mode == "eval") cmd_eval(config, log);
    else if (config.mode == "predict") cmd_predict(config, log);
    else if (config.mode == "bench") cmd_bench(config, log);
    else if (config.mode == "synth") cmd_synth(config, log);
    else throw ConfigError("unknown mode '" + config.mode + "'");
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace nester
