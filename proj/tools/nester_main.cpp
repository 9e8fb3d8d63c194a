#include "nester/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

namespace {

struct FlagSet {
  std::map<std::string, std::string> values;  // config key -> raw value
  std::string config_path;
};

void add_common_flags(CLI::App* cmd, FlagSet& flags) {
  cmd->add_option("--config", flags.config_path, "key=value config file; flags override it");
  static const std::vector<std::pair<std::string, std::string>> kOptions = {
      {"--corpus", "corpus"},
      {"--dev-corpus", "dev_corpus"},
      {"--embeddings", "embeddings"},
      {"--checkpoint", "checkpoint"},
      {"--report-dir", "report_dir"},
      {"--out", "out"},
      {"--seed", "seed"},
      {"--lr-flat", "lr_flat"},
      {"--lr-graph", "lr_graph"},
      {"--dropout", "dropout"},
      {"--lambda1", "lambda1"},
      {"--lambda2", "lambda2"},
      {"--batch-size", "batch_size"},
      {"--epochs", "epochs"},
      {"--hidden", "hidden"},
      {"--hidden-bilstm", "hidden_bilstm"},
      {"--hidden-gcn", "hidden_gcn"},
      {"--d-w", "d_w"},
      {"--d-c", "d_c"},
      {"--variant", "variant"},
      {"--emb-dim", "emb_dim"},
  };
  for (const auto& [flag, key] : kOptions) {
    std::string k = key;
    cmd->add_option_function<std::string>(
        flag, [&flags, k](const std::string& v) { flags.values[k] = v; });
  }
  cmd->add_flag_function("--no-early-stop",
                         [&flags](int64_t) { flags.values["no_early_stop"] = "true"; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nested named-entity recognition engine"};
  app.require_subcommand(1);

  std::map<std::string, FlagSet> flag_sets;
  std::vector<std::string> modes = {"train", "eval", "predict", "bench", "synth"};
  std::map<std::string, CLI::App*> cmds;
  for (const auto& mode : modes) {
    CLI::App* cmd = app.add_subcommand(mode);
    add_common_flags(cmd, flag_sets[mode]);
    if (mode == "synth") {
      cmd->add_option_function<std::string>(
          "-n,--count", [&flag_sets](const std::string& v) { flag_sets["synth"].values["count"] = v; },
          "number of sentences to generate");
    }
    cmds[mode] = cmd;
  }
  cmds["train"]->description("train a model and write the best checkpoint");
  cmds["eval"]->description("score a checkpoint against a gold corpus");
  cmds["predict"]->description("emit predicted spans in the corpus format");
  cmds["bench"]->description("measure decoding throughput");
  cmds["synth"]->description("generate a synthetic nested corpus");

  CLI11_PARSE(app, argc, argv);

  std::string mode;
  for (const auto& m : modes) {
    if (cmds[m]->parsed()) mode = m;
  }
  const FlagSet& flags = flag_sets[mode];

  nester::RunConfig config;
  config.mode = mode;
  try {
    if (!flags.config_path.empty()) config.load_file(flags.config_path);
    for (const auto& [key, value] : flags.values) config.set(key, value);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return nester::run_command(config, std::cout, std::cerr);
}
