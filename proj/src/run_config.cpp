#include "nester/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace nester {

namespace {

Real parse_real(const std::string& key, const std::string& value) {
  try {
    size_t at = 0;
    Real v = std::stod(value, &at);
    if (at != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': '" + value + "' is not a number");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    size_t at = 0;
    long long v = std::stoll(value, &at);
    if (at != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': '" + value + "' is not an integer");
  }
}

void require_file(const std::string& key, const std::string& path) {
  if (path.empty()) throw ConfigError("missing required config field '" + key + "'");
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config field '" + key + "': path does not exist: " + path);
  }
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "corpus") corpus = value;
  else if (key == "dev_corpus") dev_corpus = value;
  else if (key == "embeddings") embeddings = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "report_dir") report_dir = value;
  else if (key == "out") out = value;
  else if (key == "lr_flat") hp.lr_flat = parse_real(key, value);
  else if (key == "lr_graph") hp.lr_graph = parse_real(key, value);
  else if (key == "dropout") hp.dropout = parse_real(key, value);
  else if (key == "lambda1") hp.lambda1 = parse_real(key, value);
  else if (key == "lambda2") hp.lambda2 = parse_real(key, value);
  else if (key == "hidden") hp.hidden_bilstm = hp.hidden_gcn = static_cast<Index>(parse_int(key, value));
  else if (key == "hidden_bilstm") hp.hidden_bilstm = static_cast<Index>(parse_int(key, value));
  else if (key == "hidden_gcn") hp.hidden_gcn = static_cast<Index>(parse_int(key, value));
  else if (key == "batch_size") hp.batch_size = static_cast<Index>(parse_int(key, value));
  else if (key == "epochs") hp.epochs = static_cast<Index>(parse_int(key, value));
  else if (key == "seed") hp.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "d_w") hp.d_w = static_cast<Index>(parse_int(key, value));
  else if (key == "d_c") hp.d_c = static_cast<Index>(parse_int(key, value));
  else if (key == "variant") variant = variant_from_name(value);
  else if (key == "count") synth_count = static_cast<Index>(parse_int(key, value));
  else if (key == "emb_dim") emb_dim = static_cast<Index>(parse_int(key, value));
  else if (key == "no_early_stop") no_early_stop = value == "1" || value == "true";
  else throw ConfigError("unknown config field '" + key + "'");
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config file line " + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      auto a = s.find_first_not_of(" \t");
      auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::validate() const {
  try {
    hp.validate();
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  if (mode == "train") {
    require_file("corpus", corpus);
    require_file("embeddings", embeddings);
    if (!dev_corpus.empty()) require_file("dev_corpus", dev_corpus);
    if (checkpoint.empty()) throw ConfigError("missing required config field 'checkpoint'");
  } else if (mode == "eval" || mode == "bench") {
    require_file("corpus", corpus);
    require_file("checkpoint", checkpoint);
    if (mode == "eval" && report_dir.empty()) {
      throw ConfigError("missing required config field 'report_dir'");
    }
  } else if (mode == "predict") {
    require_file("corpus", corpus);
    require_file("checkpoint", checkpoint);
  } else if (mode == "synth") {
    if (corpus.empty()) throw ConfigError("missing required config field 'corpus'");
    if (synth_count < 1) throw ConfigError("config field 'count' must be at least 1");
    if (emb_dim < 1) throw ConfigError("config field 'emb_dim' must be at least 1");
  } else {
    throw ConfigError("unknown mode '" + mode + "'");
  }
}

void RunConfig::echo(std::ostream& o) const {
  o << "config:\n";
  o << "  mode=" << mode << "\n";
  auto put = [&](const char* k, const std::string& v) {
    if (!v.empty()) o << "  " << k << "=" << v << "\n";
  };
  put("corpus", corpus);
  put("dev_corpus", dev_corpus);
  put("embeddings", embeddings);
  put("checkpoint", checkpoint);
  put("report_dir", report_dir);
  put("out", out);
  o << "  variant=" << variant_name(variant) << "\n";
  o << "  lr_flat=" << hp.lr_flat << " lr_graph=" << hp.lr_graph << " dropout=" << hp.dropout
    << " lambda1=" << hp.lambda1 << " lambda2=" << hp.lambda2 << "\n";
  o << "  hidden_bilstm=" << hp.hidden_bilstm << " hidden_gcn=" << hp.hidden_gcn << " d_w=" << hp.d_w
    << " d_c=" << hp.d_c << "\n";
  o << "  batch_size=" << hp.batch_size << " epochs=" << hp.epochs << " seed=" << hp.seed << "\n";
  if (mode == "synth") o << "  count=" << synth_count << " emb_dim=" << emb_dim << "\n";
}

}  // namespace nester
