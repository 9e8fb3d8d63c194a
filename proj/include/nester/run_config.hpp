#pragma once

#include "nester/model.hpp"

#include <iosfwd>

namespace nester {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Resolved run configuration: config-file values overlaid by command-line
/// flags. Paths are validated per mode before any work starts.
struct RunConfig {
  std::string mode;  // train | eval | predict | bench | synth
  std::string corpus;
  std::string dev_corpus;
  std::string embeddings;
  std::string checkpoint;
  std::string report_dir;
  std::string out;  // predict output path ('-' or empty: stdout)
  Hyperparams hp;
  Variant variant = Variant::full;
  Index synth_count = 20;
  Index emb_dim = 50;
  bool no_early_stop = false;

  /// Applies one key=value pair; unknown keys or bad values raise ConfigError.
  void set(const std::string& key, const std::string& value);
  /// Reads a key=value file ('#' starts a comment).
  void load_file(const std::string& path);
  void validate() const;
  /// Logs the fully resolved configuration, one key=value per line.
  void echo(std::ostream& out) const;
};

}  // namespace nester
