#pragma once

#include "nester/run_config.hpp"

#include <iosfwd>

namespace nester {

/// Command implementations behind the CLI; they throw ConfigError /
/// DataError for invalid input and NumericError for runtime failures.
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_eval(const RunConfig& config, std::ostream& log);
void cmd_predict(const RunConfig& config, std::ostream& log);
void cmd_bench(const RunConfig& config, std::ostream& log);
void cmd_synth(const RunConfig& config, std::ostream& log);

/// Dispatch with exit-code mapping: 0 ok, 1 validation error, 2 runtime or
/// numeric error.
int run_command(const RunConfig& config, std::ostream& log, std::ostream& err);

}  // namespace nester
