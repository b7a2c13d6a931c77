#pragma once

#include <string>

#include "benchforge/cli/config.hpp"

namespace benchforge::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

int cmd_structure(const RunConfig& cfg);
int cmd_generate(const RunConfig& cfg);
int cmd_dedup(const RunConfig& cfg);
int cmd_evaluate(const RunConfig& cfg);
int cmd_classify(const RunConfig& cfg);
int cmd_analyze(const RunConfig& cfg);
int cmd_tsguess(const RunConfig& cfg);
int cmd_ledger(const RunConfig& cfg);

/// Parses argv, dispatches and maps exceptions to exit codes.
int run(int argc, char** argv);

}  // namespace benchforge::cli
