#pragma once

#include "equifm/config.hpp"
#include "equifm/data.hpp"

#include <ostream>

namespace equifm::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// "toy" builds the synthetic set; anything else is read as an XYZ file.
Dataset load_dataset(const RunConfig& cfg);

void cmd_train(const RunConfig& cfg, std::ostream& log);
void cmd_sample(const RunConfig& cfg, std::ostream& log);
void cmd_eval(const RunConfig& cfg, std::ostream& log);
void cmd_analyze_mi(const RunConfig& cfg, std::ostream& log);
void cmd_bench_eot(const RunConfig& cfg, std::ostream& log);

}  // namespace equifm::cli
