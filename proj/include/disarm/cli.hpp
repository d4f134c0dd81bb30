#pragma once

#include <optional>
#include <string>

#include "disarm/config.hpp"

// Command implementations behind the `disarm` tool. Exit codes: 0 success,
// 1 validation/contract failure, 2 configuration error (thrown ConfigError).

namespace disarm::cli {

int cmd_build_dataset(const config::RunConfig& cfg);
int cmd_fetch_contexts(const config::RunConfig& cfg);
int cmd_train(const config::RunConfig& cfg);
int cmd_evaluate(const config::RunConfig& cfg, const std::string& checkpoint_override = "");
int cmd_ablate(const config::RunConfig& cfg, const std::string& variant_override = "");
int cmd_stats(const config::RunConfig& cfg);

}  // namespace disarm::cli
