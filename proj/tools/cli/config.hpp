#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "densedet/dataio.hpp"
#include "densedet/metrics.hpp"
#include "densedet/trainkit.hpp"

namespace densedet::cli {

// Everything a config file can set. Every key is optional; unknown keys are
// rejected so that typos fail loudly.
struct CliConfig {
  TrainConfig train;
  DataConfig data;
  SubsetSpec subset;
  EvalOptions metrics;
  std::vector<std::uint64_t> paired_seeds{1, 2, 3};
};

CliConfig parse_config(const nlohmann::json& j);
CliConfig load_config(const std::string& path);

// The defaults as a config document (all keys present).
nlohmann::json default_config_json();

}  // namespace densedet::cli
