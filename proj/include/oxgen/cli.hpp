#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oxgen/evaluator.hpp"
#include "oxgen/genclient.hpp"
#include "oxgen/imaging.hpp"
#include "oxgen/patcher.hpp"
#include "oxgen/stats.hpp"

namespace oxgen {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitInvariant = 4;

struct HttpBackendSettings {
  std::string base_url = "https://api.openai.com";
  std::string endpoint = "/v1/images/generations";
  std::string model = "dall-e-2";
  int timeout_seconds = 120;
};

/// Every knob a subcommand can read. Loaded from --config, then overridden
/// by flags; the resolved form is embedded in each artifact.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string schedule = "BL";
  unsigned jobs = 1;

  double target_length_px = kTrainAnimalLengthPx;
  TileConfig tile;
  bool keep_empty_patches = false;
  AugmentConfig augment;

  MatchConfig match;
  double score_threshold = 0.0;
  PatchScope scope = PatchScope::nonempty_only;

  StatOptions stats;
  double split_ratio = 0.8;
  int folds = 5;

  // Recorded for external trainers only.
  int epochs = 300;
  double learning_rate = 0.001;

  CostTable costs;
  RetryPolicy retry;
  std::map<std::string, HttpBackendSettings> backends;
};

/// Throws ConfigError on unknown keys or mistyped values.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

/// Entry point behind the `oxgen` binary. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oxgen
