#pragma once

#include <filesystem>
#include <string>

#include "slicetrack/phantom.hpp"
#include "slicetrack/tracking.hpp"

namespace slicetrack {

struct ActivateConfig {
  int permutations = 2000;
  double threshold = 0.005;
  std::uint64_t seed = 1;
};

struct EvaluateConfig {
  int atr_splits = 4;
  std::uint64_t seed = 1;
};

// Schema-versioned pipeline configuration. Unknown keys are rejected at
// every level; missing keys take the defaults above.
struct PipelineConfig {
  PhantomConfig phantom;
  TrackConfig track;
  ActivateConfig activate;
  EvaluateConfig evaluate;
};

PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text, const std::string& where);
std::string default_config_json();

}  // namespace slicetrack
