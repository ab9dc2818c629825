#pragma once

#include <string>

#include "pitsep/corpus.hpp"
#include "pitsep/dsp.hpp"
#include "pitsep/inference.hpp"
#include "pitsep/training.hpp"

namespace pitsep::config {

// Full experiment configuration. Serialized as strict JSON: unknown keys
// are rejected and the file round-trips losslessly.
struct RunConfig {
  uint64_t seed = 1234;

  dsp::StftConfig stft = dsp::StftConfig::desk_default();
  int sample_rate = 8000;

  corpus::CorpusConfig corpus;
  training::TrainConfig training;
  inference::AssignmentMode inference_mode = inference::AssignmentMode::kDefault;
  bool with_irm = false;

  void validate() const;
};

RunConfig default_config();

std::string to_json(const RunConfig& cfg);
RunConfig from_json(const std::string& text);

RunConfig load(const std::string& path);
void save(const RunConfig& cfg, const std::string& path);

}  // namespace pitsep::config
