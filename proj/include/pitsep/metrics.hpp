#pragma once

#include <string>
#include <vector>

#include "pitsep/corpus.hpp"
#include "pitsep/inference.hpp"
#include "pitsep/model.hpp"

namespace pitsep::metrics {

// Cap applied on both ends so perfect or degenerate reconstructions stay
// finite.
inline constexpr double kSdrCapDb = 60.0;

// Gain-invariant SDR: est is projected onto ref with the optimal scalar
// gain, and the residual counts as distortion.
double sdr(const Waveform& est, const Waveform& ref);

// Mean over streams of SDR(est_s, ref_s) - SDR(mixture, ref_s), with the
// stream-to-reference pairing chosen utterance-level by best mean SDR.
double sdr_improvement(const std::vector<Waveform>& est_streams,
                       const std::vector<Waveform>& ref_streams, const Waveform& mixture);

struct EvalRecord {
  std::string id;
  std::string split;
  std::string mode;  // default / optimal / greedy / irm
  int in_window = 0;
  int out_window = 0;
  std::vector<double> stream_sdr_db;
  double sdri_db = 0.0;
  double mse = 0.0;  // stitched magnitude MSE vs reference magnitudes
};

struct EvalAggregate {
  std::string split;
  std::string mode;
  int in_window = 0;
  int out_window = 0;
  int count = 0;
  double mean_sdri_db = 0.0;
  double mean_mse = 0.0;
};

// Oracle separation: IRM masks from the true sources applied to the
// mixture, reconstructed with the mixture phase.
std::vector<Waveform> irm_separate(const corpus::MixtureSample& sample,
                                   const dsp::StftConfig& stft_cfg);

// One record per (sample, mode) for each checkpoint; checkpoints carry
// their own window configuration. mode "irm" scores the oracle and is
// window-independent.
struct EvalReport {
  std::vector<EvalRecord> records;
  std::vector<EvalAggregate> aggregates;
};

EvalReport eval_report(const std::vector<model::ModelParams>& checkpoints,
                       const corpus::DatasetManifest& manifest,
                       const std::vector<inference::AssignmentMode>& modes, bool with_irm);

// CSV schemas:
//   records:    id,split,mode,in_window,out_window,sdr_s1,...,sdri,mse
//   aggregates: split,mode,in_window,out_window,count,mean_sdri,mean_mse
void write_records_csv(const EvalReport& report, const std::string& path);
void write_aggregates_csv(const EvalReport& report, const std::string& path);

}  // namespace pitsep::metrics
