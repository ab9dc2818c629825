#pragma once

#include <string>
#include <vector>

#include "pitsep/assignment.hpp"
#include "pitsep/model.hpp"

namespace pitsep::inference {

// How output streams are identified across meta-frames while stitching.
enum class AssignmentMode { kDefault, kOptimal, kGreedy };

AssignmentMode mode_from_string(const std::string& s);
std::string to_string(AssignmentMode m);

// Masked magnitudes produced for one meta-frame position.
struct MetaFrameOutput {
  std::vector<Eigen::ArrayXXd> est;  // S of M x F
  int center_frame = 0;
};

struct StitchedEstimate {
  std::vector<Eigen::ArrayXXd> stream_mags;          // S of T x F averaged magnitudes
  std::vector<assignment::Permutation> trace;        // chosen permutation per meta-frame
  std::vector<int> coverage;                         // meta-frames covering each frame
};

// Output stream s always maps to stitched stream s; all-identity trace.
StitchedEstimate stitch_default(const std::vector<MetaFrameOutput>& outputs, int total_frames);

// Per meta-frame, streams are reordered by the least-cost assignment
// against the reference windows before averaging.
StitchedEstimate stitch_optimal(const std::vector<MetaFrameOutput>& outputs,
                                const std::vector<std::vector<Eigen::ArrayXXd>>& ref_windows,
                                int total_frames);

// First meta-frame keeps identity; each later one takes the permutation
// closest to the already-stitched content on overlapping frames. Falls
// back to default when shift >= M (no overlap).
StitchedEstimate stitch_greedy(const std::vector<MetaFrameOutput>& outputs, int shift,
                               int total_frames);

struct SeparationResult {
  std::vector<Waveform> streams;
  StitchedEstimate stitched;
};

// Runs the model over the mixture with the sliding window, stitches under
// `mode`, and reconstructs waveforms with the mixture's phase. Optimal
// mode requires the true sources.
SeparationResult separate(const model::ModelParams& params, const Waveform& mixture,
                          AssignmentMode mode, const std::vector<Waveform>* refs = nullptr);

// Masked meta-frame outputs only (the shared front half of separate).
std::vector<MetaFrameOutput> run_model(const model::ModelParams& params,
                                       const dsp::MagnitudeSpectrogram& mix_mag);

// CSV rows: metaframe_index,perm with the permutation as dash-joined
// reference indices.
void write_trace_csv(const StitchedEstimate& stitched, const std::string& path);

}  // namespace pitsep::inference
