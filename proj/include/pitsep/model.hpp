#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "pitsep/dsp.hpp"
#include "pitsep/masking.hpp"

namespace pitsep::model {

// Sliding-window geometry: N input frames mapped to the M center frames,
// advanced by `shift` frames per step. N and M must be odd so the output
// window is centered within the input window.
struct MetaFrameSpec {
  int input_frames = 41;
  int output_frames = 7;
  int shift = 1;

  void validate() const;
  // One meta-frame per shift position; every original frame is a center.
  int count(int total_frames) const;
};

struct MetaFrame {
  Eigen::VectorXd features;                  // N*F stacked raw magnitudes
  Eigen::ArrayXXd mix_window;                // M x F mixture magnitudes
  std::vector<Eigen::ArrayXXd> ref_windows;  // S of M x F, empty without references
  int center_frame = 0;
};

// Slices the spectrogram into meta-frames. Edges are zero-padded N/2
// frames each side so every original frame is the center of one item.
std::vector<MetaFrame> make_metaframes(const dsp::MagnitudeSpectrogram& mix_mag,
                                       const masking::StreamMagnitudes* refs_mag,
                                       const MetaFrameSpec& spec);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Feed-forward mask-logit network: ReLU hidden layers, linear output head
// of size S*M*F, plus the dataset feature statistics it was trained with.
struct ModelParams {
  std::vector<DenseLayer> layers;
  MetaFrameSpec metaframe;
  int streams = 2;
  int bins = 129;

  // normalization of log(1 + magnitude) features
  double feat_mean = 0.0;
  double feat_std = 1.0;

  // signal geometry, carried so inference needs only the checkpoint
  dsp::StftConfig stft;
  int sample_rate = 8000;
  uint64_t seed = 0;

  int input_dim() const { return metaframe.input_frames * bins; }
  int output_dim() const { return streams * metaframe.output_frames * bins; }
  void validate() const;
};

// Fan-in-scaled uniform initialization, deterministic given seed.
ModelParams init_model(const std::vector<int>& hidden_dims, int streams, int bins,
                       const MetaFrameSpec& spec, uint64_t seed);

struct ForwardCache {
  // acts[0] is the input batch; acts[i] the post-activation output of
  // layer i-1 (final layer linear). Rows are batch items.
  std::vector<Eigen::MatrixXd> acts;
};

// Batched forward pass; rows of x are meta-frame feature vectors
// (already normalized). Returns B x output_dim logits.
Eigen::MatrixXd forward(const ModelParams& params, const Eigen::MatrixXd& x,
                        ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<DenseLayer> layers;  // same shapes as ModelParams::layers

  void scale(double a);
  void accumulate(const Gradients& other);
};

Gradients zero_gradients(const ModelParams& params);

// Backpropagates grad_out (B x output_dim) through the cached forward
// pass; optionally also yields the gradient w.r.t. the input batch.
Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& grad_out, Eigen::MatrixXd* grad_input = nullptr);

// log(1 + m) standardized by the stored dataset statistics.
Eigen::VectorXd normalize_features(const ModelParams& params, const Eigen::VectorXd& raw);

// Reshape between a flat logit row and S arrays of M x F (stream-major).
std::vector<Eigen::ArrayXXd> row_to_streams(const ModelParams& params,
                                            const Eigen::VectorXd& row);
Eigen::VectorXd streams_to_row(const ModelParams& params,
                               const std::vector<Eigen::ArrayXXd>& streams);

// Versioned binary container: JSON manifest header + raw little-endian
// float64 parameter blocks. Round trips bit-exactly.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace pitsep::model
