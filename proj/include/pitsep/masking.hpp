#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pitsep/dsp.hpp"

namespace pitsep::masking {

// Stack of S per-stream T x F grids with identical shape.
struct StreamStack {
  std::vector<Eigen::ArrayXXd> streams;

  int num_streams() const { return static_cast<int>(streams.size()); }
  int frames() const { return streams.empty() ? 0 : static_cast<int>(streams[0].rows()); }
  int bins() const { return streams.empty() ? 0 : static_cast<int>(streams[0].cols()); }
  void check_consistent() const;
};

// Nonnegative masks summing to 1 across streams at every bin.
using MaskSet = StreamStack;
// Nonnegative per-stream magnitudes.
using StreamMagnitudes = StreamStack;

// Magnitude floor below which a mixture bin counts as silence for the IRM.
inline constexpr double kIrmSilenceEps = 1e-8;

// Per-bin softmax across the stream axis, stabilized by max subtraction.
MaskSet softmax_masks(const std::vector<Eigen::ArrayXXd>& logits);

// Gradient of a scalar loss through softmax_masks: given d(loss)/d(mask),
// returns d(loss)/d(logits).
std::vector<Eigen::ArrayXXd> softmax_backward(const MaskSet& masks,
                                              const std::vector<Eigen::ArrayXXd>& grad_masks);

// Ideal ratio mask |X_s|/|Y|, renormalized across streams; silence bins
// (|Y| <= eps) get the uniform 1/S convention.
MaskSet irm(const StreamMagnitudes& refs, const dsp::MagnitudeSpectrogram& mix);

// |X~_s| = m_s ∘ |Y|.
StreamMagnitudes apply_masks(const MaskSet& masks, const Eigen::ArrayXXd& mix_mag);

// Mask-space MSE with 1/(T*F*S) normalization (diagnostic criterion).
double loss_jm(const MaskSet& masks, const MaskSet& irm_masks);
std::vector<Eigen::ArrayXXd> loss_jm_grad(const MaskSet& masks, const MaskSet& irm_masks);

// Magnitude-space MSE with 1/(T*F*S) normalization (training criterion).
double loss_jx(const StreamMagnitudes& est, const StreamMagnitudes& refs);
std::vector<Eigen::ArrayXXd> loss_jx_grad(const StreamMagnitudes& est,
                                          const StreamMagnitudes& refs);

}  // namespace pitsep::masking
