#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "pitsep/errors.hpp"

namespace pitsep {

// Time-domain signal, nominal amplitude range [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {}
  int size() const { return static_cast<int>(samples.size()); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

namespace dsp {

// Analysis/synthesis geometry. The window is a square-root Hann pair,
// which satisfies COLA at 50% overlap.
struct StftConfig {
  int frame_len = 256;
  int hop = 128;
  int fft_len = 256;

  int bins() const { return fft_len / 2 + 1; }
  void validate() const;

  // 8 kHz, 32 ms frames, 16 ms shift -> 129 bins.
  static StftConfig desk_default() { return {256, 128, 256}; }
  // 16 kHz, 32 ms frames, 16 ms shift -> 257 bins.
  static StftConfig wideband() { return {512, 256, 512}; }
};

// T x F complex time-frequency grid (rows = frames).
struct ComplexSpectrogram {
  Eigen::MatrixXcd values;

  int frames() const { return static_cast<int>(values.rows()); }
  int bins() const { return static_cast<int>(values.cols()); }
};

// T x F nonnegative magnitudes.
struct MagnitudeSpectrogram {
  Eigen::ArrayXXd values;

  int frames() const { return static_cast<int>(values.rows()); }
  int bins() const { return static_cast<int>(values.cols()); }
};

// Square-root periodic Hann, length n.
Eigen::ArrayXd sqrt_hann_window(int n);

// In-place radix-2 FFT / inverse FFT. Size must be a power of two.
void fft(std::vector<std::complex<double>>& data, bool inverse = false);

// Frames the wave at cfg.hop, windows, and transforms. The final partial
// frame is zero-padded, so T = 1 + ceil((len - frame_len) / hop).
ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg);

// Windowed overlap-add synthesis with COLA normalization.
// Output length is (T - 1) * hop + frame_len.
Waveform istft(const ComplexSpectrogram& spec, const StftConfig& cfg, int sample_rate);

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);

// Recombine magnitudes with the phase of `phase_src` (per-bin unit phasors).
ComplexSpectrogram with_phase(const MagnitudeSpectrogram& mag, const ComplexSpectrogram& phase_src);

// Number of frames stft() produces for a wave of `num_samples` samples.
int stft_frame_count(int num_samples, const StftConfig& cfg);

}  // namespace dsp
}  // namespace pitsep
