#include "pitsep/dsp.hpp"

#include <cmath>
#include <numbers>

namespace pitsep::dsp {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void StftConfig::validate() const {
  if (hop <= 0 || frame_len <= 0 || fft_len <= 0)
    throw InvalidArgument("StftConfig: all sizes must be positive");
  if (hop > frame_len || frame_len > fft_len)
    throw InvalidArgument("StftConfig: require 0 < hop <= frame_len <= fft_len");
  if (!is_power_of_two(fft_len))
    throw InvalidArgument("StftConfig: fft_len must be a power of two");
}

Eigen::ArrayXd sqrt_hann_window(int n) {
  Eigen::ArrayXd w(n);
  for (int i = 0; i < n; ++i) {
    double hann = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / n));
    w[i] = std::sqrt(hann);
  }
  return w;
}

void fft(std::vector<std::complex<double>>& data, bool inverse) {
  const int n = static_cast<int>(data.size());
  if (!is_power_of_two(n)) throw InvalidArgument("fft: size must be a power of two");

  // Bit-reversal permutation.
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  for (int len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * std::numbers::pi / len * (inverse ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int k = 0; k < len / 2; ++k) {
        std::complex<double> u = data[i + k];
        std::complex<double> v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  if (inverse) {
    for (auto& x : data) x /= static_cast<double>(n);
  }
}

int stft_frame_count(int num_samples, const StftConfig& cfg) {
  if (num_samples < cfg.frame_len) return 0;
  int rem = num_samples - cfg.frame_len;
  return 1 + (rem + cfg.hop - 1) / cfg.hop;  // partial last frame kept, zero-padded
}

ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg) {
  cfg.validate();
  const int len = wave.size();
  if (len < cfg.frame_len)
    throw InvalidArgument("stft: wave shorter than one frame");

  const int T = stft_frame_count(len, cfg);
  const int F = cfg.bins();
  const Eigen::ArrayXd win = sqrt_hann_window(cfg.frame_len);

  ComplexSpectrogram out;
  out.values.resize(T, F);
  std::vector<std::complex<double>> buf(cfg.fft_len);
  for (int t = 0; t < T; ++t) {
    const int start = t * cfg.hop;
    for (int i = 0; i < cfg.frame_len; ++i) {
      const int idx = start + i;
      double x = idx < len ? wave.samples[idx] : 0.0;
      buf[i] = x * win[i];
    }
    std::fill(buf.begin() + cfg.frame_len, buf.end(), std::complex<double>(0.0));
    fft(buf);
    for (int f = 0; f < F; ++f) out.values(t, f) = buf[f];
  }
  return out;
}

Waveform istft(const ComplexSpectrogram& spec, const StftConfig& cfg, int sample_rate) {
  cfg.validate();
  const int T = spec.frames();
  const int F = cfg.bins();
  if (spec.bins() != F)
    throw InvalidArgument("istft: spectrogram bins do not match config");
  if (T < 1) throw InvalidArgument("istft: empty spectrogram");

  const Eigen::ArrayXd win = sqrt_hann_window(cfg.frame_len);
  const int out_len = (T - 1) * cfg.hop + cfg.frame_len;
  std::vector<double> acc(out_len, 0.0);
  std::vector<double> norm(out_len, 0.0);

  std::vector<std::complex<double>> buf(cfg.fft_len);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) buf[f] = spec.values(t, f);
    for (int f = F; f < cfg.fft_len; ++f) buf[f] = std::conj(spec.values(t, cfg.fft_len - f));
    fft(buf, /*inverse=*/true);
    const int start = t * cfg.hop;
    for (int i = 0; i < cfg.frame_len; ++i) {
      acc[start + i] += buf[i].real() * win[i];
      norm[start + i] += win[i] * win[i];
    }
  }

  constexpr double kEps = 1e-12;
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.resize(out_len);
  for (int i = 0; i < out_len; ++i)
    out.samples[i] = norm[i] > kEps ? acc[i] / norm[i] : 0.0;
  return out;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
  MagnitudeSpectrogram out;
  out.values = spec.values.array().abs();
  return out;
}

ComplexSpectrogram with_phase(const MagnitudeSpectrogram& mag, const ComplexSpectrogram& phase_src) {
  if (mag.frames() != phase_src.frames() || mag.bins() != phase_src.bins())
    throw InvalidArgument("with_phase: dimension mismatch");
  ComplexSpectrogram out;
  out.values.resize(mag.frames(), mag.bins());
  for (int t = 0; t < mag.frames(); ++t) {
    for (int f = 0; f < mag.bins(); ++f) {
      std::complex<double> p = phase_src.values(t, f);
      double a = std::abs(p);
      std::complex<double> unit = a > 0.0 ? p / a : std::complex<double>(1.0, 0.0);
      out.values(t, f) = mag.values(t, f) * unit;
    }
  }
  return out;
}

}  // namespace pitsep::dsp
