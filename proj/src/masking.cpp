#include "pitsep/masking.hpp"

namespace pitsep::masking {

void StreamStack::check_consistent() const {
  if (streams.empty()) throw InvalidArgument("StreamStack: no streams");
  for (const auto& s : streams) {
    if (s.rows() != streams[0].rows() || s.cols() != streams[0].cols())
      throw InvalidArgument("StreamStack: inconsistent stream shapes");
  }
}

namespace {

void check_same_shape(const StreamStack& a, const StreamStack& b, const char* op) {
  a.check_consistent();
  b.check_consistent();
  if (a.num_streams() != b.num_streams() || a.frames() != b.frames() || a.bins() != b.bins())
    throw InvalidArgument(std::string(op) + ": dimension mismatch");
}

}  // namespace

MaskSet softmax_masks(const std::vector<Eigen::ArrayXXd>& logits) {
  MaskSet out;
  out.streams = logits;
  out.check_consistent();
  const int S = out.num_streams();

  Eigen::ArrayXXd mx = out.streams[0];
  for (int s = 1; s < S; ++s) mx = mx.max(out.streams[s]);

  Eigen::ArrayXXd denom = Eigen::ArrayXXd::Zero(mx.rows(), mx.cols());
  for (int s = 0; s < S; ++s) {
    out.streams[s] = (out.streams[s] - mx).exp();
    denom += out.streams[s];
  }
  for (int s = 0; s < S; ++s) out.streams[s] /= denom;
  return out;
}

std::vector<Eigen::ArrayXXd> softmax_backward(const MaskSet& masks,
                                              const std::vector<Eigen::ArrayXXd>& grad_masks) {
  const int S = masks.num_streams();
  if (static_cast<int>(grad_masks.size()) != S)
    throw InvalidArgument("softmax_backward: stream count mismatch");

  // d/dlogit_s = m_s * (g_s - sum_k m_k g_k)
  Eigen::ArrayXXd dot = Eigen::ArrayXXd::Zero(masks.frames(), masks.bins());
  for (int s = 0; s < S; ++s) dot += masks.streams[s] * grad_masks[s];
  std::vector<Eigen::ArrayXXd> out(S);
  for (int s = 0; s < S; ++s) out[s] = masks.streams[s] * (grad_masks[s] - dot);
  return out;
}

MaskSet irm(const StreamMagnitudes& refs, const dsp::MagnitudeSpectrogram& mix) {
  refs.check_consistent();
  if (refs.frames() != mix.frames() || refs.bins() != mix.bins())
    throw InvalidArgument("irm: dimension mismatch");
  const int S = refs.num_streams();
  const double uniform = 1.0 / S;

  MaskSet out;
  out.streams.assign(S, Eigen::ArrayXXd::Zero(mix.frames(), mix.bins()));
  for (int t = 0; t < mix.frames(); ++t) {
    for (int f = 0; f < mix.bins(); ++f) {
      double y = mix.values(t, f);
      if (y <= kIrmSilenceEps) {
        for (int s = 0; s < S; ++s) out.streams[s](t, f) = uniform;
        continue;
      }
      // Raw ratios need not sum to 1 (magnitudes are not additive under
      // phase), so renormalize across streams.
      double total = 0.0;
      for (int s = 0; s < S; ++s) total += refs.streams[s](t, f);
      if (total <= 0.0) {
        for (int s = 0; s < S; ++s) out.streams[s](t, f) = uniform;
      } else {
        for (int s = 0; s < S; ++s) out.streams[s](t, f) = refs.streams[s](t, f) / total;
      }
    }
  }
  return out;
}

StreamMagnitudes apply_masks(const MaskSet& masks, const Eigen::ArrayXXd& mix_mag) {
  masks.check_consistent();
  if (masks.frames() != mix_mag.rows() || masks.bins() != mix_mag.cols())
    throw InvalidArgument("apply_masks: dimension mismatch");
  StreamMagnitudes out;
  out.streams.reserve(masks.streams.size());
  for (const auto& m : masks.streams) out.streams.push_back(m * mix_mag);
  return out;
}

double loss_jm(const MaskSet& masks, const MaskSet& irm_masks) {
  check_same_shape(masks, irm_masks, "loss_jm");
  const double norm = static_cast<double>(masks.num_streams()) * masks.frames() * masks.bins();
  double acc = 0.0;
  for (int s = 0; s < masks.num_streams(); ++s)
    acc += (masks.streams[s] - irm_masks.streams[s]).square().sum();
  return acc / norm;
}

std::vector<Eigen::ArrayXXd> loss_jm_grad(const MaskSet& masks, const MaskSet& irm_masks) {
  check_same_shape(masks, irm_masks, "loss_jm_grad");
  const double norm = static_cast<double>(masks.num_streams()) * masks.frames() * masks.bins();
  std::vector<Eigen::ArrayXXd> out;
  out.reserve(masks.streams.size());
  for (int s = 0; s < masks.num_streams(); ++s)
    out.push_back(2.0 * (masks.streams[s] - irm_masks.streams[s]) / norm);
  return out;
}

double loss_jx(const StreamMagnitudes& est, const StreamMagnitudes& refs) {
  check_same_shape(est, refs, "loss_jx");
  const double norm = static_cast<double>(est.num_streams()) * est.frames() * est.bins();
  double acc = 0.0;
  for (int s = 0; s < est.num_streams(); ++s)
    acc += (est.streams[s] - refs.streams[s]).square().sum();
  return acc / norm;
}

std::vector<Eigen::ArrayXXd> loss_jx_grad(const StreamMagnitudes& est,
                                          const StreamMagnitudes& refs) {
  check_same_shape(est, refs, "loss_jx_grad");
  const double norm = static_cast<double>(est.num_streams()) * est.frames() * est.bins();
  std::vector<Eigen::ArrayXXd> out;
  out.reserve(est.streams.size());
  for (int s = 0; s < est.num_streams(); ++s)
    out.push_back(2.0 * (est.streams[s] - refs.streams[s]) / norm);
  return out;
}

}  // namespace pitsep::masking
