#include "pitsep/inference.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>

namespace pitsep::inference {

AssignmentMode mode_from_string(const std::string& s) {
  if (s == "default") return AssignmentMode::kDefault;
  if (s == "optimal") return AssignmentMode::kOptimal;
  if (s == "greedy") return AssignmentMode::kGreedy;
  throw InvalidArgument("unknown assignment mode: " + s);
}

std::string to_string(AssignmentMode m) {
  switch (m) {
    case AssignmentMode::kDefault: return "default";
    case AssignmentMode::kOptimal: return "optimal";
    default: return "greedy";
  }
}

namespace {

struct Accumulator {
  std::vector<Eigen::ArrayXXd> sums;  // S of T x F
  std::vector<int> coverage;          // per frame

  Accumulator(int streams, int total_frames, int bins)
      : sums(streams, Eigen::ArrayXXd::Zero(total_frames, bins)),
        coverage(total_frames, 0) {}

  // adds the permuted window: output stream s contributes to stitched
  // stream perm[s]... note orientation: stitched stream j receives the
  // output whose assignment maps to reference j.
  void add(const MetaFrameOutput& mf, const assignment::Permutation& perm) {
    const int M = static_cast<int>(mf.est[0].rows());
    const int T = static_cast<int>(coverage.size());
    const int half = M / 2;
    for (int i = 0; i < M; ++i) {
      const int t = mf.center_frame - half + i;
      if (t < 0 || t >= T) continue;
      for (size_t s = 0; s < mf.est.size(); ++s)
        sums[perm[s]].row(t) += mf.est[s].row(i);
      ++coverage[t];
    }
  }

  StitchedEstimate finish(std::vector<assignment::Permutation> trace) const {
    const int T = static_cast<int>(coverage.size());
    StitchedEstimate out;
    out.stream_mags = sums;
    for (auto& m : out.stream_mags)
      for (int t = 0; t < T; ++t)
        if (coverage[t] > 0) m.row(t) /= coverage[t];
    out.coverage = coverage;
    out.trace = std::move(trace);
    return out;
  }
};

void check_outputs(const std::vector<MetaFrameOutput>& outputs) {
  if (outputs.empty()) throw InvalidArgument("stitch: no meta-frame outputs");
  for (const auto& mf : outputs) {
    if (mf.est.empty()) throw InvalidArgument("stitch: meta-frame with no streams");
    for (const auto& e : mf.est)
      if (e.rows() != outputs[0].est[0].rows() || e.cols() != outputs[0].est[0].cols())
        throw InvalidArgument("stitch: inconsistent window shapes");
  }
}

}  // namespace

StitchedEstimate stitch_default(const std::vector<MetaFrameOutput>& outputs, int total_frames) {
  check_outputs(outputs);
  const int S = static_cast<int>(outputs[0].est.size());
  const int F = static_cast<int>(outputs[0].est[0].cols());
  assignment::Permutation identity(S);
  std::iota(identity.begin(), identity.end(), 0);

  Accumulator acc(S, total_frames, F);
  std::vector<assignment::Permutation> trace;
  for (const auto& mf : outputs) {
    acc.add(mf, identity);
    trace.push_back(identity);
  }
  return acc.finish(std::move(trace));
}

StitchedEstimate stitch_optimal(const std::vector<MetaFrameOutput>& outputs,
                                const std::vector<std::vector<Eigen::ArrayXXd>>& ref_windows,
                                int total_frames) {
  check_outputs(outputs);
  if (ref_windows.size() != outputs.size())
    throw InvalidArgument("stitch_optimal: reference windows missing");
  const int S = static_cast<int>(outputs[0].est.size());
  const int F = static_cast<int>(outputs[0].est[0].cols());

  Accumulator acc(S, total_frames, F);
  std::vector<assignment::Permutation> trace;
  for (size_t k = 0; k < outputs.size(); ++k) {
    masking::StreamMagnitudes est, refs;
    est.streams = outputs[k].est;
    refs.streams = ref_windows[k];
    auto [perm, cost] = assignment::best_perm(assignment::pairwise_cost(est, refs));
    acc.add(outputs[k], perm);
    trace.push_back(std::move(perm));
  }
  return acc.finish(std::move(trace));
}

StitchedEstimate stitch_greedy(const std::vector<MetaFrameOutput>& outputs, int shift,
                               int total_frames) {
  check_outputs(outputs);
  const int S = static_cast<int>(outputs[0].est.size());
  const int M = static_cast<int>(outputs[0].est[0].rows());
  const int F = static_cast<int>(outputs[0].est[0].cols());
  if (shift >= M) {
    std::cerr << "stitch_greedy: no overlap between meta-frames (shift >= M), "
                 "falling back to default assignment\n";
    return stitch_default(outputs, total_frames);
  }

  Accumulator acc(S, total_frames, F);
  std::vector<assignment::Permutation> trace;
  assignment::Permutation identity(S);
  std::iota(identity.begin(), identity.end(), 0);

  for (size_t k = 0; k < outputs.size(); ++k) {
    assignment::Permutation chosen = identity;
    if (k > 0) {
      const auto& mf = outputs[k];
      const int half = M / 2;
      // distance of each output stream to each already-stitched stream,
      // restricted to covered overlap frames
      Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(S, S);
      bool any_overlap = false;
      for (int i = 0; i < M; ++i) {
        const int t = mf.center_frame - half + i;
        if (t < 0 || t >= total_frames || acc.coverage[t] == 0) continue;
        any_overlap = true;
        for (int a = 0; a < S; ++a) {
          for (int b = 0; b < S; ++b) {
            Eigen::ArrayXd avg = acc.sums[b].row(t) / acc.coverage[t];
            cost(a, b) += (mf.est[a].row(i).transpose() - avg).square().sum();
          }
        }
      }
      if (any_overlap) chosen = assignment::best_perm(cost).first;
    }
    acc.add(outputs[k], chosen);
    trace.push_back(std::move(chosen));
  }
  return acc.finish(std::move(trace));
}

std::vector<MetaFrameOutput> run_model(const model::ModelParams& params,
                                       const dsp::MagnitudeSpectrogram& mix_mag) {
  params.validate();
  auto metaframes = model::make_metaframes(mix_mag, nullptr, params.metaframe);
  const int B = static_cast<int>(metaframes.size());
  const double sd = params.feat_std > 0.0 ? params.feat_std : 1.0;

  Eigen::MatrixXd x(B, params.input_dim());
  for (int b = 0; b < B; ++b)
    x.row(b) =
        (((metaframes[b].features.array() + 1.0).log() - params.feat_mean) / sd).transpose();

  Eigen::MatrixXd logits = model::forward(params, x);
  std::vector<MetaFrameOutput> out;
  out.reserve(B);
  for (int b = 0; b < B; ++b) {
    auto logit_streams = model::row_to_streams(params, logits.row(b).transpose());
    masking::MaskSet masks = masking::softmax_masks(logit_streams);
    masking::StreamMagnitudes est = masking::apply_masks(masks, metaframes[b].mix_window);
    MetaFrameOutput mf;
    mf.est = std::move(est.streams);
    mf.center_frame = metaframes[b].center_frame;
    out.push_back(std::move(mf));
  }
  return out;
}

SeparationResult separate(const model::ModelParams& params, const Waveform& mixture,
                          AssignmentMode mode, const std::vector<Waveform>* refs) {
  if (mode == AssignmentMode::kOptimal && (refs == nullptr || refs->empty()))
    throw InvalidArgument("separate: optimal mode requires reference sources");

  const dsp::ComplexSpectrogram mix_spec = dsp::stft(mixture, params.stft);
  const dsp::MagnitudeSpectrogram mix_mag = dsp::magnitude(mix_spec);
  const int T = mix_mag.frames();

  std::vector<MetaFrameOutput> outputs = run_model(params, mix_mag);

  StitchedEstimate stitched;
  if (mode == AssignmentMode::kOptimal) {
    if (static_cast<int>(refs->size()) != params.streams)
      throw InvalidArgument("separate: reference count does not match model streams");
    masking::StreamMagnitudes ref_mags;
    for (const auto& r : *refs) {
      if (r.size() != mixture.size())
        throw InvalidArgument("separate: reference length mismatch");
      ref_mags.streams.push_back(dsp::magnitude(dsp::stft(r, params.stft)).values);
    }
    auto ref_metaframes = model::make_metaframes(mix_mag, &ref_mags, params.metaframe);
    std::vector<std::vector<Eigen::ArrayXXd>> ref_windows;
    ref_windows.reserve(ref_metaframes.size());
    for (auto& mf : ref_metaframes) ref_windows.push_back(std::move(mf.ref_windows));
    stitched = stitch_optimal(outputs, ref_windows, T);
  } else if (mode == AssignmentMode::kGreedy) {
    stitched = stitch_greedy(outputs, params.metaframe.shift, T);
  } else {
    stitched = stitch_default(outputs, T);
  }

  SeparationResult result;
  for (int s = 0; s < params.streams; ++s) {
    dsp::MagnitudeSpectrogram mag;
    mag.values = stitched.stream_mags[s];
    dsp::ComplexSpectrogram spec = dsp::with_phase(mag, mix_spec);
    Waveform w = dsp::istft(spec, params.stft, mixture.sample_rate);
    w.samples.resize(mixture.samples.size(), 0.0);  // match the input length
    result.streams.push_back(std::move(w));
  }
  result.stitched = std::move(stitched);
  return result;
}

void write_trace_csv(const StitchedEstimate& stitched, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("write_trace_csv: cannot open " + path);
  f << "metaframe_index,perm\n";
  for (size_t k = 0; k < stitched.trace.size(); ++k) {
    f << k << ",";
    for (size_t s = 0; s < stitched.trace[k].size(); ++s) {
      if (s) f << "-";
      f << stitched.trace[k][s];
    }
    f << "\n";
  }
}

}  // namespace pitsep::inference
