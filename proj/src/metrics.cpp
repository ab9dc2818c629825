#include "pitsep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace pitsep::metrics {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

struct ScoredStreams {
  std::vector<double> sdr_db;  // per est stream, against its paired ref
  double sdri_db = 0.0;
};

// Utterance-level pairing by best mean SDR over all permutations, so a
// global stream relabeling is never penalized.
ScoredStreams score(const std::vector<Waveform>& est, const std::vector<Waveform>& refs,
                    const Waveform& mixture) {
  if (est.size() != refs.size())
    throw InvalidArgument("sdr_improvement: stream count mismatch");
  const int S = static_cast<int>(est.size());

  std::vector<int> perm(S), best_perm(S);
  std::iota(perm.begin(), perm.end(), 0);
  best_perm = perm;
  double best_mean = -std::numeric_limits<double>::infinity();
  do {
    double mean = 0.0;
    for (int s = 0; s < S; ++s) mean += sdr(est[s], refs[perm[s]]);
    mean /= S;
    if (mean > best_mean) {
      best_mean = mean;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  ScoredStreams out;
  double sdri = 0.0;
  for (int s = 0; s < S; ++s) {
    double est_sdr = sdr(est[s], refs[best_perm[s]]);
    out.sdr_db.push_back(est_sdr);
    sdri += est_sdr - sdr(mixture, refs[best_perm[s]]);
  }
  out.sdri_db = sdri / S;
  return out;
}

}  // namespace

double sdr(const Waveform& est, const Waveform& ref) {
  if (est.samples.size() != ref.samples.size())
    throw InvalidArgument("sdr: length mismatch");
  const double ref_energy = dot(ref.samples, ref.samples);
  if (ref_energy <= 0.0) throw InvalidArgument("sdr: silent reference");

  const double alpha = dot(est.samples, ref.samples) / ref_energy;
  double target_energy = alpha * alpha * ref_energy;
  double dist_energy = 0.0;
  for (size_t i = 0; i < est.samples.size(); ++i) {
    double d = est.samples[i] - alpha * ref.samples[i];
    dist_energy += d * d;
  }
  if (dist_energy <= 0.0) return kSdrCapDb;
  if (target_energy <= 0.0) return -kSdrCapDb;
  double db = 10.0 * std::log10(target_energy / dist_energy);
  return std::clamp(db, -kSdrCapDb, kSdrCapDb);
}

double sdr_improvement(const std::vector<Waveform>& est_streams,
                       const std::vector<Waveform>& ref_streams, const Waveform& mixture) {
  return score(est_streams, ref_streams, mixture).sdri_db;
}

std::vector<Waveform> irm_separate(const corpus::MixtureSample& sample,
                                   const dsp::StftConfig& stft_cfg) {
  const dsp::ComplexSpectrogram mix_spec = dsp::stft(sample.mixture, stft_cfg);
  const dsp::MagnitudeSpectrogram mix_mag = dsp::magnitude(mix_spec);

  masking::StreamMagnitudes refs;
  for (const auto& r : sample.references)
    refs.streams.push_back(dsp::magnitude(dsp::stft(r, stft_cfg)).values);

  masking::MaskSet masks = masking::irm(refs, mix_mag);
  masking::StreamMagnitudes est = masking::apply_masks(masks, mix_mag.values);

  std::vector<Waveform> out;
  for (const auto& mag_s : est.streams) {
    dsp::MagnitudeSpectrogram mag;
    mag.values = mag_s;
    Waveform w = dsp::istft(dsp::with_phase(mag, mix_spec), stft_cfg, sample.mixture.sample_rate);
    w.samples.resize(sample.mixture.samples.size(), 0.0);
    out.push_back(std::move(w));
  }
  return out;
}

namespace {

// Stitched-magnitude MSE against the references, best pairing.
double stitched_mse(const std::vector<Eigen::ArrayXXd>& stitched,
                    const masking::StreamMagnitudes& ref_mags) {
  masking::StreamMagnitudes est;
  est.streams = stitched;
  return assignment::pit_loss(est, ref_mags).first;
}

EvalRecord make_record(const corpus::ManifestRecord& rec, const std::string& split,
                       const std::string& mode, int in_window, int out_window,
                       const std::vector<Waveform>& est, const corpus::MixtureSample& sample,
                       double mse) {
  EvalRecord out;
  out.id = rec.id;
  out.split = split;
  out.mode = mode;
  out.in_window = in_window;
  out.out_window = out_window;
  ScoredStreams scored = score(est, sample.references, sample.mixture);
  out.stream_sdr_db = scored.sdr_db;
  out.sdri_db = scored.sdri_db;
  out.mse = mse;
  return out;
}

}  // namespace

EvalReport eval_report(const std::vector<model::ModelParams>& checkpoints,
                       const corpus::DatasetManifest& manifest,
                       const std::vector<inference::AssignmentMode>& modes, bool with_irm) {
  EvalReport report;
  const dsp::StftConfig irm_stft =
      checkpoints.empty() ? dsp::StftConfig::desk_default() : checkpoints[0].stft;

  for (const auto& rec : manifest.records) {
    corpus::MixtureSample sample;
    try {
      sample = corpus::load_sample(rec);
    } catch (const DataError& e) {
      throw DataError("eval_report: sample " + rec.id + ": " + e.what());
    }

    for (const auto& ckpt : checkpoints) {
      masking::StreamMagnitudes ref_mags;
      for (const auto& r : sample.references)
        ref_mags.streams.push_back(dsp::magnitude(dsp::stft(r, ckpt.stft)).values);

      for (auto mode : modes) {
        inference::SeparationResult sep = inference::separate(
            ckpt, sample.mixture, mode,
            mode == inference::AssignmentMode::kOptimal ? &sample.references : nullptr);
        double mse = stitched_mse(sep.stitched.stream_mags, ref_mags);
        report.records.push_back(make_record(rec, manifest.split, inference::to_string(mode),
                                             ckpt.metaframe.input_frames,
                                             ckpt.metaframe.output_frames, sep.streams, sample,
                                             mse));
      }
    }

    if (with_irm) {
      std::vector<Waveform> est = irm_separate(sample, irm_stft);
      masking::StreamMagnitudes ref_mags;
      for (const auto& r : sample.references)
        ref_mags.streams.push_back(dsp::magnitude(dsp::stft(r, irm_stft)).values);
      masking::StreamMagnitudes est_mags;
      for (const auto& e : est)
        est_mags.streams.push_back(dsp::magnitude(dsp::stft(e, irm_stft)).values);
      double mse = assignment::pit_loss(est_mags, ref_mags).first;
      report.records.push_back(
          make_record(rec, manifest.split, "irm", 0, 0, est, sample, mse));
    }
  }

  // aggregate means per (split, mode, window config)
  for (const auto& r : report.records) {
    auto it = std::find_if(report.aggregates.begin(), report.aggregates.end(), [&](const auto& a) {
      return a.split == r.split && a.mode == r.mode && a.in_window == r.in_window &&
             a.out_window == r.out_window;
    });
    if (it == report.aggregates.end()) {
      report.aggregates.push_back({r.split, r.mode, r.in_window, r.out_window, 0, 0.0, 0.0});
      it = std::prev(report.aggregates.end());
    }
    it->count += 1;
    it->mean_sdri_db += r.sdri_db;
    it->mean_mse += r.mse;
  }
  for (auto& a : report.aggregates) {
    a.mean_sdri_db /= a.count;
    a.mean_mse /= a.count;
  }
  return report;
}

void write_records_csv(const EvalReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("write_records_csv: cannot open " + path);
  size_t max_streams = 0;
  for (const auto& r : report.records) max_streams = std::max(max_streams, r.stream_sdr_db.size());
  f << "id,split,mode,in_window,out_window";
  for (size_t s = 0; s < std::max<size_t>(max_streams, 2); ++s) f << ",sdr_s" << s + 1;
  f << ",sdri,mse\n";
  f.precision(10);
  for (const auto& r : report.records) {
    f << r.id << "," << r.split << "," << r.mode << "," << r.in_window << "," << r.out_window;
    for (size_t s = 0; s < std::max<size_t>(max_streams, 2); ++s)
      f << "," << (s < r.stream_sdr_db.size() ? r.stream_sdr_db[s] : 0.0);
    f << "," << r.sdri_db << "," << r.mse << "\n";
  }
}

void write_aggregates_csv(const EvalReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("write_aggregates_csv: cannot open " + path);
  f << "split,mode,in_window,out_window,count,mean_sdri,mean_mse\n";
  f.precision(10);
  for (const auto& a : report.aggregates)
    f << a.split << "," << a.mode << "," << a.in_window << "," << a.out_window << "," << a.count
      << "," << a.mean_sdri_db << "," << a.mean_mse << "\n";
}

}  // namespace pitsep::metrics
