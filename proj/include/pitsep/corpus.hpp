#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pitsep/dsp.hpp"

namespace pitsep::corpus {

// Synthetic stand-in for a speaker: a harmonic voice parameterized by its
// pitch range and pausing behavior.
struct SpeakerProfile {
  std::string speaker_id;
  double f0_min_hz = 100.0;
  double f0_max_hz = 150.0;
  int harmonic_count = 4;
  double pause_rate = 0.2;  // fraction of silent time, [0, 1)
  uint64_t seed = 0;

  void validate() const;
};

struct MixtureSample {
  Waveform mixture;
  std::vector<Waveform> references;  // stored post-SNR-scaling
  double snr_db = 0.0;
  std::vector<std::string> speaker_ids;
};

struct ManifestRecord {
  std::string id;
  std::string mixture_path;
  std::vector<std::string> reference_paths;
  double snr_db = 0.0;
  std::vector<std::string> speaker_ids;
};

struct DatasetManifest {
  std::string split;  // train / valid / test-cc / test-oc
  std::vector<ManifestRecord> records;
  uint64_t seed = 0;
};

struct CorpusConfig {
  int sample_rate = 8000;
  double duration_s = 1.5;
  int num_sources = 2;  // S
  int num_train_speakers = 20;
  int num_heldout_speakers = 10;
  int num_train = 200;
  int num_valid = 50;
  int num_test_cc = 50;
  int num_test_oc = 50;
  double snr_min_db = 0.0;
  double snr_max_db = 5.0;
  uint64_t seed = 1234;

  void validate() const;
};

// Deterministic harmonic source: drifting f0 within the profile's range,
// slow amplitude envelope, and silent segments covering about pause_rate
// of the duration.
Waveform synth_source(const SpeakerProfile& profile, double duration_s, int sample_rate,
                      uint64_t seed);

// Scales sources 2..S against source 1 so each pair sits at snr_db, then
// sums. The mixture is the exact sample-wise sum of the stored references.
MixtureSample mix(const std::vector<Waveform>& sources, double snr_db);

// Builds speaker pools (train pool and a disjoint held-out pool), renders
// audio under out_dir, and returns manifests for train / valid / test-cc /
// test-oc. test-oc draws only from the held-out pool.
std::vector<DatasetManifest> build_dataset(const CorpusConfig& cfg, const std::string& out_dir);

// JSON-lines manifest I/O: one record per line,
// {id, mixture_path, reference_paths[], snr_db, speaker_ids[]}.
void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Loads a record's audio from disk.
MixtureSample load_sample(const ManifestRecord& rec);

// Derives the speaker pools used by build_dataset (exposed for tests).
std::vector<SpeakerProfile> make_speaker_pool(int count, const std::string& id_prefix,
                                              uint64_t seed);

}  // namespace pitsep::corpus
