#include "pitsep/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "pitsep/wav.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace pitsep::corpus {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t combine_seed(uint64_t a, uint64_t b, uint64_t c = 0, uint64_t d = 0) {
  return splitmix64(splitmix64(splitmix64(splitmix64(a) ^ b) ^ c) ^ d);
}

double mean_power(const Waveform& w) {
  double acc = 0.0;
  for (double x : w.samples) acc += x * x;
  return w.samples.empty() ? 0.0 : acc / w.samples.size();
}

}  // namespace

void SpeakerProfile::validate() const {
  if (!(f0_min_hz > 50.0 && f0_max_hz < 500.0 && f0_min_hz <= f0_max_hz))
    throw InvalidArgument("SpeakerProfile: f0 range must lie within (50, 500) Hz");
  if (!(pause_rate >= 0.0 && pause_rate < 1.0))
    throw InvalidArgument("SpeakerProfile: pause_rate must be in [0, 1)");
  if (harmonic_count < 1) throw InvalidArgument("SpeakerProfile: harmonic_count must be >= 1");
}

void CorpusConfig::validate() const {
  if (sample_rate <= 0 || duration_s <= 0.0) throw InvalidArgument("CorpusConfig: bad geometry");
  if (num_sources < 2) throw InvalidArgument("CorpusConfig: need at least two sources");
  if (num_train_speakers < num_sources || num_heldout_speakers < num_sources)
    throw InvalidArgument("CorpusConfig: speaker pools too small for disjoint mixing");
  if (snr_min_db > snr_max_db) throw InvalidArgument("CorpusConfig: bad SNR range");
}

Waveform synth_source(const SpeakerProfile& profile, double duration_s, int sample_rate,
                      uint64_t seed) {
  profile.validate();
  if (duration_s <= 0.0) throw InvalidArgument("synth_source: duration must be positive");

  std::mt19937_64 rng(combine_seed(profile.seed, seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int n = static_cast<int>(std::lround(duration_s * sample_rate));
  const int seg_len = std::max(1, sample_rate / 10);  // 100 ms segments
  const int fade_len = std::max(1, sample_rate / 200);  // 5 ms fades
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(n, 0.0);

  double f0 = profile.f0_min_hz + unit(rng) * (profile.f0_max_hz - profile.f0_min_hz);
  std::vector<double> phase(profile.harmonic_count, 0.0);
  double amp_sum = 0.0;
  for (int h = 1; h <= profile.harmonic_count; ++h) amp_sum += 1.0 / h;
  const double gain = 0.3 / amp_sum;
  const double env_rate_hz = 4.0 + 3.0 * unit(rng);

  bool any_voiced = false;
  for (int start = 0; start < n; start += seg_len) {
    const int end = std::min(n, start + seg_len);
    bool silent = unit(rng) < profile.pause_rate;
    // never emit an entirely silent source
    if (silent && !any_voiced && start + seg_len >= n) silent = false;
    if (!silent) any_voiced = true;

    // f0 drifts per segment, clipped to the profile range.
    f0 *= 1.0 + 0.06 * (unit(rng) - 0.5);
    f0 = std::clamp(f0, profile.f0_min_hz, profile.f0_max_hz);
    const double seg_amp = 0.7 + 0.3 * unit(rng);

    if (silent) continue;
    for (int i = start; i < end; ++i) {
      double sample = 0.0;
      for (int h = 0; h < profile.harmonic_count; ++h) {
        phase[h] += 2.0 * std::numbers::pi * (h + 1) * f0 / sample_rate;
        sample += std::sin(phase[h]) / (h + 1);
      }
      double env = 0.85 + 0.15 * std::sin(2.0 * std::numbers::pi * env_rate_hz * i / sample_rate);
      // short ramps at segment boundaries to avoid clicks
      double ramp = 1.0;
      if (i - start < fade_len) ramp = static_cast<double>(i - start) / fade_len;
      if (end - 1 - i < fade_len) ramp = std::min(ramp, static_cast<double>(end - 1 - i) / fade_len);
      out.samples[i] = gain * seg_amp * env * ramp * sample;
    }
  }
  return out;
}

MixtureSample mix(const std::vector<Waveform>& sources, double snr_db) {
  if (sources.size() < 2) throw InvalidArgument("mix: need at least two sources");
  const int rate = sources[0].sample_rate;
  size_t max_len = 0;
  for (const auto& s : sources) {
    if (s.sample_rate != rate) throw InvalidArgument("mix: sample rates differ");
    max_len = std::max(max_len, s.samples.size());
  }

  MixtureSample out;
  out.snr_db = snr_db;
  out.references.reserve(sources.size());
  for (size_t i = 0; i < sources.size(); ++i) {
    Waveform ref = sources[i];
    ref.samples.resize(max_len, 0.0);  // zero-pad, never truncate
    double p = mean_power(ref);
    if (p <= 0.0) throw DataError("mix: source " + std::to_string(i + 1) + " is silent");
    if (i > 0) {
      // scale so power(source1)/power(source_i) = 10^(snr/10)
      double p1 = mean_power(out.references[0]);
      double scale = std::sqrt(p1 / (p * std::pow(10.0, snr_db / 10.0)));
      for (double& x : ref.samples) x *= scale;
    }
    out.references.push_back(std::move(ref));
  }

  out.mixture.sample_rate = rate;
  out.mixture.samples.assign(max_len, 0.0);
  for (const auto& ref : out.references)
    for (size_t i = 0; i < max_len; ++i) out.mixture.samples[i] += ref.samples[i];
  return out;
}

std::vector<SpeakerProfile> make_speaker_pool(int count, const std::string& id_prefix,
                                              uint64_t seed) {
  std::mt19937_64 rng(combine_seed(seed, 0x5eed0001ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SpeakerProfile> pool;
  pool.reserve(count);
  for (int i = 0; i < count; ++i) {
    SpeakerProfile p;
    p.speaker_id = id_prefix + (i < 10 ? "0" : "") + std::to_string(i);
    // Base pitch drawn from one of two bands chosen at random, so pairs
    // vary in difficulty; the band is independent of the id, so id order
    // carries no acoustic information.
    double base = unit(rng) < 0.5 ? 90.0 + unit(rng) * 50.0 : 190.0 + unit(rng) * 90.0;
    p.f0_min_hz = base * 0.9;
    p.f0_max_hz = base * 1.1;
    p.harmonic_count = 3 + static_cast<int>(unit(rng) * 4.0);
    p.pause_rate = 0.15 + 0.15 * unit(rng);
    p.seed = combine_seed(seed, 17, i);
    pool.push_back(std::move(p));
  }
  return pool;
}

namespace {

DatasetManifest build_split(const std::string& split, int count,
                            const std::vector<SpeakerProfile>& pool, const CorpusConfig& cfg,
                            const std::string& out_dir, uint64_t split_tag) {
  DatasetManifest man;
  man.split = split;
  man.seed = cfg.seed;
  fs::create_directories(fs::path(out_dir) / split);

  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(combine_seed(cfg.seed, split_tag, i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // distinct speakers per mixture
    std::vector<int> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cfg.num_sources);

    double snr = cfg.snr_min_db + unit(rng) * (cfg.snr_max_db - cfg.snr_min_db);
    std::vector<Waveform> sources;
    std::vector<std::string> ids;
    for (int s = 0; s < cfg.num_sources; ++s) {
      sources.push_back(synth_source(pool[idx[s]], cfg.duration_s, cfg.sample_rate,
                                     combine_seed(cfg.seed, split_tag, i, s + 1)));
      ids.push_back(pool[idx[s]].speaker_id);
    }
    MixtureSample sample = mix(sources, snr);
    sample.speaker_ids = ids;

    ManifestRecord rec;
    rec.id = split + "_" + std::to_string(i);
    rec.snr_db = snr;
    rec.speaker_ids = ids;
    fs::path base = fs::path(out_dir) / split / rec.id;
    rec.mixture_path = (base.string() + ".mix.wav");
    wav::write_wav(rec.mixture_path, sample.mixture);
    for (int s = 0; s < cfg.num_sources; ++s) {
      std::string p = base.string() + ".s" + std::to_string(s + 1) + ".wav";
      wav::write_wav(p, sample.references[s]);
      rec.reference_paths.push_back(p);
    }
    man.records.push_back(std::move(rec));
  }
  return man;
}

}  // namespace

std::vector<DatasetManifest> build_dataset(const CorpusConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  auto train_pool = make_speaker_pool(cfg.num_train_speakers, "spk", cfg.seed);
  auto heldout_pool = make_speaker_pool(cfg.num_heldout_speakers, "oc_spk", cfg.seed + 1);

  std::vector<DatasetManifest> out;
  out.push_back(build_split("train", cfg.num_train, train_pool, cfg, out_dir, 1));
  out.push_back(build_split("valid", cfg.num_valid, train_pool, cfg, out_dir, 2));
  out.push_back(build_split("test-cc", cfg.num_test_cc, train_pool, cfg, out_dir, 3));
  out.push_back(build_split("test-oc", cfg.num_test_oc, heldout_pool, cfg, out_dir, 4));
  for (const auto& man : out)
    write_manifest(man, (fs::path(out_dir) / (man.split + ".jsonl")).string());
  return out;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("write_manifest: cannot open " + path);
  for (const auto& rec : manifest.records) {
    json j{{"id", rec.id},
           {"mixture_path", rec.mixture_path},
           {"reference_paths", rec.reference_paths},
           {"snr_db", rec.snr_db},
           {"speaker_ids", rec.speaker_ids}};
    f << j.dump() << "\n";
  }
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("read_manifest: cannot open " + path);
  DatasetManifest man;
  man.split = fs::path(path).stem().string();
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("read_manifest: " + path + " line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    ManifestRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.mixture_path = j.at("mixture_path").get<std::string>();
    rec.reference_paths = j.at("reference_paths").get<std::vector<std::string>>();
    rec.snr_db = j.at("snr_db").get<double>();
    rec.speaker_ids = j.at("speaker_ids").get<std::vector<std::string>>();
    man.records.push_back(std::move(rec));
  }
  return man;
}

MixtureSample load_sample(const ManifestRecord& rec) {
  MixtureSample out;
  out.mixture = wav::read_wav(rec.mixture_path);
  for (const auto& p : rec.reference_paths) out.references.push_back(wav::read_wav(p));
  out.snr_db = rec.snr_db;
  out.speaker_ids = rec.speaker_ids;
  return out;
}

}  // namespace pitsep::corpus
