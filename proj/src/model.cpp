#include "pitsep/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

using json = nlohmann::json;

namespace pitsep::model {

void MetaFrameSpec::validate() const {
  if (output_frames < 1 || input_frames < output_frames)
    throw InvalidArgument("MetaFrameSpec: require N >= M >= 1");
  if (input_frames % 2 == 0 || output_frames % 2 == 0)
    throw InvalidArgument("MetaFrameSpec: window sizes must be odd for centering");
  if (shift < 1) throw InvalidArgument("MetaFrameSpec: shift must be >= 1");
}

int MetaFrameSpec::count(int total_frames) const {
  if (total_frames < 1) return 0;
  return (total_frames + shift - 1) / shift;
}

std::vector<MetaFrame> make_metaframes(const dsp::MagnitudeSpectrogram& mix_mag,
                                       const masking::StreamMagnitudes* refs_mag,
                                       const MetaFrameSpec& spec) {
  spec.validate();
  const int T = mix_mag.frames();
  const int F = mix_mag.bins();
  if (T < 1) throw InvalidArgument("make_metaframes: empty spectrogram");
  if (refs_mag != nullptr) {
    refs_mag->check_consistent();
    if (refs_mag->frames() != T || refs_mag->bins() != F)
      throw InvalidArgument("make_metaframes: reference dimensions mismatch");
  }

  const int N = spec.input_frames;
  const int M = spec.output_frames;
  const int half_in = N / 2;
  const int half_out = M / 2;
  const int S = refs_mag ? refs_mag->num_streams() : 0;

  std::vector<MetaFrame> out;
  out.reserve(spec.count(T));
  for (int c = 0; c < T; c += spec.shift) {
    MetaFrame mf;
    mf.center_frame = c;
    mf.features.setZero(N * F);
    for (int i = 0; i < N; ++i) {
      const int t = c - half_in + i;
      if (t < 0 || t >= T) continue;  // zero padding at the edges
      mf.features.segment(i * F, F) =
          mix_mag.values.row(t).transpose().matrix();
    }
    mf.mix_window = Eigen::ArrayXXd::Zero(M, F);
    for (int i = 0; i < M; ++i) {
      const int t = c - half_out + i;
      if (t < 0 || t >= T) continue;
      mf.mix_window.row(i) = mix_mag.values.row(t);
    }
    if (refs_mag) {
      mf.ref_windows.assign(S, Eigen::ArrayXXd::Zero(M, F));
      for (int s = 0; s < S; ++s) {
        for (int i = 0; i < M; ++i) {
          const int t = c - half_out + i;
          if (t < 0 || t >= T) continue;
          mf.ref_windows[s].row(i) = refs_mag->streams[s].row(t);
        }
      }
    }
    out.push_back(std::move(mf));
  }
  return out;
}

void ModelParams::validate() const {
  metaframe.validate();
  if (layers.empty()) throw InvalidArgument("ModelParams: no layers");
  if (layers.front().weight.cols() != input_dim())
    throw InvalidArgument("ModelParams: first layer does not match input dim");
  for (size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i + 1].weight.cols() != layers[i].weight.rows())
      throw InvalidArgument("ModelParams: layer dimensions do not chain");
  }
  if (layers.back().weight.rows() != output_dim())
    throw InvalidArgument("ModelParams: output head does not match S*M*F");
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw NumericError("ModelParams: non-finite parameters");
    if (l.bias.size() != l.weight.rows())
      throw InvalidArgument("ModelParams: bias size mismatch");
  }
}

ModelParams init_model(const std::vector<int>& hidden_dims, int streams, int bins,
                       const MetaFrameSpec& spec, uint64_t seed) {
  spec.validate();
  if (streams < 1 || bins < 1) throw InvalidArgument("init_model: bad dimensions");

  ModelParams p;
  p.metaframe = spec;
  p.streams = streams;
  p.bins = bins;
  p.seed = seed;

  std::vector<int> dims;
  dims.push_back(p.input_dim());
  for (int h : hidden_dims) {
    if (h < 1) throw InvalidArgument("init_model: bad hidden dim");
    dims.push_back(h);
  }
  dims.push_back(p.output_dim());

  std::mt19937_64 rng(seed);
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    const int fan_in = dims[i];
    const int fan_out = dims[i + 1];
    const double lim = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-lim, lim);
    DenseLayer layer;
    layer.weight.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    p.layers.push_back(std::move(layer));
  }
  p.validate();
  return p;
}

Eigen::MatrixXd forward(const ModelParams& params, const Eigen::MatrixXd& x,
                        ForwardCache* cache) {
  if (x.cols() != params.input_dim())
    throw InvalidArgument("forward: input dim mismatch");
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(x);
  }
  Eigen::MatrixXd a = x;
  const size_t L = params.layers.size();
  for (size_t i = 0; i < L; ++i) {
    const auto& layer = params.layers[i];
    Eigen::MatrixXd z = a * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (i + 1 < L) z = z.cwiseMax(0.0);  // ReLU on hidden layers
    if (cache) cache->acts.push_back(z);
    a = std::move(z);
  }
  return a;
}

void Gradients::scale(double a) {
  for (auto& l : layers) {
    l.weight *= a;
    l.bias *= a;
  }
}

void Gradients::accumulate(const Gradients& other) {
  if (other.layers.size() != layers.size())
    throw InvalidArgument("Gradients::accumulate: shape mismatch");
  for (size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
}

Gradients zero_gradients(const ModelParams& params) {
  Gradients g;
  for (const auto& l : params.layers) {
    DenseLayer z;
    z.weight = Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols());
    z.bias = Eigen::VectorXd::Zero(l.bias.size());
    g.layers.push_back(std::move(z));
  }
  return g;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& grad_out, Eigen::MatrixXd* grad_input) {
  const size_t L = params.layers.size();
  if (cache.acts.size() != L + 1)
    throw InvalidArgument("backward: cache does not match model");
  if (grad_out.rows() != cache.acts[0].rows() || grad_out.cols() != params.output_dim())
    throw InvalidArgument("backward: grad_out shape mismatch");

  Gradients g = zero_gradients(params);
  Eigen::MatrixXd delta = grad_out;
  for (size_t i = L; i-- > 0;) {
    if (i + 1 < L) {
      // gate through ReLU: cached activation is zero where pre-activation
      // was negative
      delta.array() *= (cache.acts[i + 1].array() > 0.0).cast<double>();
    }
    g.layers[i].weight = delta.transpose() * cache.acts[i];
    g.layers[i].bias = delta.colwise().sum().transpose();
    if (i > 0 || grad_input) delta = delta * params.layers[i].weight;
    if (i == 0 && grad_input) *grad_input = delta;
  }
  return g;
}

Eigen::VectorXd normalize_features(const ModelParams& params, const Eigen::VectorXd& raw) {
  const double sd = params.feat_std > 0.0 ? params.feat_std : 1.0;
  return ((raw.array() + 1.0).log() - params.feat_mean) / sd;
}

std::vector<Eigen::ArrayXXd> row_to_streams(const ModelParams& params,
                                            const Eigen::VectorXd& row) {
  const int M = params.metaframe.output_frames;
  const int F = params.bins;
  if (row.size() != params.output_dim())
    throw InvalidArgument("row_to_streams: size mismatch");
  std::vector<Eigen::ArrayXXd> out(params.streams);
  int off = 0;
  for (int s = 0; s < params.streams; ++s) {
    out[s].resize(M, F);
    for (int t = 0; t < M; ++t) {
      out[s].row(t) = row.segment(off, F).transpose().array();
      off += F;
    }
  }
  return out;
}

Eigen::VectorXd streams_to_row(const ModelParams& params,
                               const std::vector<Eigen::ArrayXXd>& streams) {
  const int M = params.metaframe.output_frames;
  const int F = params.bins;
  if (static_cast<int>(streams.size()) != params.streams)
    throw InvalidArgument("streams_to_row: stream count mismatch");
  Eigen::VectorXd row(params.output_dim());
  int off = 0;
  for (const auto& s : streams) {
    if (s.rows() != M || s.cols() != F) throw InvalidArgument("streams_to_row: shape mismatch");
    for (int t = 0; t < M; ++t) {
      row.segment(off, F) = s.row(t).transpose().matrix();
      off += F;
    }
  }
  return row;
}

namespace {

constexpr char kMagic[8] = {'P', 'I', 'T', 'S', 'E', 'P', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_doubles(std::ofstream& f, const double* data, size_t n) {
  f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::ifstream& f, double* data, size_t n, const std::string& path) {
  f.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!f) throw DataError("load_checkpoint: truncated parameter block: " + path);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  params.validate();
  json header;
  header["version"] = kVersion;
  header["streams"] = params.streams;
  header["bins"] = params.bins;
  header["metaframe"] = {{"input_frames", params.metaframe.input_frames},
                         {"output_frames", params.metaframe.output_frames},
                         {"shift", params.metaframe.shift}};
  header["feat_mean"] = params.feat_mean;
  header["feat_std"] = params.feat_std;
  header["stft"] = {{"frame_len", params.stft.frame_len},
                    {"hop", params.stft.hop},
                    {"fft_len", params.stft.fft_len}};
  header["sample_rate"] = params.sample_rate;
  header["seed"] = params.seed;
  json dims = json::array();
  for (const auto& l : params.layers)
    dims.push_back({{"out", l.weight.rows()}, {"in", l.weight.cols()}});
  header["layers"] = dims;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("save_checkpoint: cannot open " + path);
  f.write(kMagic, sizeof(kMagic));
  const std::string hs = header.dump();
  uint64_t hlen = hs.size();
  f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& l : params.layers) {
    write_doubles(f, l.weight.data(), static_cast<size_t>(l.weight.size()));
    write_doubles(f, l.bias.data(), static_cast<size_t>(l.bias.size()));
  }
  if (!f) throw DataError("save_checkpoint: write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("load_checkpoint: bad magic: " + path);
  uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!f || hlen > (1u << 20)) throw DataError("load_checkpoint: bad header length: " + path);
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw DataError("load_checkpoint: truncated header: " + path);

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::parse_error& e) {
    throw DataError("load_checkpoint: bad header json: " + std::string(e.what()));
  }
  if (header.at("version").get<uint32_t>() != kVersion)
    throw DataError("load_checkpoint: unsupported version");

  ModelParams p;
  p.streams = header.at("streams").get<int>();
  p.bins = header.at("bins").get<int>();
  p.metaframe.input_frames = header.at("metaframe").at("input_frames").get<int>();
  p.metaframe.output_frames = header.at("metaframe").at("output_frames").get<int>();
  p.metaframe.shift = header.at("metaframe").at("shift").get<int>();
  p.feat_mean = header.at("feat_mean").get<double>();
  p.feat_std = header.at("feat_std").get<double>();
  p.stft.frame_len = header.at("stft").at("frame_len").get<int>();
  p.stft.hop = header.at("stft").at("hop").get<int>();
  p.stft.fft_len = header.at("stft").at("fft_len").get<int>();
  p.sample_rate = header.at("sample_rate").get<int>();
  p.seed = header.at("seed").get<uint64_t>();

  for (const auto& d : header.at("layers")) {
    DenseLayer l;
    l.weight.resize(d.at("out").get<int>(), d.at("in").get<int>());
    l.bias.resize(d.at("out").get<int>());
    read_doubles(f, l.weight.data(), static_cast<size_t>(l.weight.size()), path);
    read_doubles(f, l.bias.data(), static_cast<size_t>(l.bias.size()), path);
    p.layers.push_back(std::move(l));
  }
  p.validate();
  return p;
}

}  // namespace pitsep::model
