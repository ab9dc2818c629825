#include "pitsep/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "pitsep/assignment.hpp"

namespace pitsep::training {

Criterion criterion_from_string(const std::string& s) {
  if (s == "pit") return Criterion::kPit;
  if (s == "conventional") return Criterion::kConventional;
  throw InvalidArgument("unknown criterion: " + s);
}

std::string to_string(Criterion c) {
  return c == Criterion::kPit ? "pit" : "conventional";
}

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size < 1) throw InvalidArgument("TrainConfig: bad epochs/batch");
  if (learning_rate <= 0.0) throw InvalidArgument("TrainConfig: learning rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw InvalidArgument("TrainConfig: decay in (0,1)");
  if (patience < 1) throw InvalidArgument("TrainConfig: patience must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("TrainConfig: momentum in [0,1)");
  metaframe.validate();
}

void write_curve_csv(const TrainingCurve& curve, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("write_curve_csv: cannot open " + path);
  f << "epoch,train_mse,valid_mse,lr,seconds\n";
  f.precision(12);
  for (const auto& r : curve.records)
    f << r.epoch << "," << r.train_mse << "," << r.valid_mse << "," << r.learning_rate << ","
      << r.seconds << "\n";
}

TrainingCurve read_curve_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("read_curve_csv: cannot open " + path);
  TrainingCurve curve;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    EpochRecord r;
    char comma;
    ss >> r.epoch >> comma >> r.train_mse >> comma >> r.valid_mse >> comma >> r.learning_rate >>
        comma >> r.seconds;
    if (ss.fail()) throw DataError("read_curve_csv: bad line in " + path);
    curve.records.push_back(r);
  }
  return curve;
}

Dataset extract_dataset(const corpus::DatasetManifest& manifest, const dsp::StftConfig& stft_cfg,
                        const model::MetaFrameSpec& spec, int max_items,
                        uint64_t subsample_seed) {
  std::vector<model::MetaFrame> items;
  for (const auto& rec : manifest.records) {
    corpus::MixtureSample sample = corpus::load_sample(rec);

    // fixed conventional order: ascending speaker id
    std::vector<int> order(sample.references.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return sample.speaker_ids[a] < sample.speaker_ids[b];
    });

    auto mix_mag = dsp::magnitude(dsp::stft(sample.mixture, stft_cfg));
    masking::StreamMagnitudes refs;
    for (int s : order) {
      auto spec_s = dsp::magnitude(dsp::stft(sample.references[s], stft_cfg));
      refs.streams.push_back(std::move(spec_s.values));
    }
    auto mfs = model::make_metaframes(mix_mag, &refs, spec);
    for (auto& mf : mfs) items.push_back(std::move(mf));
  }

  if (max_items > 0 && static_cast<int>(items.size()) > max_items) {
    std::mt19937_64 rng(subsample_seed);
    std::shuffle(items.begin(), items.end(), rng);
    items.resize(max_items);
  }

  Dataset out;
  if (items.empty()) return out;
  out.features.resize(static_cast<int>(items.size()), items[0].features.size());
  for (size_t i = 0; i < items.size(); ++i) {
    out.features.row(static_cast<int>(i)) = items[i].features.transpose();
    out.mix_windows.push_back(std::move(items[i].mix_window));
    out.ref_windows.push_back(std::move(items[i].ref_windows));
  }
  return out;
}

std::pair<double, double> feature_stats(const Dataset& data) {
  if (data.num() == 0) return {0.0, 1.0};
  Eigen::ArrayXXd logm = (data.features.array() + 1.0).log();
  double mean = logm.mean();
  double var = (logm - mean).square().mean();
  double sd = std::sqrt(std::max(var, 1e-12));
  return {mean, sd};
}

double batch_loss_grad(const model::ModelParams& params, const Dataset& data,
                       const std::vector<int>& indices, Criterion criterion,
                       model::Gradients* grads) {
  if (indices.empty()) return 0.0;
  const int B = static_cast<int>(indices.size());
  const double sd = params.feat_std > 0.0 ? params.feat_std : 1.0;

  Eigen::MatrixXd x(B, params.input_dim());
  for (int b = 0; b < B; ++b)
    x.row(b) = ((data.features.row(indices[b]).array() + 1.0).log() - params.feat_mean) / sd;

  model::ForwardCache cache;
  Eigen::MatrixXd logits = model::forward(params, x, grads ? &cache : nullptr);

  Eigen::MatrixXd grad_logits;
  if (grads) grad_logits.setZero(B, params.output_dim());

  double total_loss = 0.0;
  for (int b = 0; b < B; ++b) {
    const int item = indices[b];
    auto logit_streams = model::row_to_streams(params, logits.row(b).transpose());
    masking::MaskSet masks = masking::softmax_masks(logit_streams);
    masking::StreamMagnitudes est = masking::apply_masks(masks, data.mix_windows[item]);

    masking::StreamMagnitudes refs;
    refs.streams = data.ref_windows[item];

    assignment::Permutation perm(params.streams);
    double loss;
    if (criterion == Criterion::kPit) {
      std::tie(loss, perm) = assignment::pit_loss(est, refs);
    } else {
      std::iota(perm.begin(), perm.end(), 0);
      loss = masking::loss_jx(est, refs);
    }
    total_loss += loss;

    if (grads) {
      auto grad_est = assignment::pit_grad(est, refs, perm);
      std::vector<Eigen::ArrayXXd> grad_masks(params.streams);
      for (int s = 0; s < params.streams; ++s)
        grad_masks[s] = grad_est[s] * data.mix_windows[item];
      auto grad_logit_streams = masking::softmax_backward(masks, grad_masks);
      grad_logits.row(b) =
          model::streams_to_row(params, grad_logit_streams).transpose() / B;
    }
  }

  if (grads) {
    model::Gradients g = model::backward(params, cache, grad_logits);
    grads->accumulate(g);
  }
  return total_loss / B;
}

double evaluate(const model::ModelParams& params, const Dataset& data, Criterion criterion) {
  if (data.num() == 0) return 0.0;
  std::vector<int> all(data.num());
  std::iota(all.begin(), all.end(), 0);
  // chunked so the batch matrices stay small
  double acc = 0.0;
  const int chunk = 256;
  for (int start = 0; start < data.num(); start += chunk) {
    const int n = std::min(chunk, data.num() - start);
    std::vector<int> idx(all.begin() + start, all.begin() + start + n);
    acc += batch_loss_grad(params, data, idx, criterion, nullptr) * n;
  }
  return acc / data.num();
}

void sgd_update(model::ModelParams& params, const model::Gradients& grads, double lr,
                double momentum, model::Gradients* velocity) {
  if (grads.layers.size() != params.layers.size())
    throw InvalidArgument("sgd_update: gradient shape mismatch");
  for (size_t i = 0; i < params.layers.size(); ++i) {
    if (!grads.layers[i].weight.allFinite() || !grads.layers[i].bias.allFinite())
      throw NumericError("sgd_update: non-finite gradient");
    Eigen::MatrixXd dw = grads.layers[i].weight;
    Eigen::VectorXd db = grads.layers[i].bias;
    if (velocity && momentum > 0.0) {
      auto& v = velocity->layers[i];
      v.weight = momentum * v.weight + dw;
      v.bias = momentum * v.bias + db;
      dw = v.weight;
      db = v.bias;
    }
    params.layers[i].weight -= lr * dw;
    params.layers[i].bias -= lr * db;
    if (!params.layers[i].weight.allFinite() || !params.layers[i].bias.allFinite())
      throw NumericError("sgd_update: parameters diverged");
  }
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& valid_set,
                  model::ModelParams init, int first_epoch) {
  cfg.validate();
  init.validate();

  TrainResult result;
  result.best = init;
  result.final_params = std::move(init);

  double lr = cfg.learning_rate;
  double best_valid = std::numeric_limits<double>::infinity();
  int stall = 0;
  model::Gradients velocity = model::zero_gradients(result.final_params);

  std::vector<int> order(train_set.num());
  std::iota(order.begin(), order.end(), 0);

  for (int e = 0; e < cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(cfg.seed + 0x9e37ULL * static_cast<uint64_t>(first_epoch + e));
    std::shuffle(order.begin(), order.end(), rng);

    double train_acc = 0.0;
    int batches = 0;
    for (int start = 0; start < train_set.num(); start += cfg.batch_size) {
      const int n = std::min(cfg.batch_size, train_set.num() - start);
      std::vector<int> idx(order.begin() + start, order.begin() + start + n);
      model::Gradients grads = model::zero_gradients(result.final_params);
      double loss = batch_loss_grad(result.final_params, train_set, idx, cfg.criterion, &grads);
      if (!std::isfinite(loss)) throw NumericError("train: non-finite training loss");
      train_acc += loss;
      ++batches;
      sgd_update(result.final_params, grads, lr, cfg.momentum, &velocity);
    }

    const double valid_mse = evaluate(result.final_params, valid_set, cfg.criterion);
    if (!std::isfinite(valid_mse)) throw NumericError("train: non-finite validation loss");

    if (valid_mse < best_valid) {
      best_valid = valid_mse;
      result.best = result.final_params;
      stall = 0;
    } else if (++stall >= cfg.patience) {
      lr *= cfg.lr_decay;
      stall = 0;
    }

    const auto t1 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = first_epoch + e;
    rec.train_mse = batches > 0 ? train_acc / batches : 0.0;
    rec.valid_mse = valid_mse;
    rec.learning_rate = lr;
    rec.seconds = std::chrono::duration<double>(t1 - t0).count();
    result.curve.records.push_back(rec);
  }
  return result;
}

}  // namespace pitsep::training
