#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pitsep/corpus.hpp"
#include "pitsep/model.hpp"

namespace pitsep::training {

// kPit searches assignments per meta-frame; kConventional fixes the
// output order to references sorted by ascending speaker id.
enum class Criterion { kPit, kConventional };

Criterion criterion_from_string(const std::string& s);
std::string to_string(Criterion c);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;       // meta-frames per update
  double learning_rate = 0.1;
  double momentum = 0.0;
  double lr_decay = 0.5;     // applied when validation stalls
  int patience = 3;          // epochs without improvement before decay
  uint64_t seed = 1234;
  Criterion criterion = Criterion::kPit;
  model::MetaFrameSpec metaframe;
  std::vector<int> hidden_dims = {128, 128, 128};

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double valid_mse = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainingCurve {
  std::vector<EpochRecord> records;
};

// CSV schema: epoch,train_mse,valid_mse,lr,seconds
void write_curve_csv(const TrainingCurve& curve, const std::string& path);
TrainingCurve read_curve_csv(const std::string& path);

// Meta-frames pre-extracted across an entire split. Features are raw
// stacked magnitudes; normalization happens against the model's stats.
struct Dataset {
  Eigen::MatrixXd features;  // num x N*F
  std::vector<Eigen::ArrayXXd> mix_windows;
  std::vector<std::vector<Eigen::ArrayXXd>> ref_windows;

  int num() const { return static_cast<int>(features.rows()); }
};

// Loads every sample in the manifest and slices it into meta-frames.
// References are reordered by ascending speaker id so stream index is the
// conventional baseline's fixed assignment. If max_items > 0 the result
// is a seed-deterministic subsample.
Dataset extract_dataset(const corpus::DatasetManifest& manifest, const dsp::StftConfig& stft_cfg,
                        const model::MetaFrameSpec& spec, int max_items = 0,
                        uint64_t subsample_seed = 0);

// Global mean/std of log(1 + magnitude) over all feature entries.
std::pair<double, double> feature_stats(const Dataset& data);

// Mean criterion loss over the indexed items; when grads is non-null the
// gradient of that mean is accumulated into it.
double batch_loss_grad(const model::ModelParams& params, const Dataset& data,
                       const std::vector<int>& indices, Criterion criterion,
                       model::Gradients* grads);

double evaluate(const model::ModelParams& params, const Dataset& data, Criterion criterion);

// theta <- theta - lr * (grad + momentum-smoothed history). velocity may
// be null for plain SGD.
void sgd_update(model::ModelParams& params, const model::Gradients& grads, double lr,
                double momentum = 0.0, model::Gradients* velocity = nullptr);

struct TrainResult {
  model::ModelParams best;   // lowest validation MSE
  model::ModelParams final_params;
  TrainingCurve curve;
};

// Deterministic given cfg.seed. first_epoch offsets curve numbering when
// resuming from a checkpoint.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& valid_set,
                  model::ModelParams init, int first_epoch = 1);

}  // namespace pitsep::training
