#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "pitsep/config.hpp"
#include "pitsep/inference.hpp"
#include "pitsep/metrics.hpp"
#include "pitsep/model.hpp"
#include "pitsep/training.hpp"
#include "pitsep/wav.hpp"

namespace fs = std::filesystem;
using namespace pitsep;

namespace {

int g_log_level = 1;  // 0 = quiet, 1 = info

void info(const std::string& msg) {
  if (g_log_level > 0) std::cout << msg << "\n";
}

config::RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return config::default_config();
  return config::load(path);
}

int cmd_mix(const std::string& config_path, const std::string& out_dir, int64_t seed_override,
            int num_train_override) {
  config::RunConfig cfg = load_config_or_default(config_path);
  if (seed_override >= 0) {
    cfg.seed = static_cast<uint64_t>(seed_override);
    cfg.corpus.seed = cfg.seed;
    cfg.training.seed = cfg.seed;
  }
  if (num_train_override > 0) cfg.corpus.num_train = num_train_override;
  cfg.validate();

  fs::create_directories(out_dir);
  auto manifests = corpus::build_dataset(cfg.corpus, out_dir);
  config::save(cfg, (fs::path(out_dir) / "run_config.json").string());
  for (const auto& man : manifests)
    info(man.split + ": " + std::to_string(man.records.size()) + " mixtures");
  return 0;
}

model::ModelParams fresh_model(const config::RunConfig& cfg, const training::Dataset& train_set) {
  model::ModelParams params =
      model::init_model(cfg.training.hidden_dims, cfg.corpus.num_sources, cfg.stft.bins(),
                        cfg.training.metaframe, cfg.seed);
  auto [mean, sd] = training::feature_stats(train_set);
  params.feat_mean = mean;
  params.feat_std = sd;
  params.stft = cfg.stft;
  params.sample_rate = cfg.sample_rate;
  return params;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_checkpoint, const std::string& curve_path,
              const std::string& criterion, int epochs_override, int64_t seed_override,
              const std::string& resume_from, int max_train_items, int max_valid_items) {
  config::RunConfig cfg = load_config_or_default(config_path);
  if (!criterion.empty()) cfg.training.criterion = training::criterion_from_string(criterion);
  if (epochs_override >= 0) cfg.training.epochs = epochs_override;
  if (seed_override >= 0) {
    cfg.seed = static_cast<uint64_t>(seed_override);
    cfg.training.seed = cfg.seed;
  }
  cfg.training.validate();

  auto train_man = corpus::read_manifest((fs::path(data_dir) / "train.jsonl").string());
  auto valid_man = corpus::read_manifest((fs::path(data_dir) / "valid.jsonl").string());
  info("extracting meta-frames...");
  training::Dataset train_set = training::extract_dataset(
      train_man, cfg.stft, cfg.training.metaframe, max_train_items, cfg.seed);
  training::Dataset valid_set = training::extract_dataset(
      valid_man, cfg.stft, cfg.training.metaframe, max_valid_items, cfg.seed + 1);
  info("train meta-frames: " + std::to_string(train_set.num()) +
       ", valid: " + std::to_string(valid_set.num()));

  model::ModelParams init;
  int first_epoch = 1;
  training::TrainingCurve prior_curve;
  if (!resume_from.empty()) {
    init = model::load_checkpoint(resume_from);
    if (!curve_path.empty() && fs::exists(curve_path)) {
      prior_curve = training::read_curve_csv(curve_path);
      if (!prior_curve.records.empty()) first_epoch = prior_curve.records.back().epoch + 1;
    }
  } else {
    init = fresh_model(cfg, train_set);
  }

  training::TrainResult result =
      training::train(cfg.training, train_set, valid_set, std::move(init), first_epoch);

  model::save_checkpoint(cfg.training.epochs > 0 ? result.best : result.final_params,
                         out_checkpoint);
  if (!curve_path.empty()) {
    for (const auto& r : result.curve.records) prior_curve.records.push_back(r);
    training::write_curve_csv(prior_curve, curve_path);
  }
  for (const auto& r : result.curve.records)
    info("epoch " + std::to_string(r.epoch) + " train_mse=" + std::to_string(r.train_mse) +
         " valid_mse=" + std::to_string(r.valid_mse) + " lr=" + std::to_string(r.learning_rate));
  info("checkpoint written to " + out_checkpoint);
  return 0;
}

int cmd_separate(const std::string& checkpoint, const std::string& wav_in,
                 const std::string& manifest_path, const std::string& mode_str,
                 const std::vector<std::string>& ref_paths, const std::string& out_dir,
                 bool dump_trace) {
  model::ModelParams params = model::load_checkpoint(checkpoint);
  inference::AssignmentMode mode = inference::mode_from_string(mode_str);
  fs::create_directories(out_dir);

  auto emit = [&](const std::string& id, const Waveform& mixture,
                  const std::vector<Waveform>* refs) {
    inference::SeparationResult sep = inference::separate(params, mixture, mode, refs);
    for (size_t s = 0; s < sep.streams.size(); ++s) {
      std::string p =
          (fs::path(out_dir) / (id + ".s" + std::to_string(s + 1) + ".wav")).string();
      wav::write_wav(p, sep.streams[s]);
    }
    if (dump_trace)
      inference::write_trace_csv(sep.stitched,
                                 (fs::path(out_dir) / (id + ".trace.csv")).string());
  };

  if (!wav_in.empty()) {
    Waveform mixture = wav::read_wav(wav_in);
    std::vector<Waveform> refs;
    for (const auto& p : ref_paths) refs.push_back(wav::read_wav(p));
    if (mode == inference::AssignmentMode::kOptimal && refs.empty())
      throw InvalidArgument("separate: optimal mode requires --ref sources");
    emit(fs::path(wav_in).stem().string(), mixture, refs.empty() ? nullptr : &refs);
    info("separated " + wav_in + " into " + std::to_string(params.streams) + " streams");
  } else if (!manifest_path.empty()) {
    auto man = corpus::read_manifest(manifest_path);
    for (const auto& rec : man.records) {
      corpus::MixtureSample sample = corpus::load_sample(rec);
      emit(rec.id, sample.mixture, &sample.references);
    }
    info("separated " + std::to_string(man.records.size()) + " mixtures");
  } else {
    throw InvalidArgument("separate: need --wav or --manifest");
  }
  return 0;
}

int cmd_eval(const std::vector<std::string>& checkpoints, const std::string& manifest_path,
             const std::vector<std::string>& mode_strs, bool with_irm,
             const std::string& out_prefix) {
  std::vector<model::ModelParams> params;
  for (const auto& p : checkpoints) params.push_back(model::load_checkpoint(p));
  std::vector<inference::AssignmentMode> modes;
  for (const auto& m : mode_strs) modes.push_back(inference::mode_from_string(m));

  auto manifest = corpus::read_manifest(manifest_path);
  metrics::EvalReport report = metrics::eval_report(params, manifest, modes, with_irm);
  metrics::write_records_csv(report, out_prefix + ".records.csv");
  metrics::write_aggregates_csv(report, out_prefix + ".aggregates.csv");

  for (const auto& a : report.aggregates)
    info(a.split + " " + a.mode + " " + std::to_string(a.in_window) + "\\" +
         std::to_string(a.out_window) + " n=" + std::to_string(a.count) +
         " mean_sdri=" + std::to_string(a.mean_sdri_db) +
         " mean_mse=" + std::to_string(a.mean_mse));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* lvl = std::getenv("PITSEP_LOG_LEVEL")) g_log_level = std::atoi(lvl);

  CLI::App app{"pitsep: multi-talker speech separation toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "data", data_dir = "data";
  std::string checkpoint = "model.ckpt", curve_path, criterion, resume_from;
  std::string wav_in, manifest_path, mode = "default", out_prefix = "eval";
  std::vector<std::string> refs, checkpoints, modes = {"default"};
  int64_t seed = -1;
  int epochs = -1, num_train = -1, max_train_items = 0, max_valid_items = 0;
  bool with_irm = false, dump_trace = false;

  auto* mix = app.add_subcommand("mix", "generate the synthetic mixture dataset");
  mix->add_option("--config", config_path, "run config json");
  mix->add_option("--out", out_dir, "output directory");
  mix->add_option("--seed", seed, "seed override");
  mix->add_option("--num-train", num_train, "train mixture count override");

  auto* train = app.add_subcommand("train", "train a separation model");
  train->add_option("--config", config_path, "run config json");
  train->add_option("--data", data_dir, "dataset directory (train.jsonl, valid.jsonl)");
  train->add_option("--checkpoint", checkpoint, "output checkpoint path");
  train->add_option("--curve", curve_path, "training curve csv path");
  train->add_option("--criterion", criterion, "pit or conventional");
  train->add_option("--epochs", epochs, "epoch count override");
  train->add_option("--seed", seed, "seed override");
  train->add_option("--resume", resume_from, "checkpoint to resume from");
  train->add_option("--max-train-metaframes", max_train_items, "subsample training meta-frames");
  train->add_option("--max-valid-metaframes", max_valid_items, "subsample validation meta-frames");

  auto* sep = app.add_subcommand("separate", "separate mixtures into streams");
  sep->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  sep->add_option("--wav", wav_in, "single mixture wav");
  sep->add_option("--manifest", manifest_path, "dataset manifest (jsonl)");
  sep->add_option("--mode", mode, "default, optimal, or greedy");
  sep->add_option("--ref", refs, "reference wavs (for optimal mode with --wav)");
  sep->add_option("--out", out_dir, "output directory");
  sep->add_flag("--trace", dump_trace, "dump per-meta-frame permutation trace csv");

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a manifest");
  eval->add_option("--checkpoint", checkpoints, "model checkpoint(s), one per window config");
  eval->add_option("--manifest", manifest_path, "dataset manifest (jsonl)")->required();
  eval->add_option("--mode", modes, "assignment modes to score");
  eval->add_flag("--with-irm", with_irm, "include the ideal-ratio-mask oracle row");
  eval->add_option("--out", out_prefix, "output csv prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(mix)) return cmd_mix(config_path, out_dir, seed, num_train);
    if (app.got_subcommand(train))
      return cmd_train(config_path, data_dir, checkpoint, curve_path, criterion, epochs, seed,
                       resume_from, max_train_items, max_valid_items);
    if (app.got_subcommand(sep))
      return cmd_separate(checkpoint, wav_in, manifest_path, mode, refs, out_dir, dump_trace);
    if (app.got_subcommand(eval))
      return cmd_eval(checkpoints, manifest_path, modes, with_irm, out_prefix);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
