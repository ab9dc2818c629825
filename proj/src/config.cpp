#include "pitsep/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

using json = nlohmann::json;

namespace pitsep::config {

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw DataError("config: " + where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key))
      throw DataError("config: unknown key \"" + key + "\" in " + where);
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::type_error& e) {
    throw DataError("config: bad value for \"" + std::string(key) + "\": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  stft.validate();
  corpus.validate();
  training.validate();
  if (sample_rate <= 0) throw InvalidArgument("RunConfig: bad sample rate");
  if (corpus.sample_rate != sample_rate)
    throw InvalidArgument("RunConfig: corpus sample rate differs from dsp sample rate");
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.corpus.seed = cfg.seed;
  cfg.training.seed = cfg.seed;
  return cfg;
}

std::string to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["dsp"] = {{"sample_rate", cfg.sample_rate},
              {"frame_len", cfg.stft.frame_len},
              {"hop", cfg.stft.hop},
              {"fft_len", cfg.stft.fft_len}};
  j["corpus"] = {{"duration_s", cfg.corpus.duration_s},
                 {"num_sources", cfg.corpus.num_sources},
                 {"num_train_speakers", cfg.corpus.num_train_speakers},
                 {"num_heldout_speakers", cfg.corpus.num_heldout_speakers},
                 {"num_train", cfg.corpus.num_train},
                 {"num_valid", cfg.corpus.num_valid},
                 {"num_test_cc", cfg.corpus.num_test_cc},
                 {"num_test_oc", cfg.corpus.num_test_oc},
                 {"snr_min_db", cfg.corpus.snr_min_db},
                 {"snr_max_db", cfg.corpus.snr_max_db}};
  j["model"] = {{"hidden_layers", cfg.training.hidden_dims},
                {"input_frames", cfg.training.metaframe.input_frames},
                {"output_frames", cfg.training.metaframe.output_frames},
                {"shift", cfg.training.metaframe.shift}};
  j["training"] = {{"epochs", cfg.training.epochs},
                   {"batch_size", cfg.training.batch_size},
                   {"learning_rate", cfg.training.learning_rate},
                   {"momentum", cfg.training.momentum},
                   {"lr_decay", cfg.training.lr_decay},
                   {"patience", cfg.training.patience},
                   {"criterion", training::to_string(cfg.training.criterion)}};
  j["inference"] = {{"mode", inference::to_string(cfg.inference_mode)}};
  j["metrics"] = {{"with_irm", cfg.with_irm}};
  return j.dump(2);
}

RunConfig from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("config: bad json: ") + e.what());
  }
  check_keys(j, {"seed", "dsp", "corpus", "model", "training", "inference", "metrics"}, "root");

  RunConfig cfg = default_config();
  get_if(j, "seed", cfg.seed);

  if (j.contains("dsp")) {
    const auto& d = j["dsp"];
    check_keys(d, {"sample_rate", "frame_len", "hop", "fft_len"}, "dsp");
    get_if(d, "sample_rate", cfg.sample_rate);
    get_if(d, "frame_len", cfg.stft.frame_len);
    get_if(d, "hop", cfg.stft.hop);
    get_if(d, "fft_len", cfg.stft.fft_len);
  }
  if (j.contains("corpus")) {
    const auto& c = j["corpus"];
    check_keys(c,
               {"duration_s", "num_sources", "num_train_speakers", "num_heldout_speakers",
                "num_train", "num_valid", "num_test_cc", "num_test_oc", "snr_min_db",
                "snr_max_db"},
               "corpus");
    get_if(c, "duration_s", cfg.corpus.duration_s);
    get_if(c, "num_sources", cfg.corpus.num_sources);
    get_if(c, "num_train_speakers", cfg.corpus.num_train_speakers);
    get_if(c, "num_heldout_speakers", cfg.corpus.num_heldout_speakers);
    get_if(c, "num_train", cfg.corpus.num_train);
    get_if(c, "num_valid", cfg.corpus.num_valid);
    get_if(c, "num_test_cc", cfg.corpus.num_test_cc);
    get_if(c, "num_test_oc", cfg.corpus.num_test_oc);
    get_if(c, "snr_min_db", cfg.corpus.snr_min_db);
    get_if(c, "snr_max_db", cfg.corpus.snr_max_db);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, {"hidden_layers", "input_frames", "output_frames", "shift"}, "model");
    get_if(m, "hidden_layers", cfg.training.hidden_dims);
    get_if(m, "input_frames", cfg.training.metaframe.input_frames);
    get_if(m, "output_frames", cfg.training.metaframe.output_frames);
    get_if(m, "shift", cfg.training.metaframe.shift);
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    check_keys(t,
               {"epochs", "batch_size", "learning_rate", "momentum", "lr_decay", "patience",
                "criterion"},
               "training");
    get_if(t, "epochs", cfg.training.epochs);
    get_if(t, "batch_size", cfg.training.batch_size);
    get_if(t, "learning_rate", cfg.training.learning_rate);
    get_if(t, "momentum", cfg.training.momentum);
    get_if(t, "lr_decay", cfg.training.lr_decay);
    get_if(t, "patience", cfg.training.patience);
    if (t.contains("criterion"))
      cfg.training.criterion = training::criterion_from_string(t["criterion"].get<std::string>());
  }
  if (j.contains("inference")) {
    const auto& i = j["inference"];
    check_keys(i, {"mode"}, "inference");
    if (i.contains("mode"))
      cfg.inference_mode = inference::mode_from_string(i["mode"].get<std::string>());
  }
  if (j.contains("metrics")) {
    const auto& m = j["metrics"];
    check_keys(m, {"with_irm"}, "metrics");
    get_if(m, "with_irm", cfg.with_irm);
  }

  cfg.corpus.sample_rate = cfg.sample_rate;
  cfg.corpus.seed = cfg.seed;
  cfg.training.seed = cfg.seed;
  return cfg;
}

RunConfig load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

void save(const RunConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("config: cannot open " + path);
  f << to_json(cfg) << "\n";
}

}  // namespace pitsep::config
