#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pitsep/assignment.hpp"
#include "pitsep/dsp.hpp"
#include "pitsep/inference.hpp"
#include "pitsep/masking.hpp"
#include "pitsep/metrics.hpp"
#include "pitsep/model.hpp"
#include "pitsep/wav.hpp"

namespace py = pybind11;
using namespace pitsep;

namespace {

masking::StreamStack to_stack(const std::vector<Eigen::ArrayXXd>& arrays) {
  masking::StreamStack s;
  s.streams = arrays;
  s.check_consistent();
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Monaural multi-talker speech separation core";

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericError>(m, "NumericError");

  py::class_<dsp::StftConfig>(m, "StftConfig")
      .def(py::init([](int frame_len, int hop, int fft_len) {
             dsp::StftConfig c{frame_len, hop, fft_len};
             c.validate();
             return c;
           }),
           py::arg("frame_len") = 256, py::arg("hop") = 128, py::arg("fft_len") = 256)
      .def_readonly("frame_len", &dsp::StftConfig::frame_len)
      .def_readonly("hop", &dsp::StftConfig::hop)
      .def_readonly("fft_len", &dsp::StftConfig::fft_len)
      .def_property_readonly("bins", &dsp::StftConfig::bins);

  m.def(
      "stft",
      [](const Eigen::VectorXd& samples, const dsp::StftConfig& cfg, int sample_rate) {
        Waveform w{std::vector<double>(samples.data(), samples.data() + samples.size()),
                   sample_rate};
        return dsp::stft(w, cfg).values;
      },
      py::arg("samples"), py::arg("config"), py::arg("sample_rate") = 8000,
      "Complex spectrogram, frames x bins.");

  m.def(
      "istft",
      [](const Eigen::MatrixXcd& spec, const dsp::StftConfig& cfg, int sample_rate) {
        dsp::ComplexSpectrogram s;
        s.values = spec;
        Waveform w = dsp::istft(s, cfg, sample_rate);
        return Eigen::Map<Eigen::VectorXd>(w.samples.data(),
                                           static_cast<Eigen::Index>(w.samples.size()))
            .eval();
      },
      py::arg("spectrogram"), py::arg("config"), py::arg("sample_rate") = 8000);

  m.def(
      "softmax_masks",
      [](const std::vector<Eigen::ArrayXXd>& logits) {
        return masking::softmax_masks(logits).streams;
      },
      py::arg("logits"), "Per-bin softmax across the stream axis.");

  m.def(
      "irm",
      [](const std::vector<Eigen::ArrayXXd>& refs, const Eigen::ArrayXXd& mix) {
        dsp::MagnitudeSpectrogram mag;
        mag.values = mix;
        return masking::irm(to_stack(refs), mag).streams;
      },
      py::arg("reference_magnitudes"), py::arg("mixture_magnitude"));

  m.def(
      "apply_masks",
      [](const std::vector<Eigen::ArrayXXd>& masks, const Eigen::ArrayXXd& mix) {
        return masking::apply_masks(to_stack(masks), mix).streams;
      },
      py::arg("masks"), py::arg("mixture_magnitude"));

  m.def(
      "loss_jx",
      [](const std::vector<Eigen::ArrayXXd>& est, const std::vector<Eigen::ArrayXXd>& refs) {
        return masking::loss_jx(to_stack(est), to_stack(refs));
      },
      py::arg("est"), py::arg("refs"));

  m.def(
      "pairwise_cost",
      [](const std::vector<Eigen::ArrayXXd>& est, const std::vector<Eigen::ArrayXXd>& refs) {
        return assignment::pairwise_cost(to_stack(est), to_stack(refs));
      },
      py::arg("est"), py::arg("refs"));

  m.def("best_perm_bruteforce", &assignment::best_perm_bruteforce, py::arg("cost"));
  m.def("best_perm_hungarian", &assignment::best_perm_hungarian, py::arg("cost"));

  m.def(
      "pit_loss",
      [](const std::vector<Eigen::ArrayXXd>& est, const std::vector<Eigen::ArrayXXd>& refs) {
        return assignment::pit_loss(to_stack(est), to_stack(refs));
      },
      py::arg("est"), py::arg("refs"),
      "Loss under the best output-to-reference assignment, with the winning permutation.");

  m.def(
      "sdr",
      [](const Eigen::VectorXd& est, const Eigen::VectorXd& ref, int sample_rate) {
        Waveform e{std::vector<double>(est.data(), est.data() + est.size()), sample_rate};
        Waveform r{std::vector<double>(ref.data(), ref.data() + ref.size()), sample_rate};
        return metrics::sdr(e, r);
      },
      py::arg("est"), py::arg("ref"), py::arg("sample_rate") = 8000);

  m.def("read_wav", [](const std::string& path) {
    Waveform w = wav::read_wav(path);
    return py::make_tuple(Eigen::Map<Eigen::VectorXd>(
                              w.samples.data(), static_cast<Eigen::Index>(w.samples.size()))
                              .eval(),
                          w.sample_rate);
  });
  m.def("write_wav", [](const std::string& path, const Eigen::VectorXd& samples, int rate) {
    Waveform w{std::vector<double>(samples.data(), samples.data() + samples.size()), rate};
    wav::write_wav(path, w);
  });

  m.def(
      "separate",
      [](const std::string& checkpoint, const Eigen::VectorXd& samples, int sample_rate,
         const std::string& mode) {
        model::ModelParams params = model::load_checkpoint(checkpoint);
        Waveform mixture{std::vector<double>(samples.data(), samples.data() + samples.size()),
                         sample_rate};
        auto result = inference::separate(params, mixture, inference::mode_from_string(mode));
        std::vector<Eigen::VectorXd> streams;
        for (auto& w : result.streams)
          streams.push_back(Eigen::Map<Eigen::VectorXd>(
                                w.samples.data(), static_cast<Eigen::Index>(w.samples.size()))
                                .eval());
        return streams;
      },
      py::arg("checkpoint"), py::arg("samples"), py::arg("sample_rate") = 8000,
      py::arg("mode") = "default",
      "Separate a mixture with a trained checkpoint (default or greedy stitching).");
}
