#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "pitsep/assignment.hpp"
#include "pitsep/model.hpp"

using namespace pitsep;
using model::MetaFrameSpec;

namespace {

dsp::MagnitudeSpectrogram random_mag(int T, int F, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.5);
  dsp::MagnitudeSpectrogram m;
  m.values.resize(T, F);
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f) m.values(t, f) = dist(rng);
  return m;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("degenerate 1x1 meta-frame geometry") {
  MetaFrameSpec spec{1, 1, 1};
  auto mag = random_mag(1, 4, 1);
  auto mfs = model::make_metaframes(mag, nullptr, spec);
  REQUIRE(mfs.size() == 1);
  CHECK(mfs[0].center_frame == 0);
  CHECK((mfs[0].mix_window.row(0).transpose() - mag.values.row(0).transpose()).abs().maxCoeff() ==
        0.0);
}

TEST_CASE("meta-frame count and window indexing, T=100 N=41 M=7") {
  MetaFrameSpec spec{41, 7, 1};
  auto mag = random_mag(100, 5, 2);
  masking::StreamMagnitudes refs;
  refs.streams = {random_mag(100, 5, 3).values, random_mag(100, 5, 4).values};
  auto mfs = model::make_metaframes(mag, &refs, spec);
  REQUIRE(mfs.size() == 100);

  // independent index arithmetic on a few positions
  for (int c : {0, 3, 50, 99}) {
    const auto& mf = mfs[c];
    CHECK(mf.center_frame == c);
    for (int i = 0; i < 41; ++i) {
      int t = c - 20 + i;
      for (int f = 0; f < 5; ++f) {
        double expect = (t >= 0 && t < 100) ? mag.values(t, f) : 0.0;
        CHECK(mf.features(i * 5 + f) == expect);
      }
    }
    for (int i = 0; i < 7; ++i) {
      int t = c - 3 + i;
      for (int f = 0; f < 5; ++f) {
        double expect = (t >= 0 && t < 100) ? refs.streams[1](t, f) : 0.0;
        CHECK(mf.ref_windows[1](i, f) == expect);
      }
    }
  }
}

TEST_CASE("whole-window output configuration is accepted") {
  MetaFrameSpec spec{101, 101, 1};
  spec.validate();
  auto mag = random_mag(30, 3, 5);
  auto mfs = model::make_metaframes(mag, nullptr, spec);
  CHECK(mfs.size() == 30);
}

TEST_CASE("meta-frame count is independent of M") {
  auto mag = random_mag(50, 3, 6);
  for (int m : {1, 3, 5}) {
    MetaFrameSpec spec{7, m, 2};
    CHECK(model::make_metaframes(mag, nullptr, spec).size() == 25);
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS((MetaFrameSpec{5, 7, 1}).validate(), InvalidArgument);
  CHECK_THROWS_AS((MetaFrameSpec{6, 3, 1}).validate(), InvalidArgument);
  CHECK_THROWS_AS((MetaFrameSpec{7, 3, 0}).validate(), InvalidArgument);
}

TEST_CASE("init is deterministic and shapes chain") {
  MetaFrameSpec spec{41, 5, 1};
  auto a = model::init_model({128, 128, 128}, 2, 129, spec, 7);
  auto b = model::init_model({128, 128, 128}, 2, 129, spec, 7);
  REQUIRE(a.layers.size() == 4);
  CHECK(a.layers[0].weight.cols() == 41 * 129);
  CHECK(a.layers[3].weight.rows() == 2 * 5 * 129);
  for (size_t i = 0; i < a.layers.size(); ++i) {
    CHECK(a.layers[i].weight == b.layers[i].weight);
    CHECK(a.layers[i].bias == b.layers[i].bias);
  }
  auto c = model::init_model({128, 128, 128}, 2, 129, spec, 8);
  CHECK(a.layers[0].weight != c.layers[0].weight);
}

TEST_CASE("fresh model yields near-uniform masks") {
  MetaFrameSpec spec{5, 3, 1};
  auto params = model::init_model({32, 32}, 2, 17, spec, 11);
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, params.input_dim(), 0.5);
  Eigen::MatrixXd logits = model::forward(params, x);
  auto streams = model::row_to_streams(params, logits.row(0).transpose());
  auto masks = masking::softmax_masks(streams);
  // small logit spread at init keeps masks close to 1/S
  for (const auto& m : masks.streams) {
    CHECK(m.maxCoeff() < 0.75);
    CHECK(m.minCoeff() > 0.25);
  }
}

TEST_CASE("zero parameters give zero logits") {
  MetaFrameSpec spec{3, 1, 1};
  auto params = model::init_model({8}, 2, 4, spec, 1);
  for (auto& l : params.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, params.input_dim());
  CHECK(model::forward(params, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward matches an independent matrix recomputation") {
  MetaFrameSpec spec{3, 1, 1};
  auto params = model::init_model({6, 5}, 2, 2, spec, 21);
  Eigen::VectorXd x = Eigen::VectorXd::Random(params.input_dim());
  Eigen::MatrixXd out = model::forward(params, x.transpose());

  Eigen::VectorXd h = x;
  for (size_t i = 0; i < params.layers.size(); ++i) {
    Eigen::VectorXd z = params.layers[i].weight * h + params.layers[i].bias;
    if (i + 1 < params.layers.size()) z = z.cwiseMax(0.0);
    h = z;
  }
  CHECK((out.row(0).transpose() - h).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward: zero upstream gradient, finite differences, relu gating") {
  MetaFrameSpec spec{3, 1, 1};
  auto params = model::init_model({7}, 2, 3, spec, 31);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, params.input_dim());
  model::ForwardCache cache;
  Eigen::MatrixXd logits = model::forward(params, x, &cache);

  SUBCASE("zero upstream gradient gives zero parameter gradients") {
    auto g = model::backward(params, cache, Eigen::MatrixXd::Zero(2, params.output_dim()));
    for (const auto& l : g.layers) {
      CHECK(l.weight.cwiseAbs().maxCoeff() == 0.0);
      CHECK(l.bias.cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("parameter gradients match central finite differences") {
    // loss = sum of logits * fixed weights
    Eigen::MatrixXd w = Eigen::MatrixXd::Random(2, params.output_dim());
    auto g = model::backward(params, cache, w);
    auto loss_at = [&](const model::ModelParams& p) {
      return (model::forward(p, x).array() * w.array()).sum();
    };
    const double h = 1e-6;
    std::mt19937_64 rng(5);
    for (int probe = 0; probe < 40; ++probe) {
      size_t li = rng() % params.layers.size();
      int r = static_cast<int>(rng() % params.layers[li].weight.rows());
      int c = static_cast<int>(rng() % params.layers[li].weight.cols());
      auto pp = params, pm = params;
      pp.layers[li].weight(r, c) += h;
      pm.layers[li].weight(r, c) -= h;
      double fd = (loss_at(pp) - loss_at(pm)) / (2.0 * h);
      CHECK(g.layers[li].weight(r, c) == doctest::Approx(fd).epsilon(1e-5));
    }
  }

  SUBCASE("gradients are gated through negative pre-activations") {
    // unit 0 of the hidden layer forced inactive for item 0
    Eigen::MatrixXd xx = x;
    model::ForwardCache c2;
    auto p2 = params;
    p2.layers[0].bias(0) = -1e6;
    model::forward(p2, xx, &c2);
    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(2, p2.output_dim());
    auto g = model::backward(p2, c2, w);
    CHECK(g.layers[0].weight.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.layers[0].bias(0) == 0.0);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  namespace fs = std::filesystem;
  MetaFrameSpec spec{7, 3, 2};
  auto params = model::init_model({12, 9}, 3, 5, spec, 77);
  params.feat_mean = -0.731;
  params.feat_std = 1.625;
  params.stft = dsp::StftConfig::wideband();
  params.sample_rate = 16000;

  std::string p = (fs::temp_directory_path() / "pitsep_ckpt_test.bin").string();
  model::save_checkpoint(params, p);
  auto loaded = model::load_checkpoint(p);

  CHECK(loaded.streams == 3);
  CHECK(loaded.bins == 5);
  CHECK(loaded.metaframe.input_frames == 7);
  CHECK(loaded.metaframe.shift == 2);
  CHECK(loaded.feat_mean == params.feat_mean);
  CHECK(loaded.feat_std == params.feat_std);
  CHECK(loaded.stft.fft_len == 512);
  CHECK(loaded.sample_rate == 16000);
  CHECK(loaded.seed == 77);
  REQUIRE(loaded.layers.size() == params.layers.size());
  for (size_t i = 0; i < params.layers.size(); ++i) {
    CHECK(loaded.layers[i].weight == params.layers[i].weight);
    CHECK(loaded.layers[i].bias == params.layers[i].bias);
  }
  fs::remove(p);
}

TEST_CASE("corrupt checkpoints are rejected") {
  namespace fs = std::filesystem;
  std::string p = (fs::temp_directory_path() / "pitsep_ckpt_bad.bin").string();
  {
    std::ofstream f(p, std::ios::binary);
    f << "not a checkpoint";
  }
  CHECK_THROWS_AS(model::load_checkpoint(p), DataError);
  fs::remove(p);
}

TEST_CASE("end-to-end gradient through masks and PIT loss vs finite differences") {
  MetaFrameSpec spec{3, 1, 1};
  auto params = model::init_model({10}, 2, 4, spec, 41);
  auto mag = random_mag(6, 4, 42);
  masking::StreamMagnitudes refs;
  refs.streams = {random_mag(6, 4, 43).values, random_mag(6, 4, 44).values};
  auto mfs = model::make_metaframes(mag, &refs, spec);

  auto loss_of = [&](const model::ModelParams& p) {
    double acc = 0.0;
    for (const auto& mf : mfs) {
      Eigen::MatrixXd logits = model::forward(p, mf.features.transpose());
      auto masks = masking::softmax_masks(model::row_to_streams(p, logits.row(0).transpose()));
      auto est = masking::apply_masks(masks, mf.mix_window);
      masking::StreamMagnitudes r;
      r.streams = mf.ref_windows;
      acc += assignment::pit_loss(est, r).first;
    }
    return acc / static_cast<double>(mfs.size());
  };

  // analytic gradient assembled through the full chain
  auto grads = model::zero_gradients(params);
  for (const auto& mf : mfs) {
    model::ForwardCache cache;
    Eigen::MatrixXd logits = model::forward(params, mf.features.transpose(), &cache);
    auto masks = masking::softmax_masks(model::row_to_streams(params, logits.row(0).transpose()));
    auto est = masking::apply_masks(masks, mf.mix_window);
    masking::StreamMagnitudes r;
    r.streams = mf.ref_windows;
    auto [loss, perm] = assignment::pit_loss(est, r);
    auto grad_est = assignment::pit_grad(est, r, perm);
    std::vector<Eigen::ArrayXXd> grad_masks(2);
    for (int s = 0; s < 2; ++s) grad_masks[s] = grad_est[s] * mf.mix_window;
    auto grad_logits = masking::softmax_backward(masks, grad_masks);
    Eigen::MatrixXd go = model::streams_to_row(params, grad_logits).transpose() /
                         static_cast<double>(mfs.size());
    grads.accumulate(model::backward(params, cache, go));
  }

  const double h = 1e-5;
  std::mt19937_64 rng(9);
  for (int probe = 0; probe < 25; ++probe) {
    size_t li = rng() % params.layers.size();
    int r = static_cast<int>(rng() % params.layers[li].weight.rows());
    int c = static_cast<int>(rng() % params.layers[li].weight.cols());
    auto pp = params, pm = params;
    pp.layers[li].weight(r, c) += h;
    pm.layers[li].weight(r, c) -= h;
    double fd = (loss_of(pp) - loss_of(pm)) / (2.0 * h);
    double an = grads.layers[li].weight(r, c);
    CHECK(an == doctest::Approx(fd).epsilon(1e-4));
  }
}

}  // TEST_SUITE
