#include "doctest.h"

#include "occ/nn/layers.hpp"
#include "occ/nn/loss.hpp"
#include "occ/nn/model.hpp"
#include "occ/nn/serialize.hpp"
#include "occ/rng.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace occ;
using namespace occ::nn;

namespace {

// Independent scalar forward pass: plain nested loops, index arithmetic done
// long-hand. Deliberately shares no code with the production kernels.
std::vector<double> oracle_forward(const ModelWeights& model,
                                   const std::vector<LayerSpec>& specs,
                                   const Tensor& image) {
  // current activation as [channels][h][w]
  std::vector<std::vector<std::vector<double>>> act;
  {
    const int c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
    act.assign(c, std::vector<std::vector<double>>(h, std::vector<double>(w)));
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          act[ci][y][x] = image[(std::size_t(ci) * h + y) * w + x];
  }

  std::size_t p = 0;
  for (const LayerSpec& s : specs) {
    if (s.kind == LayerSpec::Kind::conv) {
      const Tensor& wt = model.params[p];
      const Tensor& bt = model.params[p + 1];
      p += 2;
      const int ic = static_cast<int>(act.size());
      const int ih = static_cast<int>(act[0].size());
      const int k = s.kernel, st = s.stride;
      const int oh = (ih - k) / st + 1;
      std::vector<std::vector<std::vector<double>>> out(
          s.out_channels,
          std::vector<std::vector<double>>(oh, std::vector<double>(oh)));
      for (int f = 0; f < s.out_channels; ++f)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < oh; ++ox) {
            double sum = bt[f];
            for (int c = 0; c < ic; ++c)
              for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                  const std::size_t wi =
                      ((std::size_t(f) * ic + c) * k + ky) * k + kx;
                  sum += double(wt[wi]) * act[c][oy * st + ky][ox * st + kx];
                }
            out[f][oy][ox] = sum;
          }
      act = std::move(out);
    } else if (s.kind == LayerSpec::Kind::fully_connected) {
      // flatten channel-major
      std::vector<double> flat;
      for (const auto& plane : act)
        for (const auto& row : plane)
          for (double v : row) flat.push_back(v);
      const Tensor& wt = model.params[p];
      const Tensor& bt = model.params[p + 1];
      p += 2;
      std::vector<std::vector<std::vector<double>>> out(
          s.units, std::vector<std::vector<double>>(1, std::vector<double>(1)));
      for (int u = 0; u < s.units; ++u) {
        double sum = bt[u];
        for (std::size_t i = 0; i < flat.size(); ++i)
          sum += double(wt[std::size_t(u) * flat.size() + i]) * flat[i];
        out[u][0][0] = sum;
      }
      act = std::move(out);
    } else {
      for (auto& plane : act)
        for (auto& row : plane)
          for (double& v : row) {
            if (s.activation == Activation::tanh_act) v = std::tanh(v);
            else if (s.activation == Activation::relu) v = v > 0 ? v : 0;
          }
    }
  }

  std::vector<double> out;
  for (const auto& plane : act)
    for (const auto& row : plane)
      for (double v : row) out.push_back(v);
  return out;
}

Tensor random_image(int side, std::uint64_t seed) {
  Tensor t({3, side, side});
  Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(rng.uniform());
  return t;
}

// Reduced chain covering every layer kind.
std::vector<LayerSpec> reduced_net() {
  return {LayerSpec::conv(3, 4, 1), LayerSpec::act(Activation::tanh_act),
          LayerSpec::fc(8), LayerSpec::act(Activation::relu), LayerSpec::fc(4)};
}

// Finite differences need an evaluation point away from the kinks: ReLU
// inputs clear of zero, the distance clear of zero, and label-1 pairs clear
// of the margin hinge.
bool fd_safe(const ModelWeights& model, const std::vector<LayerSpec>& specs,
             const Tensor& a, const Tensor& b, int label, float margin) {
  for (const Tensor* img : {&a, &b}) {
    ForwardTrace trace;
    forward_trace(model, specs, *img, trace);
    for (std::size_t i = 1; i < specs.size(); ++i) {
      if (specs[i].kind != LayerSpec::Kind::activation ||
          specs[i].activation != Activation::relu)
        continue;
      for (float v : trace.outputs[i - 1].values())
        if (std::abs(v) < 5e-3f) return false;
    }
  }
  const std::vector<float> ea = forward(model, specs, a);
  const std::vector<float> eb = forward(model, specs, b);
  double ss = 0;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    const double d = double(ea[i]) - double(eb[i]);
    ss += d * d;
  }
  const double dist = std::sqrt(ss);
  if (dist < 0.05) return false;
  if (label == 1 && std::abs(double(margin) - dist) < 0.05) return false;
  return true;
}

// Pair loss evaluated through the 64-bit oracle forward, so finite
// differences see none of the f32 rounding noise.
double pair_loss_value(const ModelWeights& model,
                       const std::vector<LayerSpec>& specs, const Tensor& a,
                       const Tensor& b, int label, float margin) {
  const std::vector<double> ea = oracle_forward(model, specs, a);
  const std::vector<double> eb = oracle_forward(model, specs, b);
  double ss = 0;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    const double d = ea[i] - eb[i];
    ss += d * d;
  }
  const double dist = std::sqrt(ss);
  if (label == 0) return 0.5 * dist * dist;
  const double gap = std::max(0.0, double(margin) - dist);
  return 0.5 * gap * gap;
}

}  // namespace

TEST_CASE("shape algebra: default chain gives 128 outputs") {
  const auto specs = embedding_net_spec();
  CHECK(chain_output_shape(specs, {3, 128, 128}) == std::vector<int>{128});
  CHECK(chain_output_shape(specs, {3, 64, 64}) == std::vector<int>{128});
  CHECK_THROWS_AS(chain_output_shape(specs, {3, 16, 16}), ConfigError);
}

TEST_CASE("forward: zero weights and zero image give the zero vector") {
  const auto specs = embedding_net_spec();
  ModelWeights model = init_model(specs, 64, 1);
  for (Tensor& t : model.params) t.fill(0.0f);
  const Tensor image({3, 64, 64});
  const std::vector<float> out = forward(model, specs, image);
  REQUIRE(out.size() == 128);
  for (float v : out) CHECK(v == 0.0f);
}

TEST_CASE("forward: deterministic bit-exact") {
  const auto specs = embedding_net_spec();
  const ModelWeights model = init_model(specs, 64, 99);
  const Tensor image = random_image(64, 5);
  const std::vector<float> a = forward(model, specs, image);
  const std::vector<float> b = forward(model, specs, image);
  CHECK(a == b);
}

TEST_CASE("forward: matches the scalar oracle within 1e-5 per element") {
  const auto specs = embedding_net_spec();
  const ModelWeights model = init_model(specs, 64, 42);
  const Tensor image = random_image(64, 42);
  const std::vector<float> got = forward(model, specs, image);
  const std::vector<double> want = oracle_forward(model, specs, image);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(std::abs(double(got[i]) - want[i]) < 1e-5);
}

TEST_CASE("forward: input validation and numeric errors") {
  const auto specs = embedding_net_spec();
  const ModelWeights model = init_model(specs, 64, 3);
  CHECK_THROWS_AS(forward(model, specs, Tensor({1, 64, 64})), ConfigError);
  CHECK_THROWS_AS(forward(model, specs, Tensor({3, 32, 32})), ConfigError);

  Tensor out_of_range({3, 64, 64});
  out_of_range[0] = 2.0f;
  CHECK_THROWS_AS(forward(model, specs, out_of_range), ConfigError);

  ModelWeights poisoned = init_model(specs, 64, 3);
  poisoned.params[0][0] = std::numeric_limits<float>::quiet_NaN();
  try {
    forward(poisoned, specs, Tensor({3, 64, 64}));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.layer_index == 0);
  }
}

TEST_CASE("contrastive loss: exact values and domain checks") {
  CHECK(contrastive_loss(0.0f, 0, 1.0f) == doctest::Approx(0.0));
  CHECK(contrastive_loss(1.5f, 1, 1.0f) == doctest::Approx(0.0));
  CHECK(contrastive_loss(0.5f, 1, 1.0f) == doctest::Approx(0.125));
  CHECK(contrastive_loss(0.2f, 0, 1.0f) == doctest::Approx(0.02));
  CHECK_THROWS_AS(contrastive_loss(-0.1f, 0, 1.0f), DomainError);
  CHECK_THROWS_AS(contrastive_loss(0.1f, 0, 0.0f), DomainError);

  // the two exact-zero regions
  for (float d : {0.0f, 1.0f, 2.5f}) {
    CHECK(contrastive_loss(d, 0, 1.0f) >= 0.0f);
    CHECK(contrastive_loss(d, 1, 1.0f) >= 0.0f);
  }
}

TEST_CASE("train_step: flat-loss regions leave the model bit-identical") {
  const auto specs = reduced_net();
  TrainingConfig cfg;
  cfg.margin = 1e-3f;  // tiny margin so random pairs sit beyond it
  cfg.seed = 17;

  ModelWeights model = init_model(specs, 8, 17);
  const ModelWeights before = model;
  const Tensor a = random_image(8, 1), b = random_image(8, 2);

  // different-label pair already past the margin: zero gradient
  const float loss_far = train_step(model, specs, a, b, 1, cfg);
  CHECK(loss_far == 0.0f);
  CHECK(model == before);

  // identical images with label 0: distance 0, loss 0
  const float loss_same = train_step(model, specs, a, a, 0, cfg);
  CHECK(loss_same == 0.0f);
  CHECK(model == before);
}

TEST_CASE("train_step: one step matches the finite-difference oracle") {
  // tiny network, one seeded pair, central differences with eps=1e-3
  const auto specs = reduced_net();
  TrainingConfig cfg;
  cfg.learning_rate = 0.05f;
  cfg.seed = 23;

  ModelWeights model = init_model(specs, 8, 23);
  const Tensor a = random_image(8, 31), b = random_image(8, 37);
  const int label = 0;
  REQUIRE(fd_safe(model, specs, a, b, label, cfg.margin));

  const ModelWeights before = model;
  train_step(model, specs, a, b, label, cfg);

  const double eps = 1e-3;
  double worst = 0;
  for (std::size_t t = 0; t < before.params.size(); ++t) {
    for (std::size_t i = 0; i < before.params[t].size(); i += 7) {
      ModelWeights probe = before;
      probe.params[t][i] = before.params[t][i] + static_cast<float>(eps);
      const double up = pair_loss_value(probe, specs, a, b, label, cfg.margin);
      probe.params[t][i] = before.params[t][i] - static_cast<float>(eps);
      const double dn = pair_loss_value(probe, specs, a, b, label, cfg.margin);
      const double fd_grad = (up - dn) / (2 * eps);
      // recover the analytic gradient from the SGD update
      const double analytic =
          (double(before.params[t][i]) - double(model.params[t][i])) /
          cfg.learning_rate;
      const double denom = std::max({std::abs(fd_grad), std::abs(analytic), 1e-2});
      worst = std::max(worst, std::abs(fd_grad - analytic) / denom);
    }
  }
  CHECK(worst < 1e-2);
}

TEST_CASE("gradients: every layer kind agrees with central differences") {
  const auto specs = reduced_net();
  for (int label : {0, 1}) {
    int checked = 0;
    for (std::uint64_t seed = 7; checked < 3; ++seed) {
      ModelWeights model = init_model(specs, 8, seed);
      const Tensor a = random_image(8, seed * 11 + 1);
      const Tensor b = random_image(8, seed * 11 + 2);
      const float margin = 4.0f;  // keep label-1 pairs inside the margin
      if (!fd_safe(model, specs, a, b, label, margin)) continue;
      ++checked;

      std::vector<Tensor> grads = zero_like(model.params);
      pair_loss_and_grads(model, specs, a, b, label, margin, grads);

      const double eps = 1e-3;
      double worst = 0;
      for (std::size_t t = 0; t < model.params.size(); ++t) {
        for (std::size_t i = 0; i < model.params[t].size(); i += 5) {
          const float keep = model.params[t][i];
          model.params[t][i] = keep + static_cast<float>(eps);
          const double up = pair_loss_value(model, specs, a, b, label, margin);
          model.params[t][i] = keep - static_cast<float>(eps);
          const double dn = pair_loss_value(model, specs, a, b, label, margin);
          model.params[t][i] = keep;
          const double fd = (up - dn) / (2 * eps);
          const double an = grads[t][i];
          const double denom = std::max({std::abs(fd), std::abs(an), 1e-2});
          worst = std::max(worst, std::abs(fd - an) / denom);
        }
      }
      CHECK_MESSAGE(worst < 1e-2, "seed ", seed, " label ", label,
                    " worst rel err ", worst);
    }
  }
}

TEST_CASE("stride-2 conv gradient agrees with central differences") {
  const std::vector<LayerSpec> specs = {LayerSpec::conv(3, 3, 2),
                                        LayerSpec::act(Activation::tanh_act),
                                        LayerSpec::fc(4)};
  ModelWeights model = init_model(specs, 9, 41);
  const Tensor a = random_image(9, 61), b = random_image(9, 62);
  REQUIRE(fd_safe(model, specs, a, b, 0, 1.0f));

  std::vector<Tensor> grads = zero_like(model.params);
  pair_loss_and_grads(model, specs, a, b, 0, 1.0f, grads);

  const double eps = 1e-3;
  for (std::size_t t = 0; t < model.params.size(); ++t) {
    for (std::size_t i = 0; i < model.params[t].size(); i += 3) {
      const float keep = model.params[t][i];
      model.params[t][i] = keep + static_cast<float>(eps);
      const double up = pair_loss_value(model, specs, a, b, 0, 1.0f);
      model.params[t][i] = keep - static_cast<float>(eps);
      const double dn = pair_loss_value(model, specs, a, b, 0, 1.0f);
      model.params[t][i] = keep;
      const double fd = (up - dn) / (2 * eps);
      const double an = grads[t][i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-2});
      CHECK(std::abs(fd - an) / denom < 1e-2);
    }
  }
}

TEST_CASE("weights: save/load round trip is bit-exact") {
  const auto specs = embedding_net_spec();
  const ModelWeights model = init_model(specs, 64, 1234);
  const std::string path =
      (std::filesystem::temp_directory_path() / "occ_weights_test.bin").string();
  save_weights(model, path);
  const ModelWeights loaded = load_weights(path);
  CHECK(loaded == model);

  // forward equality after a round trip
  const Tensor image = random_image(64, 77);
  CHECK(forward(model, specs, image) == forward(loaded, specs, image));
  std::filesystem::remove(path);
}

TEST_CASE("weights: corrupted or truncated files are format errors") {
  const auto specs = reduced_net();
  const ModelWeights model = init_model(specs, 8, 5);
  const std::string path =
      (std::filesystem::temp_directory_path() / "occ_weights_bad.bin").string();
  save_weights(model, path);

  // corrupt the magic
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_weights(path), FormatError);

  // rewrite, then truncate
  save_weights(model, path);
  {
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
  }
  CHECK_THROWS_AS(load_weights(path), FormatError);

  // trailing bytes
  save_weights(model, path);
  {
    std::ofstream f(path, std::ios::app | std::ios::binary);
    f.write("z", 1);
  }
  CHECK_THROWS_AS(load_weights(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("forward: concurrent inference over shared weights") {
  const auto specs = embedding_net_spec();
  const ModelWeights model = init_model(specs, 64, 7);
  const Tensor image = random_image(64, 8);
  const std::vector<float> expected = forward(model, specs, image);

  std::vector<std::vector<float>> results(4);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back(
        [&, t] { results[t] = forward(model, specs, image); });
  for (auto& th : threads) th.join();
  for (const auto& r : results) CHECK(r == expected);
}

TEST_CASE("init: seeded and deterministic") {
  const auto specs = embedding_net_spec();
  const ModelWeights a = init_model(specs, 64, 10);
  const ModelWeights b = init_model(specs, 64, 10);
  const ModelWeights c = init_model(specs, 64, 11);
  CHECK(a == b);
  CHECK_FALSE(a == c);
}
