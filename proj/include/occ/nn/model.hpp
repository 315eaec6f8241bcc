#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "occ/nn/layers.hpp"
#include "occ/nn/tensor.hpp"

namespace occ::nn {

// Weight and bias tensors for every parametric layer, in chain order.
// Immutable after training/load; forward() is safe to call concurrently.
struct ModelWeights {
  std::uint32_t version = 1;
  std::uint64_t seed = 0;  // initialization provenance, not part of identity
  std::vector<Tensor> params;  // weight, bias, weight, bias, ...

  // Identity covers the serialized content: version and tensor payloads.
  friend bool operator==(const ModelWeights& a, const ModelWeights& b) {
    return a.version == b.version && a.params == b.params;
  }
};

struct TrainingConfig {
  float margin = 1.0f;
  float learning_rate = 0.01f;
  int epochs = 20;
  int batch_size = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (margin <= 0) throw ConfigError("TrainingConfig: margin must be > 0");
    if (learning_rate <= 0)
      throw ConfigError("TrainingConfig: learning rate must be > 0");
    if (epochs < 0) throw ConfigError("TrainingConfig: negative epochs");
    if (batch_size <= 0)
      throw ConfigError("TrainingConfig: batch size must be >= 1");
  }
};

// Seeded initialization: uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
// Validates that the chain composes on a [3, side, side] input.
ModelWeights init_model(std::span<const LayerSpec> specs, int input_side,
                        std::uint64_t seed);

// Per-layer activations retained for backprop. outputs[i] is the output of
// layer i; outputs.back() is the embedding.
struct ForwardTrace {
  std::vector<Tensor> outputs;
};

// Embedding forward pass. Input must be [3, S, S] with values in [0, 1].
// Throws ConfigError on shape mismatch, NumericError (with layer index) when
// a layer yields a non-finite value.
std::vector<float> forward(const ModelWeights& model,
                           std::span<const LayerSpec> specs,
                           const Tensor& image);

// Forward pass that retains activations for a subsequent backward pass.
const Tensor& forward_trace(const ModelWeights& model,
                            std::span<const LayerSpec> specs,
                            const Tensor& image, ForwardTrace& trace);

// Accumulates parameter gradients for one input given the gradient of the
// loss with respect to the embedding. grad_params must be shaped like
// model.params (zeroed by the caller for a fresh batch).
void backward(const ModelWeights& model, std::span<const LayerSpec> specs,
              const Tensor& image, const ForwardTrace& trace,
              const Tensor& grad_embedding, std::vector<Tensor>& grad_params);

// Pair loss under shared weights, accumulating parameter gradients into
// grads. Gradients are exactly zero in the two flat regions of the loss.
float pair_loss_and_grads(const ModelWeights& model,
                          std::span<const LayerSpec> specs, const Tensor& left,
                          const Tensor& right, int label, float margin,
                          std::vector<Tensor>& grads);

// One contrastive step on an image pair with shared weights: forward both,
// backprop the pair loss, apply one SGD update. Returns the pre-update loss.
float train_step(ModelWeights& model, std::span<const LayerSpec> specs,
                 const Tensor& left, const Tensor& right, int label,
                 const TrainingConfig& cfg);

std::vector<Tensor> zero_like(const std::vector<Tensor>& params);

void sgd_update(ModelWeights& model, const std::vector<Tensor>& grad_params,
                float learning_rate, float scale = 1.0f);

}  // namespace occ::nn
