#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "occ/nn/tensor.hpp"

namespace occ::nn {

enum class Activation { none, tanh_act, relu };

// One layer of the embedding network. Conv layers are valid-padding with a
// square kernel; fully connected layers flatten whatever shape they receive.
struct LayerSpec {
  enum class Kind { conv, fully_connected, activation };

  Kind kind = Kind::activation;
  int kernel = 0;        // conv: kernel side
  int out_channels = 0;  // conv
  int stride = 1;        // conv
  int units = 0;         // fully_connected
  Activation activation = Activation::none;

  static LayerSpec conv(int kernel, int out_channels, int stride = 1) {
    if (kernel <= 0 || out_channels <= 0 || stride < 1)
      throw ConfigError("LayerSpec::conv: invalid kernel/channels/stride");
    LayerSpec s;
    s.kind = Kind::conv;
    s.kernel = kernel;
    s.out_channels = out_channels;
    s.stride = stride;
    return s;
  }

  static LayerSpec fc(int units) {
    if (units <= 0) throw ConfigError("LayerSpec::fc: invalid unit count");
    LayerSpec s;
    s.kind = Kind::fully_connected;
    s.units = units;
    return s;
  }

  static LayerSpec act(Activation a) {
    LayerSpec s;
    s.kind = Kind::activation;
    s.activation = a;
    return s;
  }

  // True for layers that carry weight/bias tensors.
  bool has_params() const { return kind != Kind::activation; }
};

// Shape of a single layer's output given its input shape. Throws ConfigError
// when the layer cannot consume the input.
std::vector<int> output_shape(const LayerSpec& layer,
                              const std::vector<int>& in);

// Shape after the whole chain; validates composability along the way.
std::vector<int> chain_output_shape(std::span<const LayerSpec> specs,
                                    std::vector<int> in);

// The embedding network: four strided conv layers with tanh between them,
// then three fully connected layers with ReLU between them, 128 outputs.
std::vector<LayerSpec> embedding_net_spec();

// Conv/FC kernels. Inputs are channel-major; conv weights are
// [OC, IC, K, K], fc weights [units, in].
void conv_forward(const Tensor& in, const Tensor& weight, const Tensor& bias,
                  int stride, Tensor& out);
void conv_backward(const Tensor& in, const Tensor& weight, int stride,
                   const Tensor& grad_out, Tensor& grad_in,
                   Tensor& grad_weight, Tensor& grad_bias);
void fc_forward(const Tensor& in, const Tensor& weight, const Tensor& bias,
                Tensor& out);
void fc_backward(const Tensor& in, const Tensor& weight,
                 const Tensor& grad_out, Tensor& grad_in, Tensor& grad_weight,
                 Tensor& grad_bias);
void activation_forward(Activation a, const Tensor& in, Tensor& out);
void activation_backward(Activation a, const Tensor& out,
                         const Tensor& grad_out, Tensor& grad_in);

}  // namespace occ::nn
