#include "occ/nn/layers.hpp"
#include "occ/nn/loss.hpp"
#include "occ/nn/model.hpp"
#include "occ/nn/serialize.hpp"
#include "occ/rng.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace occ::nn {

namespace {

int conv_out_side(int in_side, int kernel, int stride) {
  if (in_side < kernel)
    throw ConfigError("conv: input side " + std::to_string(in_side) +
                      " smaller than kernel " + std::to_string(kernel));
  return (in_side - kernel) / stride + 1;
}

std::size_t flat_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

}  // namespace

std::vector<int> output_shape(const LayerSpec& layer,
                              const std::vector<int>& in) {
  switch (layer.kind) {
    case LayerSpec::Kind::conv: {
      if (in.size() != 3)
        throw ConfigError("conv: expected [C,H,W] input, got " +
                          shape_string(in));
      if (in[1] != in[2])
        throw ConfigError("conv: non-square input " + shape_string(in));
      const int side = conv_out_side(in[1], layer.kernel, layer.stride);
      return {layer.out_channels, side, side};
    }
    case LayerSpec::Kind::fully_connected:
      return {layer.units};
    case LayerSpec::Kind::activation:
      return in;
  }
  throw ConfigError("output_shape: unknown layer kind");
}

std::vector<int> chain_output_shape(std::span<const LayerSpec> specs,
                                    std::vector<int> in) {
  for (const LayerSpec& s : specs) in = output_shape(s, in);
  return in;
}

std::vector<LayerSpec> embedding_net_spec() {
  using A = Activation;
  return {
      LayerSpec::conv(5, 6, 2),  LayerSpec::act(A::tanh_act),
      LayerSpec::conv(5, 16, 2), LayerSpec::act(A::tanh_act),
      LayerSpec::conv(5, 32, 2), LayerSpec::act(A::tanh_act),
      LayerSpec::conv(5, 64, 2), LayerSpec::act(A::tanh_act),
      LayerSpec::fc(512),        LayerSpec::act(A::relu),
      LayerSpec::fc(256),        LayerSpec::act(A::relu),
      LayerSpec::fc(128),
  };
}

void conv_forward(const Tensor& in, const Tensor& weight, const Tensor& bias,
                  int stride, Tensor& out) {
  const auto& is = in.shape();
  const auto& ws = weight.shape();
  const int ic = is[0], ih = is[1], iw = is[2];
  const int oc = ws[0], k = ws[2];
  if (ws[1] != ic)
    throw ConfigError("conv: weight expects " + std::to_string(ws[1]) +
                      " input channels, image has " + std::to_string(ic));
  const int oh = conv_out_side(ih, k, stride);
  const int ow = conv_out_side(iw, k, stride);
  if (out.shape() != std::vector<int>{oc, oh, ow})
    out = Tensor({oc, oh, ow});

  const float* W = weight.data();
  const float* X = in.data();
  float* Y = out.data();
  for (int f = 0; f < oc; ++f) {
    const float b = bias[static_cast<std::size_t>(f)];
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        float acc = b;
        const int iy0 = oy * stride, ix0 = ox * stride;
        for (int c = 0; c < ic; ++c) {
          const float* xrow = X + (static_cast<std::size_t>(c) * ih + iy0) * iw + ix0;
          const float* wrow = W + ((static_cast<std::size_t>(f) * ic + c) * k) * k;
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) acc += xrow[kx] * wrow[kx];
            xrow += iw;
            wrow += k;
          }
        }
        Y[(static_cast<std::size_t>(f) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

void conv_backward(const Tensor& in, const Tensor& weight, int stride,
                   const Tensor& grad_out, Tensor& grad_in,
                   Tensor& grad_weight, Tensor& grad_bias) {
  const auto& is = in.shape();
  const auto& ws = weight.shape();
  const int ic = is[0], ih = is[1], iw = is[2];
  const int oc = ws[0], k = ws[2];
  const auto& os = grad_out.shape();
  const int oh = os[1], ow = os[2];

  if (!grad_in.same_shape(in)) grad_in = Tensor(is);
  grad_in.fill(0.0f);

  const float* X = in.data();
  const float* W = weight.data();
  const float* GO = grad_out.data();
  float* GI = grad_in.data();
  float* GW = grad_weight.data();
  float* GB = grad_bias.data();

  for (int f = 0; f < oc; ++f) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const float g = GO[(static_cast<std::size_t>(f) * oh + oy) * ow + ox];
        if (g == 0.0f) continue;
        GB[f] += g;
        const int iy0 = oy * stride, ix0 = ox * stride;
        for (int c = 0; c < ic; ++c) {
          const std::size_t xbase = (static_cast<std::size_t>(c) * ih + iy0) * iw + ix0;
          const std::size_t wbase = ((static_cast<std::size_t>(f) * ic + c) * k) * k;
          for (int ky = 0; ky < k; ++ky) {
            const float* xrow = X + xbase + static_cast<std::size_t>(ky) * iw;
            float* girow = GI + xbase + static_cast<std::size_t>(ky) * iw;
            const float* wrow = W + wbase + static_cast<std::size_t>(ky) * k;
            float* gwrow = GW + wbase + static_cast<std::size_t>(ky) * k;
            for (int kx = 0; kx < k; ++kx) {
              gwrow[kx] += xrow[kx] * g;
              girow[kx] += wrow[kx] * g;
            }
          }
        }
      }
    }
  }
}

void fc_forward(const Tensor& in, const Tensor& weight, const Tensor& bias,
                Tensor& out) {
  const int units = weight.shape()[0];
  const std::size_t n = static_cast<std::size_t>(weight.shape()[1]);
  if (in.size() != n)
    throw ConfigError("fc: weight expects input of length " +
                      std::to_string(n) + ", got " +
                      std::to_string(in.size()));
  if (out.shape() != std::vector<int>{units}) out = Tensor({units});
  const float* X = in.data();
  const float* W = weight.data();
  float* Y = out.data();
  for (int u = 0; u < units; ++u) {
    const float* wrow = W + static_cast<std::size_t>(u) * n;
    float acc = bias[static_cast<std::size_t>(u)];
    for (std::size_t i = 0; i < n; ++i) acc += wrow[i] * X[i];
    Y[u] = acc;
  }
}

void fc_backward(const Tensor& in, const Tensor& weight,
                 const Tensor& grad_out, Tensor& grad_in, Tensor& grad_weight,
                 Tensor& grad_bias) {
  const int units = weight.shape()[0];
  const std::size_t n = static_cast<std::size_t>(weight.shape()[1]);
  if (!grad_in.same_shape(in)) grad_in = Tensor(in.shape());
  grad_in.fill(0.0f);
  const float* X = in.data();
  const float* W = weight.data();
  const float* GO = grad_out.data();
  float* GI = grad_in.data();
  float* GW = grad_weight.data();
  for (int u = 0; u < units; ++u) {
    const float g = GO[u];
    grad_bias[static_cast<std::size_t>(u)] += g;
    if (g == 0.0f) continue;
    const float* wrow = W + static_cast<std::size_t>(u) * n;
    float* gwrow = GW + static_cast<std::size_t>(u) * n;
    for (std::size_t i = 0; i < n; ++i) {
      gwrow[i] += X[i] * g;
      GI[i] += wrow[i] * g;
    }
  }
}

void activation_forward(Activation a, const Tensor& in, Tensor& out) {
  if (!out.same_shape(in)) out = Tensor(in.shape());
  const float* X = in.data();
  float* Y = out.data();
  const std::size_t n = in.size();
  switch (a) {
    case Activation::tanh_act:
      for (std::size_t i = 0; i < n; ++i) Y[i] = std::tanh(X[i]);
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) Y[i] = X[i] > 0.0f ? X[i] : 0.0f;
      break;
    case Activation::none:
      std::memcpy(Y, X, n * sizeof(float));
      break;
  }
}

void activation_backward(Activation a, const Tensor& out,
                         const Tensor& grad_out, Tensor& grad_in) {
  if (!grad_in.same_shape(out)) grad_in = Tensor(out.shape());
  const float* Y = out.data();
  const float* GO = grad_out.data();
  float* GI = grad_in.data();
  const std::size_t n = out.size();
  switch (a) {
    case Activation::tanh_act:
      for (std::size_t i = 0; i < n; ++i) GI[i] = GO[i] * (1.0f - Y[i] * Y[i]);
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) GI[i] = Y[i] > 0.0f ? GO[i] : 0.0f;
      break;
    case Activation::none:
      std::memcpy(GI, GO, n * sizeof(float));
      break;
  }
}

ModelWeights init_model(std::span<const LayerSpec> specs, int input_side,
                        std::uint64_t seed) {
  if (input_side <= 0) throw ConfigError("init_model: invalid input side");
  ModelWeights model;
  model.seed = seed;
  Rng rng(mix64(seed));
  std::vector<int> shape = {3, input_side, input_side};
  for (const LayerSpec& s : specs) {
    if (s.kind == LayerSpec::Kind::conv) {
      if (shape.size() != 3)
        throw ConfigError("init_model: conv after flattened input");
      const int ic = shape[0];
      Tensor w({s.out_channels, ic, s.kernel, s.kernel});
      const float bound =
          1.0f / std::sqrt(static_cast<float>(ic * s.kernel * s.kernel));
      for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = static_cast<float>(rng.uniform(-bound, bound));
      model.params.push_back(std::move(w));
      model.params.emplace_back(std::vector<int>{s.out_channels});
    } else if (s.kind == LayerSpec::Kind::fully_connected) {
      const int in_size = static_cast<int>(flat_size(shape));
      Tensor w({s.units, in_size});
      const float bound = 1.0f / std::sqrt(static_cast<float>(in_size));
      for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = static_cast<float>(rng.uniform(-bound, bound));
      model.params.push_back(std::move(w));
      model.params.emplace_back(std::vector<int>{s.units});
    }
    shape = output_shape(s, shape);
  }
  return model;
}

namespace {

// Runs the chain storing every layer output in trace.outputs.
void run_forward(const ModelWeights& model, std::span<const LayerSpec> specs,
                 const Tensor& image, ForwardTrace& trace) {
  if (image.shape().size() != 3 || image.shape()[0] != 3)
    throw ConfigError("forward: expected [3,S,S] input, got " +
                      shape_string(image.shape()));
  for (float v : image.values())
    if (!(v >= 0.0f && v <= 1.0f))
      throw ConfigError("forward: input values outside [0,1]");

  trace.outputs.clear();
  trace.outputs.resize(specs.size());
  const Tensor* cur = &image;
  std::size_t p = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    Tensor& out = trace.outputs[i];
    switch (s.kind) {
      case LayerSpec::Kind::conv:
        if (p + 1 >= model.params.size())
          throw ConfigError("forward: model has too few parameter tensors");
        conv_forward(*cur, model.params[p], model.params[p + 1], s.stride, out);
        p += 2;
        break;
      case LayerSpec::Kind::fully_connected:
        if (p + 1 >= model.params.size())
          throw ConfigError("forward: model has too few parameter tensors");
        fc_forward(*cur, model.params[p], model.params[p + 1], out);
        p += 2;
        break;
      case LayerSpec::Kind::activation:
        activation_forward(s.activation, *cur, out);
        break;
    }
    if (!out.all_finite())
      throw NumericError("forward: non-finite activation at layer " +
                             std::to_string(i),
                         static_cast<int>(i));
    cur = &out;
  }
  if (p != model.params.size())
    throw ConfigError("forward: model parameter count does not match chain");
  if (trace.outputs.empty()) throw ConfigError("forward: empty layer chain");
}

}  // namespace

const Tensor& forward_trace(const ModelWeights& model,
                            std::span<const LayerSpec> specs,
                            const Tensor& image, ForwardTrace& trace) {
  run_forward(model, specs, image, trace);
  return trace.outputs.back();
}

std::vector<float> forward(const ModelWeights& model,
                           std::span<const LayerSpec> specs,
                           const Tensor& image) {
  ForwardTrace trace;
  run_forward(model, specs, image, trace);
  return trace.outputs.back().values();
}

void backward(const ModelWeights& model, std::span<const LayerSpec> specs,
              const Tensor& image, const ForwardTrace& trace,
              const Tensor& grad_embedding, std::vector<Tensor>& grad_params) {
  if (grad_params.size() != model.params.size())
    throw ConfigError("backward: gradient buffer shape mismatch");

  // Parameter slot offsets per layer.
  std::vector<std::size_t> slot(specs.size(), 0);
  std::size_t p = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    slot[i] = p;
    if (specs[i].has_params()) p += 2;
  }

  Tensor grad = grad_embedding;
  Tensor grad_prev;
  for (std::size_t ri = specs.size(); ri-- > 0;) {
    const LayerSpec& s = specs[ri];
    const Tensor& layer_in = ri == 0 ? image : trace.outputs[ri - 1];
    switch (s.kind) {
      case LayerSpec::Kind::conv:
        conv_backward(layer_in, model.params[slot[ri]], s.stride, grad,
                      grad_prev, grad_params[slot[ri]],
                      grad_params[slot[ri] + 1]);
        break;
      case LayerSpec::Kind::fully_connected: {
        // fc flattens its input; reuse the stored shape for grad_in.
        Tensor flat_grad;
        fc_backward(layer_in, model.params[slot[ri]], grad, flat_grad,
                    grad_params[slot[ri]], grad_params[slot[ri] + 1]);
        grad_prev = std::move(flat_grad);
        break;
      }
      case LayerSpec::Kind::activation:
        activation_backward(s.activation, trace.outputs[ri], grad, grad_prev);
        break;
    }
    if (!grad_prev.all_finite())
      throw NumericError("backward: non-finite gradient at layer " +
                             std::to_string(ri),
                         static_cast<int>(ri));
    // The fc input gradient comes back flat; restore the producer's shape.
    if (grad_prev.size() == layer_in.size() &&
        grad_prev.shape() != layer_in.shape())
      grad_prev = Tensor(layer_in.shape(), std::move(grad_prev.values()));
    grad = std::move(grad_prev);
  }
}

std::vector<Tensor> zero_like(const std::vector<Tensor>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Tensor& t : params) out.emplace_back(t.shape());
  return out;
}

void sgd_update(ModelWeights& model, const std::vector<Tensor>& grad_params,
                float learning_rate, float scale) {
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    Tensor& w = model.params[i];
    const Tensor& g = grad_params[i];
    const float step = learning_rate * scale;
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * g[j];
  }
}

float pair_loss_and_grads(const ModelWeights& model,
                          std::span<const LayerSpec> specs, const Tensor& left,
                          const Tensor& right, int label, float margin,
                          std::vector<Tensor>& grads) {
  ForwardTrace tl, tr;
  const Tensor& el = forward_trace(model, specs, left, tl);
  const Tensor& er = forward_trace(model, specs, right, tr);

  double ss = 0.0;
  for (std::size_t i = 0; i < el.size(); ++i) {
    const double diff = static_cast<double>(el[i]) - static_cast<double>(er[i]);
    ss += diff * diff;
  }
  const float d = static_cast<float>(std::sqrt(ss));
  const float loss = contrastive_loss(d, label, margin);
  const float dld = contrastive_loss_ddist(d, label, margin);

  if (dld != 0.0f && d > 0.0f) {
    Tensor gl(el.shape()), gr(er.shape());
    const float k = dld / d;
    for (std::size_t i = 0; i < el.size(); ++i) {
      const float g = k * (el[i] - er[i]);
      gl[i] = g;
      gr[i] = -g;
    }
    backward(model, specs, left, tl, gl, grads);
    backward(model, specs, right, tr, gr, grads);
  }
  return loss;
}

float train_step(ModelWeights& model, std::span<const LayerSpec> specs,
                 const Tensor& left, const Tensor& right, int label,
                 const TrainingConfig& cfg) {
  cfg.validate();
  std::vector<Tensor> grads = zero_like(model.params);
  const float loss =
      pair_loss_and_grads(model, specs, left, right, label, cfg.margin, grads);
  sgd_update(model, grads, cfg.learning_rate);
  return loss;
}

// --- serialization ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'C', '2', 'W'};

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw FormatError("weight file: truncated");
  const auto b = [&](int i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i]));
  };
  const std::uint32_t v = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
  pos += 4;
  return v;
}

}  // namespace

void save_weights(const ModelWeights& model, const std::string& path) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, model.version);
  put_u32(buf, static_cast<std::uint32_t>(model.params.size()));
  for (const Tensor& t : model.params) {
    put_u32(buf, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint32_t bits;
      const float v = t[i];
      std::memcpy(&bits, &v, 4);
      put_u32(buf, bits);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("weight file: cannot open for write: " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw FormatError("weight file: short write: " + path);
}

ModelWeights load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("weight file: cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw FormatError("weight file: bad magic");
  pos = 4;
  ModelWeights model;
  model.version = get_u32(buf, pos);
  if (model.version != 1)
    throw FormatError("weight file: unsupported version " +
                      std::to_string(model.version));
  const std::uint32_t count = get_u32(buf, pos);
  model.params.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t rank = get_u32(buf, pos);
    if (rank == 0 || rank > 8) throw FormatError("weight file: bad rank");
    std::vector<int> shape(rank);
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint32_t d = get_u32(buf, pos);
      if (d == 0 || d > (1u << 24)) throw FormatError("weight file: bad dim");
      shape[r] = static_cast<int>(d);
      n *= d;
    }
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bits = get_u32(buf, pos);
      std::memcpy(&data[i], &bits, 4);
    }
    model.params.emplace_back(std::move(shape), std::move(data));
  }
  if (pos != buf.size()) throw FormatError("weight file: trailing bytes");
  return model;
}

}  // namespace occ::nn
