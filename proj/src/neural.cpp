#include "curriq/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "curriq/errors.hpp"

namespace curriq {

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw ShapeError("mlp needs at least input and output dims");
  for (int d : dims) {
    if (d <= 0) throw ShapeError("mlp layer dims must be positive");
  }
}

}  // namespace

Mlp make_mlp(const std::vector<int>& layer_dims, Rng& rng) {
  check_dims(layer_dims);
  Mlp net;
  net.layer_dims = layer_dims;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& v : w) v = rng.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

void mlp_forward_trace(const Mlp& net, std::span<const double> input, MlpTrace& trace) {
  if (static_cast<int>(input.size()) != net.input_dim()) {
    throw ShapeError("mlp_forward: input length does not match net input dim");
  }
  const int layers = net.num_layers();
  trace.acts.resize(layers + 1);
  trace.acts[0].assign(input.begin(), input.end());
  for (int l = 0; l < layers; ++l) {
    const int rows = net.layer_dims[l + 1];
    const int cols = net.layer_dims[l];
    const std::vector<double>& prev = trace.acts[l];
    std::vector<double>& out = trace.acts[l + 1];
    out.assign(static_cast<std::size_t>(rows), 0.0);
    const double* w = net.weights[l].data();
    for (int r = 0; r < rows; ++r) {
      double sum = net.biases[l][r];
      const double* row = w + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) sum += row[c] * prev[c];
      out[r] = (l + 1 < layers) ? std::tanh(sum) : sum;
    }
  }
}

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input) {
  MlpTrace trace;
  mlp_forward_trace(net, input, trace);
  return std::move(trace.acts.back());
}

void MlpGrads::clear() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

MlpGrads zero_grads(const Mlp& net) {
  MlpGrads g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.emplace_back(net.weights[l].size(), 0.0);
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

std::vector<double> mlp_backward_trace(const Mlp& net, const MlpTrace& trace,
                                       std::span<const double> output_grad, MlpGrads& grads) {
  const int layers = net.num_layers();
  if (static_cast<int>(output_grad.size()) != net.output_dim()) {
    throw ShapeError("mlp_backward: output_grad length does not match net output dim");
  }
  std::vector<double> delta(output_grad.begin(), output_grad.end());
  for (int l = layers - 1; l >= 0; --l) {
    const int rows = net.layer_dims[l + 1];
    const int cols = net.layer_dims[l];
    const std::vector<double>& below = trace.acts[l];
    double* gw = grads.weights[l].data();
    for (int r = 0; r < rows; ++r) {
      grads.biases[l][r] += delta[r];
      double* grow = gw + static_cast<std::size_t>(r) * cols;
      const double d = delta[r];
      for (int c = 0; c < cols; ++c) grow[c] += d * below[c];
    }
    std::vector<double> prev_delta(static_cast<std::size_t>(cols), 0.0);
    const double* w = net.weights[l].data();
    for (int r = 0; r < rows; ++r) {
      const double d = delta[r];
      const double* row = w + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) prev_delta[c] += row[c] * d;
    }
    if (l > 0) {
      // tanh'(z) expressed through the activation a: 1 - a^2
      for (int c = 0; c < cols; ++c) {
        const double a = below[c];
        prev_delta[c] *= 1.0 - a * a;
      }
    }
    delta = std::move(prev_delta);
  }
  return delta;
}

std::vector<double> mlp_backward(const Mlp& net, std::span<const double> input,
                                 std::span<const double> output_grad, MlpGrads& grads) {
  MlpTrace trace;
  mlp_forward_trace(net, input, trace);
  return mlp_backward_trace(net, trace, output_grad, grads);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

SoftmaxXent softmax_xent(std::span<const double> logits, int target_index) {
  if (target_index < 0 || target_index >= static_cast<int>(logits.size())) {
    throw ShapeError("softmax_xent: target index out of range");
  }
  SoftmaxXent out;
  out.logit_grads = softmax(logits);
  out.loss = -std::log(std::max(out.logit_grads[target_index], kProbFloor));
  out.logit_grads[target_index] -= 1.0;
  return out;
}

double token_log_prob(std::span<const double> logits, int target_index) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double log_p = logits[target_index] - mx - std::log(z);
  return std::max(log_p, std::log(kProbFloor));
}

void rmsprop_apply(const RmsPropConfig& config, std::vector<double>& acc,
                   std::vector<double>& params, const std::vector<double>& grads) {
  if (acc.size() != params.size() || grads.size() != params.size()) {
    throw ShapeError("rmsprop_apply: mismatched tensor sizes");
  }
  const double keep = config.decay;
  const double mix = 1.0 - config.decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    acc[i] = keep * acc[i] + mix * g * g;
    params[i] -= config.learning_rate * g / std::sqrt(acc[i] + config.epsilon_stab);
  }
}

RmsPropState make_rmsprop(const RmsPropConfig& config, const Mlp& net) {
  return RmsPropState{config, zero_grads(net)};
}

void rmsprop_step(RmsPropState& state, Mlp& net, const MlpGrads& grads) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    rmsprop_apply(state.config, state.acc.weights[l], net.weights[l], grads.weights[l]);
    rmsprop_apply(state.config, state.acc.biases[l], net.biases[l], grads.biases[l]);
  }
}

namespace {

void write_f64_le(std::ostream& os, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  os.write(bytes, 8);
}

double read_f64_le(std::istream& is) {
  char bytes[8];
  is.read(bytes, 8);
  if (!is) throw DataError("checkpoint: truncated tensor data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_tensors(const std::string& path, const std::string& header_json,
                  const std::vector<const std::vector<double>*>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open for writing: " + path);
  os << header_json << '\n';
  for (const auto* t : tensors) {
    for (double v : *t) write_f64_le(os, v);
  }
  if (!os) throw DataError("checkpoint: write failed: " + path);
}

LoadedTensors load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open: " + path);
  LoadedTensors out;
  if (!std::getline(is, out.header_json)) throw DataError("checkpoint: missing header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(out.header_json);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad header json: ") + e.what());
  }
  if (!header.contains("tensor_sizes")) throw DataError("checkpoint: header lacks tensor_sizes");
  for (const auto& sz : header.at("tensor_sizes")) {
    std::vector<double> t(sz.get<std::size_t>());
    for (double& v : t) v = read_f64_le(is);
    out.tensors.push_back(std::move(t));
  }
  return out;
}

void save_mlp(const std::string& path, const Mlp& net) {
  nlohmann::json header;
  header["format"] = "curriq-ckpt-v1";
  header["layer_dims"] = net.layer_dims;
  std::vector<std::size_t> sizes;
  std::vector<const std::vector<double>*> tensors;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    sizes.push_back(net.weights[l].size());
    tensors.push_back(&net.weights[l]);
    sizes.push_back(net.biases[l].size());
    tensors.push_back(&net.biases[l]);
  }
  header["tensor_sizes"] = sizes;
  save_tensors(path, header.dump(), tensors);
}

Mlp load_mlp(const std::string& path) {
  LoadedTensors loaded = load_tensors(path);
  const nlohmann::json header = nlohmann::json::parse(loaded.header_json);
  Mlp net;
  net.layer_dims = header.at("layer_dims").get<std::vector<int>>();
  check_dims(net.layer_dims);
  const std::size_t layers = net.layer_dims.size() - 1;
  if (loaded.tensors.size() != 2 * layers) throw DataError("checkpoint: tensor count mismatch");
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t rows = static_cast<std::size_t>(net.layer_dims[l + 1]);
    const std::size_t cols = static_cast<std::size_t>(net.layer_dims[l]);
    if (loaded.tensors[2 * l].size() != rows * cols || loaded.tensors[2 * l + 1].size() != rows) {
      throw DataError("checkpoint: tensor shape mismatch");
    }
    net.weights.push_back(std::move(loaded.tensors[2 * l]));
    net.biases.push_back(std::move(loaded.tensors[2 * l + 1]));
  }
  return net;
}

}  // namespace curriq
