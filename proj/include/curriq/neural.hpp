#pragma once

#include <span>
#include <string>
#include <vector>

#include "curriq/rng.hpp"

namespace curriq {

// Fully-connected net: tanh on hidden layers, identity on the output layer.
// weights[l] is row-major with shape layer_dims[l+1] x layer_dims[l].
struct Mlp {
  std::vector<int> layer_dims;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
};

// Uniform init in +/-sqrt(6/(fan_in+fan_out)), zero biases.
Mlp make_mlp(const std::vector<int>& layer_dims, Rng& rng);

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input);

// Per-layer post-activation values; acts[0] is the input, acts.back() the output.
struct MlpTrace {
  std::vector<std::vector<double>> acts;
};

void mlp_forward_trace(const Mlp& net, std::span<const double> input, MlpTrace& trace);

struct MlpGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  void clear();
};

MlpGrads zero_grads(const Mlp& net);

// Accumulates d(output . output_grad)/d(params) into grads and returns the
// gradient with respect to the input.
std::vector<double> mlp_backward(const Mlp& net, std::span<const double> input,
                                 std::span<const double> output_grad, MlpGrads& grads);

// Same, reusing a caller-held trace of the forward pass.
std::vector<double> mlp_backward_trace(const Mlp& net, const MlpTrace& trace,
                                       std::span<const double> output_grad, MlpGrads& grads);

struct SoftmaxXent {
  double loss = 0.0;
  std::vector<double> logit_grads;
};

// Max-shifted cross entropy; probabilities floored at 1e-12 before the log.
SoftmaxXent softmax_xent(std::span<const double> logits, int target_index);

std::vector<double> softmax(std::span<const double> logits);

// log p(target | logits), floored so the result is always finite.
double token_log_prob(std::span<const double> logits, int target_index);

constexpr double kProbFloor = 1e-12;

struct RmsPropConfig {
  double learning_rate = 0.00025;
  double decay = 0.95;
  double epsilon_stab = 1e-10;
};

// acc <- decay*acc + (1-decay)*g^2 ; param <- param - lr*g/sqrt(acc + eps)
void rmsprop_apply(const RmsPropConfig& config, std::vector<double>& acc,
                   std::vector<double>& params, const std::vector<double>& grads);

// RMSProp state for a whole Mlp, one accumulator per parameter tensor.
struct RmsPropState {
  RmsPropConfig config;
  MlpGrads acc;
};

RmsPropState make_rmsprop(const RmsPropConfig& config, const Mlp& net);

void rmsprop_step(RmsPropState& state, Mlp& net, const MlpGrads& grads);

// Checkpoints: one JSON header line, then the tensors as little-endian 64-bit
// floats. Round-trips bit-exactly.
void save_tensors(const std::string& path, const std::string& header_json,
                  const std::vector<const std::vector<double>*>& tensors);

struct LoadedTensors {
  std::string header_json;
  std::vector<std::vector<double>> tensors;
};

LoadedTensors load_tensors(const std::string& path);

void save_mlp(const std::string& path, const Mlp& net);
Mlp load_mlp(const std::string& path);

}  // namespace curriq
