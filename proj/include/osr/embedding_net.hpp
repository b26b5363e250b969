#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "osr/etf_geometry.hpp"
#include "osr/linalg.hpp"

namespace osr {

enum class Activation { relu, tanh };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

/// Architecture of the fully-connected embedding f: R^input_dim -> R^embed_dim.
/// Hidden layers use the configured activation; the output layer is linear.
/// hidden_dims may be empty (a single linear map).
struct NetConfig {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int embed_dim = 0;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;

  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
};

struct Layer {
  Matrix weights;            // out x in
  std::vector<double> bias;  // out
};

struct NetParams {
  std::vector<Layer> layers;
};

/// Activation record from a forward pass, consumed by backward().
struct ForwardTape {
  std::vector<Matrix> layer_inputs;     // input to each layer, B x in
  std::vector<Matrix> pre_activations;  // z of each layer, B x out
};

/// He-style deterministic init: weights ~ N(0, 2/fan_in) from the seeded
/// generator, biases zero. Identical config + seed gives identical bytes.
NetParams init(const NetConfig& config);

/// Forward pass over a batch (rows = samples). When tape is non-null it is
/// filled with the records backward() needs.
Matrix forward(const NetConfig& config, const NetParams& params, const Matrix& inputs,
               ForwardTape* tape = nullptr);

/// Backpropagates dL/dfeatures through the tape; returns NetParams-shaped
/// gradients. The tape must come from a matching forward call.
NetParams backward(const NetConfig& config, const NetParams& params,
                   const ForwardTape& tape, const Matrix& feature_grads);

NetParams zeros_like(const NetParams& params);
void accumulate(NetParams& into, const NetParams& delta);

struct TrainMeta {
  int epoch = 0;
  std::uint64_t seed = 0;
  double lambda_inter = 0.0;
  double lambda_bg = 0.0;
  double learning_rate = 0.0;
  double rms_decay = 0.0;
  double rms_epsilon = 0.0;
  bool square_margins = false;
};

/// Full training state: enough to resume or evaluate. Serialized as a tagged
/// text document with 17-significant-digit decimals (lossless round-trip).
struct Checkpoint {
  NetConfig net_config;
  NetParams net_params;
  EtfCenters centers;
  MarginSchedule margins;
  TrainMeta meta;
  NetParams rms_state;  // optimizer accumulator, NetParams-shaped
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws CheckpointVersionError on an unknown tag/version and
/// CheckpointIntegrityError on truncated or malformed content.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace osr
