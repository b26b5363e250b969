#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "osr/datasets.hpp"
#include "osr/embedding_net.hpp"
#include "osr/etf_geometry.hpp"

namespace osr {

enum class MarginMode { dynamic, uniform };

MarginMode margin_mode_from_string(const std::string& name);
std::string to_string(MarginMode mode);

struct TrainConfig {
  int epochs = 100;
  int batch_size_known = 64;
  int batch_size_bg = 64;
  double learning_rate = 1e-2;
  double rms_decay = 0.9;
  double rms_epsilon = 1e-8;
  double lambda_inter = 0.1;
  double lambda_bg = 0.1;
  double m_min = 35.0;
  double m_max = 55.0;
  double radius = 100.0;
  std::uint64_t seed = 0;
  int eval_every = 1;            // train-accuracy cadence, in epochs
  bool square_margins = false;   // square schedule values before the hinges
  MarginMode margin_mode = MarginMode::dynamic;

  /// Throws ValidationError on any invalid field (including Eq-8-style
  /// margin bounds via check_margin_constraint).
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double intra = 0.0;
  double inter = 0.0;
  double bg = 0.0;
  double total = 0.0;
  double train_acc = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> records;
};

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path);

/// One RMSprop update, elementwise over all parameters:
///   state' = decay * state + (1 - decay) * grad^2
///   param' = param - lr * grad / (sqrt(state') + epsilon)
void rmsprop_step(NetParams& params, const NetParams& grads, NetParams& state,
                  double learning_rate, double decay, double epsilon);

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

/// Mini-batch training of the embedding against fixed simplex centers.
/// Margins are frozen from the training class counts before the first epoch.
/// Each epoch reshuffles the known data; when lambda_bg > 0 every known batch
/// is paired with a background batch cycled with independent shuffling.
/// Passing resume_from continues a previous run (params, optimizer state and
/// epoch counter are restored; config.epochs is the final target).
TrainResult train(const LabeledDataset& train_data, const LabeledDataset* bg_data,
                  const NetConfig& net_config, const TrainConfig& config,
                  const Checkpoint* resume_from = nullptr);

}  // namespace osr
