#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "osr/datasets.hpp"
#include "osr/embedding_net.hpp"
#include "osr/openset_eval.hpp"
#include "osr/trainer.hpp"

namespace osr {

/// Experiment configuration with three layers of precedence: built-in
/// defaults, then values from a JSON config file, then command-line flags.
struct ExperimentConfig {
  // synthetic data
  int known = 6;
  int unknown = 2;
  int dim = 16;
  int majority = 500;
  double ir = 10.0;
  double cluster_std = 1.0;
  double separation = 10.0;
  int bg_samples = 1000;
  // network
  std::vector<int> hidden = {64, 64};
  int embed_dim = 8;
  std::string activation = "relu";
  // training
  int epochs = 100;
  int batch_size = 64;
  int batch_size_bg = 64;
  double lr = 1e-2;
  double rms_decay = 0.9;
  double rms_epsilon = 1e-8;
  double lambda_inter = 0.1;
  double lambda_bg = 0.1;
  double m_min = 35.0;
  double m_max = 55.0;
  double radius = 100.0;
  bool square_margins = false;
  std::string margin_mode = "dynamic";
  int eval_every = 10;
  // protocol
  int trials = 1;
  int seeds = 5;
  std::uint64_t seed = 0;
  std::string out = "out";

  /// Overlays values from a JSON file; unknown keys are rejected.
  void apply_file(const std::filesystem::path& path);

  /// Whole-config validation (margin bounds, embed_dim >= known - 1, ir >= 1, ...).
  void validate() const;

  SynthConfig synth_config(std::uint64_t data_seed) const;
  NetConfig net_config(std::uint64_t net_seed) const;
  TrainConfig train_config(std::uint64_t train_seed) const;

  std::string to_json_string() const;
};

struct ResultsRow {
  std::string variant;
  double acc = 0.0;
  double auroc = 0.0;
  double oscr = 0.0;
  std::string status = "ok";
};

struct ResultsTable {
  std::vector<ResultsRow> rows;
};

void write_results_csv(const ResultsTable& table, const std::filesystem::path& path);

/// Generate -> train -> evaluate, fully in memory, for one run seed. Data,
/// net-init and shuffle streams are derived from run_seed so that runs with
/// the same seed see identical data regardless of loss/margin settings.
EvalReport run_pipeline(const ExperimentConfig& cfg, std::uint64_t run_seed);

/// gen-data: synthetic CSVs + manifest under cfg.out. With cfg.trials > 1,
/// per-trial subdirectories trial_<i> with splits from make_trial_splits.
void cmd_gen_data(const ExperimentConfig& cfg);

/// train: reads train.csv (+ background.csv when lambda_bg > 0) from
/// data_dir, writes checkpoint.txt and trainlog.csv under cfg.out. With
/// cfg.trials > 1 both directories are traversed per trial.
void cmd_train(const ExperimentConfig& cfg, const std::string& data_dir);

/// eval, single model against explicit test files.
void cmd_eval_single(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                     const std::string& test_known_csv,
                     const std::string& test_unknown_csv);

/// eval over cfg.trials trial directories: data_dir/trial_<i>/ supplies the
/// test CSVs and ckpt_dir/trial_<i>/checkpoint.txt the model; writes one
/// report per trial plus report_avg.txt.
void cmd_eval_trials(const ExperimentConfig& cfg, const std::string& data_dir,
                     const std::string& ckpt_dir);

struct AblateSpec {
  enum class Kind { lambda, margin };
  Kind kind = Kind::lambda;
  std::vector<double> first;   // lambda_inter or m_min values
  std::vector<double> second;  // lambda_bg or m_max values
};

/// Full sweep grid, each cell averaged over cfg.seeds runs. A failing cell is
/// recorded in its row and does not abort the sweep. Writes results.csv and
/// one plot_<metric>.csv grid per metric.
void cmd_ablate(const ExperimentConfig& cfg, const AblateSpec& spec);

/// For each IR: trains uniform-margin and dynamic-margin models on identical
/// data and reports both rows, averaged over cfg.seeds runs.
void cmd_ir_study(const ExperimentConfig& cfg, const std::vector<double>& ir_list);

/// Full command-line surface; returns the process exit code
/// (0 success, 1 validation error, 2 runtime error).
int run_cli(const std::vector<std::string>& args);

}  // namespace osr
