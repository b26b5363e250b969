#include "osr/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <json.hpp>

#include "osr/errors.hpp"
#include "osr/losses.hpp"
#include "osr/rng.hpp"
#include "osr/textio.hpp"

namespace osr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Substream tags for deriving data/net/shuffle seeds from one run seed.
constexpr std::uint64_t kDataStream = 0xD5;
constexpr std::uint64_t kNetStream = 0x9E;
constexpr std::uint64_t kTrainStream = 0x7A;
constexpr std::uint64_t kSplitStream = 0x51;

std::string timestamp_utc() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string fmt_metric(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string sanitize_csv_field(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

void ExperimentConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError("config file " + path.string() + ": " + e.what());
  }
  if (!j.is_object())
    throw ValidationError("config file " + path.string() +
                          ": top level must be a JSON object");

  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "known") known = value.get<int>();
      else if (key == "unknown") unknown = value.get<int>();
      else if (key == "dim") dim = value.get<int>();
      else if (key == "majority") majority = value.get<int>();
      else if (key == "ir") ir = value.get<double>();
      else if (key == "cluster_std") cluster_std = value.get<double>();
      else if (key == "separation") separation = value.get<double>();
      else if (key == "bg_samples") bg_samples = value.get<int>();
      else if (key == "hidden") hidden = value.get<std::vector<int>>();
      else if (key == "embed_dim") embed_dim = value.get<int>();
      else if (key == "activation") activation = value.get<std::string>();
      else if (key == "epochs") epochs = value.get<int>();
      else if (key == "batch_size") batch_size = value.get<int>();
      else if (key == "batch_size_bg") batch_size_bg = value.get<int>();
      else if (key == "lr") lr = value.get<double>();
      else if (key == "rms_decay") rms_decay = value.get<double>();
      else if (key == "rms_epsilon") rms_epsilon = value.get<double>();
      else if (key == "lambda_inter") lambda_inter = value.get<double>();
      else if (key == "lambda_bg") lambda_bg = value.get<double>();
      else if (key == "m_min") m_min = value.get<double>();
      else if (key == "m_max") m_max = value.get<double>();
      else if (key == "radius") radius = value.get<double>();
      else if (key == "square_margins") square_margins = value.get<bool>();
      else if (key == "margin_mode") margin_mode = value.get<std::string>();
      else if (key == "eval_every") eval_every = value.get<int>();
      else if (key == "trials") trials = value.get<int>();
      else if (key == "seeds") seeds = value.get<int>();
      else if (key == "seed") seed = value.get<std::uint64_t>();
      else if (key == "out") out = value.get<std::string>();
      else
        throw ValidationError("config file " + path.string() +
                              ": unknown key '" + key + "'");
    } catch (const json::exception& e) {
      throw ValidationError("config file " + path.string() + ": key '" + key +
                            "': " + e.what());
    }
  }
}

void ExperimentConfig::validate() const {
  if (known < 2) throw ValidationError("config: known must be >= 2");
  if (unknown < 1) throw ValidationError("config: unknown must be >= 1");
  if (dim < 2) throw ValidationError("config: dim must be >= 2");
  if (majority < 1) throw ValidationError("config: majority must be >= 1");
  if (ir < 1.0)
    throw ValidationError("config: ir must be >= 1, got " + format_g6(ir));
  if (cluster_std <= 0.0) throw ValidationError("config: cluster_std must be > 0");
  if (separation <= 0.0) throw ValidationError("config: separation must be > 0");
  if (bg_samples < 0) throw ValidationError("config: bg_samples must be >= 0");
  if (embed_dim < known - 1)
    throw ValidationError("config: embed_dim (" + std::to_string(embed_dim) +
                          ") must be >= known - 1 (" + std::to_string(known - 1) +
                          ")");
  for (int h : hidden)
    if (h < 1) throw ValidationError("config: hidden dims must be >= 1");
  activation_from_string(activation);
  margin_mode_from_string(margin_mode);
  if (trials < 1) throw ValidationError("config: trials must be >= 1");
  if (seeds < 1) throw ValidationError("config: seeds must be >= 1");
  train_config(0).validate();
}

SynthConfig ExperimentConfig::synth_config(std::uint64_t data_seed) const {
  SynthConfig sc;
  sc.num_known = known;
  sc.num_unknown = unknown;
  sc.input_dim = dim;
  sc.samples_per_majority_class = majority;
  sc.imbalance_ratio = ir;
  sc.cluster_std = cluster_std;
  sc.center_separation = separation;
  sc.bg_samples = bg_samples;
  sc.seed = data_seed;
  return sc;
}

NetConfig ExperimentConfig::net_config(std::uint64_t net_seed) const {
  NetConfig nc;
  nc.input_dim = dim;
  nc.hidden_dims = hidden;
  nc.embed_dim = embed_dim;
  nc.activation = activation_from_string(activation);
  nc.seed = net_seed;
  return nc;
}

TrainConfig ExperimentConfig::train_config(std::uint64_t train_seed) const {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size_known = batch_size;
  tc.batch_size_bg = batch_size_bg;
  tc.learning_rate = lr;
  tc.rms_decay = rms_decay;
  tc.rms_epsilon = rms_epsilon;
  tc.lambda_inter = lambda_inter;
  tc.lambda_bg = lambda_bg;
  tc.m_min = m_min;
  tc.m_max = m_max;
  tc.radius = radius;
  tc.seed = train_seed;
  tc.eval_every = eval_every;
  tc.square_margins = square_margins;
  tc.margin_mode = margin_mode_from_string(margin_mode);
  return tc;
}

std::string ExperimentConfig::to_json_string() const {
  json j;
  j["known"] = known;
  j["unknown"] = unknown;
  j["dim"] = dim;
  j["majority"] = majority;
  j["ir"] = ir;
  j["cluster_std"] = cluster_std;
  j["separation"] = separation;
  j["bg_samples"] = bg_samples;
  j["hidden"] = hidden;
  j["embed_dim"] = embed_dim;
  j["activation"] = activation;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["batch_size_bg"] = batch_size_bg;
  j["lr"] = lr;
  j["rms_decay"] = rms_decay;
  j["rms_epsilon"] = rms_epsilon;
  j["lambda_inter"] = lambda_inter;
  j["lambda_bg"] = lambda_bg;
  j["m_min"] = m_min;
  j["m_max"] = m_max;
  j["radius"] = radius;
  j["square_margins"] = square_margins;
  j["margin_mode"] = margin_mode;
  j["eval_every"] = eval_every;
  j["trials"] = trials;
  j["seeds"] = seeds;
  j["seed"] = seed;
  j["out"] = out;
  return j.dump(2) + "\n";
}

void write_results_csv(const ResultsTable& table, const std::filesystem::path& path) {
  std::string out = "variant,acc,auroc,oscr,status\n";
  for (const ResultsRow& row : table.rows) {
    out += sanitize_csv_field(row.variant);
    out += ',' + fmt_metric(row.acc);
    out += ',' + fmt_metric(row.auroc);
    out += ',' + fmt_metric(row.oscr);
    out += ',' + sanitize_csv_field(row.status);
    out += '\n';
  }
  write_file_atomic(path, out);
}

EvalReport run_pipeline(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  cfg.validate();
  const SynthData data =
      generate_synthetic(cfg.synth_config(derive_seed(run_seed, kDataStream)));
  const NetConfig nc = cfg.net_config(derive_seed(run_seed, kNetStream));
  const TrainConfig tc = cfg.train_config(derive_seed(run_seed, kTrainStream));
  const TrainResult tr = train(data.train,
                               cfg.lambda_bg > 0.0 ? &data.background : nullptr,
                               nc, tc);
  return evaluate_trial(tr.checkpoint, data.test_known, data.test_unknown);
}

namespace {

void write_synth_dir(const SynthData& data, const fs::path& dir) {
  write_csv(data.train, dir / "train.csv");
  write_csv(data.test_known, dir / "test_known.csv");
  write_csv(data.test_unknown, dir / "test_unknown.csv");
  write_csv(data.background, dir / "background.csv");
}

}  // namespace

void cmd_gen_data(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path out_dir = cfg.out;
  const std::uint64_t data_seed = derive_seed(cfg.seed, kDataStream);

  json manifest;
  manifest["command"] = "gen-data";
  manifest["created_utc"] = timestamp_utc();
  manifest["config"] = json::parse(cfg.to_json_string());

  if (cfg.trials == 1) {
    write_synth_dir(generate_synthetic(cfg.synth_config(data_seed)), out_dir);
  } else {
    const std::vector<TrialSplit> splits =
        make_trial_splits(cfg.known + cfg.unknown, cfg.known, cfg.trials,
                          derive_seed(cfg.seed, kSplitStream));
    json splits_json = json::array();
    for (const TrialSplit& split : splits) {
      write_synth_dir(
          generate_synthetic_for_split(cfg.synth_config(data_seed), split),
          out_dir / ("trial_" + std::to_string(split.trial_index)));
      json s;
      s["trial"] = split.trial_index;
      s["known_class_ids"] = split.known_class_ids;
      s["unknown_class_ids"] = split.unknown_class_ids;
      splits_json.push_back(s);
    }
    manifest["trial_splits"] = splits_json;
  }
  write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote dataset to " << out_dir.string() << "\n";
}

namespace {

void train_one_dir(const ExperimentConfig& cfg, const fs::path& data_dir,
                   const fs::path& out_dir) {
  const fs::path train_csv = data_dir / "train.csv";
  if (!fs::exists(train_csv))
    throw std::runtime_error("training data not found: " + train_csv.string());
  const LabeledDataset train_data = read_csv(train_csv, DatasetRole::known_train);

  LabeledDataset bg_data;
  const bool use_bg = cfg.lambda_bg > 0.0;
  if (use_bg) {
    const fs::path bg_csv = data_dir / "background.csv";
    if (!fs::exists(bg_csv))
      throw ValidationError("lambda_bg > 0 requires a background dataset, but " +
                            bg_csv.string() + " does not exist");
    bg_data = read_csv(bg_csv, DatasetRole::background);
  }

  NetConfig nc = cfg.net_config(derive_seed(cfg.seed, kNetStream));
  nc.input_dim = static_cast<int>(train_data.features.cols);
  const TrainConfig tc = cfg.train_config(derive_seed(cfg.seed, kTrainStream));

  const TrainResult result = train(train_data, use_bg ? &bg_data : nullptr, nc, tc);
  save_checkpoint(result.checkpoint, out_dir / "checkpoint.txt");
  write_train_log_csv(result.log, out_dir / "trainlog.csv");

  const EpochRecord& last = result.log.records.back();
  std::cout << "trained " << result.log.records.size() << " epochs, final total "
            << fmt_metric(last.total) << ", train acc " << fmt_metric(last.train_acc)
            << " -> " << (out_dir / "checkpoint.txt").string() << "\n";
}

}  // namespace

void cmd_train(const ExperimentConfig& cfg, const std::string& data_dir) {
  cfg.validate();
  if (data_dir.empty())
    throw ValidationError("train requires --data <dir> with the dataset CSVs");
  if (cfg.trials == 1) {
    train_one_dir(cfg, data_dir, cfg.out);
    return;
  }
  for (int t = 0; t < cfg.trials; ++t) {
    const std::string sub = "trial_" + std::to_string(t);
    train_one_dir(cfg, fs::path(data_dir) / sub, fs::path(cfg.out) / sub);
  }
}

void cmd_eval_single(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                     const std::string& test_known_csv,
                     const std::string& test_unknown_csv) {
  cfg.validate();
  if (!fs::exists(checkpoint_path))
    throw std::runtime_error("checkpoint file not found: " + checkpoint_path);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const LabeledDataset known = read_csv(test_known_csv, DatasetRole::known_test);
  const LabeledDataset unknown = read_csv(test_unknown_csv, DatasetRole::unknown_test);
  const EvalReport report = evaluate_trial(ckpt, known, unknown);
  const fs::path out_dir = cfg.out;
  write_report(report, out_dir / "report.txt");
  write_curve_csv(report.ccr_fpr_curve, out_dir / "curve.csv");
  std::cout << "acc " << fmt_metric(report.acc) << ", auroc "
            << fmt_metric(report.auroc) << ", oscr " << fmt_metric(report.oscr)
            << " -> " << (out_dir / "report.txt").string() << "\n";
}

void cmd_eval_trials(const ExperimentConfig& cfg, const std::string& data_dir,
                     const std::string& ckpt_dir) {
  cfg.validate();
  if (data_dir.empty() || ckpt_dir.empty())
    throw ValidationError("eval with --trials > 1 requires --data and --ckpt-dir");
  const fs::path out_dir = cfg.out;
  std::vector<EvalReport> reports;
  for (int t = 0; t < cfg.trials; ++t) {
    const std::string sub = "trial_" + std::to_string(t);
    const fs::path ckpt_path = fs::path(ckpt_dir) / sub / "checkpoint.txt";
    if (!fs::exists(ckpt_path))
      throw std::runtime_error("checkpoint file not found: " + ckpt_path.string());
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const LabeledDataset known =
        read_csv(fs::path(data_dir) / sub / "test_known.csv", DatasetRole::known_test);
    const LabeledDataset unknown = read_csv(fs::path(data_dir) / sub / "test_unknown.csv",
                                            DatasetRole::unknown_test);
    const EvalReport report = evaluate_trial(ckpt, known, unknown);
    write_report(report, out_dir / ("report_trial_" + std::to_string(t) + ".txt"));
    write_curve_csv(report.ccr_fpr_curve,
                    out_dir / ("curve_trial_" + std::to_string(t) + ".csv"));
    reports.push_back(report);
  }
  const EvalReport avg = average_reports(reports);
  write_report(avg, out_dir / "report_avg.txt");
  std::cout << "averaged " << reports.size() << " trials: acc "
            << fmt_metric(avg.acc) << ", auroc " << fmt_metric(avg.auroc)
            << ", oscr " << fmt_metric(avg.oscr) << "\n";
}

namespace {

ResultsRow run_cell(const ExperimentConfig& cell, const std::string& variant) {
  ResultsRow row;
  row.variant = variant;
  row.acc = row.auroc = row.oscr = std::numeric_limits<double>::quiet_NaN();
  try {
    cell.validate();
    std::vector<EvalReport> reports;
    reports.reserve(static_cast<std::size_t>(cell.seeds));
    for (int r = 0; r < cell.seeds; ++r)
      reports.push_back(run_pipeline(cell, cell.seed + static_cast<std::uint64_t>(r)));
    const EvalReport avg = average_reports(reports);
    row.acc = avg.acc;
    row.auroc = avg.auroc;
    row.oscr = avg.oscr;
    row.status = "ok";
  } catch (const ValidationError& e) {
    row.status = std::string("invalid: ") + e.what();
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
  }
  std::cout << row.variant << ": acc " << fmt_metric(row.acc) << ", auroc "
            << fmt_metric(row.auroc) << ", oscr " << fmt_metric(row.oscr) << " ["
            << row.status << "]\n";
  return row;
}

void write_plot_grids(const ResultsTable& table, const std::vector<double>& first,
                      const std::vector<double>& second, const std::string& first_name,
                      const std::string& second_name, const fs::path& out_dir) {
  const char* metrics[] = {"acc", "auroc", "oscr"};
  for (int m = 0; m < 3; ++m) {
    std::string out = first_name + "/" + second_name;
    for (double b : second) out += ',' + format_g6(b);
    out += '\n';
    std::size_t idx = 0;
    for (double a : first) {
      out += format_g6(a);
      for (std::size_t j = 0; j < second.size(); ++j, ++idx) {
        const ResultsRow& row = table.rows[idx];
        const double v = m == 0 ? row.acc : (m == 1 ? row.auroc : row.oscr);
        out += ',' + fmt_metric(v);
      }
      out += '\n';
    }
    write_file_atomic(out_dir / ("plot_" + std::string(metrics[m]) + ".csv"), out);
  }
}

}  // namespace

void cmd_ablate(const ExperimentConfig& cfg, const AblateSpec& spec) {
  if (spec.first.empty() || spec.second.empty())
    throw ValidationError("ablate: sweep lists must be non-empty");
  const bool is_lambda = spec.kind == AblateSpec::Kind::lambda;
  const std::string first_name = is_lambda ? "lambda_inter" : "m_min";
  const std::string second_name = is_lambda ? "lambda_bg" : "m_max";

  ResultsTable table;
  for (double a : spec.first) {
    for (double b : spec.second) {
      ExperimentConfig cell = cfg;
      if (is_lambda) {
        cell.lambda_inter = a;
        cell.lambda_bg = b;
      } else {
        cell.m_min = a;
        cell.m_max = b;
      }
      const std::string variant =
          first_name + "=" + format_g6(a) + ";" + second_name + "=" + format_g6(b);
      table.rows.push_back(run_cell(cell, variant));
    }
  }
  const fs::path out_dir = cfg.out;
  write_results_csv(table, out_dir / "results.csv");
  write_plot_grids(table, spec.first, spec.second, first_name, second_name, out_dir);
  std::cout << "wrote " << (out_dir / "results.csv").string() << "\n";
}

void cmd_ir_study(const ExperimentConfig& cfg, const std::vector<double>& ir_list) {
  if (ir_list.empty()) throw ValidationError("ir-study: --ir-list must be non-empty");

  ResultsTable table;
  for (double ir : ir_list) {
    for (const char* mode : {"uniform", "dynamic"}) {
      ExperimentConfig cell = cfg;
      cell.ir = ir;
      cell.margin_mode = mode;
      const std::string variant =
          "ir=" + format_g6(ir) + ";margin=" + std::string(mode);
      table.rows.push_back(run_cell(cell, variant));
    }
  }
  const fs::path out_dir = cfg.out;
  write_results_csv(table, out_dir / "results.csv");
  std::cout << "wrote " << (out_dir / "results.csv").string() << "\n";
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

namespace {

// Records flag assignments during parsing so they can be applied on top of
// defaults + config file, preserving flag > file > default precedence.
class FlagRecorder {
 public:
  template <typename T>
  std::function<void(const T&)> set(T ExperimentConfig::* field) {
    return [this, field](const T& v) {
      setters_.push_back([field, v](ExperimentConfig& c) { c.*field = v; });
    };
  }

  void set_flag_true(bool ExperimentConfig::* field) {
    setters_.push_back([field](ExperimentConfig& c) { c.*field = true; });
  }

  void apply(ExperimentConfig& cfg) const {
    for (const auto& s : setters_) s(cfg);
  }

 private:
  std::vector<std::function<void(ExperimentConfig&)>> setters_;
};

void add_config_flags(CLI::App* cmd, FlagRecorder& rec, std::string& config_path) {
  cmd->add_option("--config", config_path, "JSON config file (flags override it)")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--known", rec.set(&ExperimentConfig::known),
                                "number of known classes")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--unknown", rec.set(&ExperimentConfig::unknown),
                                "number of unknown classes")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--dim", rec.set(&ExperimentConfig::dim),
                                "input feature dimension")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--majority", rec.set(&ExperimentConfig::majority),
                                "samples in the majority class")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<double>("--ir", rec.set(&ExperimentConfig::ir),
                                   "imbalance ratio (majority/minority, >= 1)")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<double>("--cluster-std",
                                   rec.set(&ExperimentConfig::cluster_std),
                                   "per-class Gaussian std")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<double>("--separation",
                                   rec.set(&ExperimentConfig::separation),
                                   "radius of the class-center sphere")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--bg-samples", rec.set(&ExperimentConfig::bg_samples),
                                "background sample count")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<std::vector<int>>(
         "--hidden", rec.set(&ExperimentConfig::hidden), "hidden layer sizes")
      ->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--embed-dim", rec.set(&ExperimentConfig::embed_dim),
                                "embedding dimension (>= known - 1)")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<std::string>("--activation",
                                        rec.set(&ExperimentConfig::activation),
                                        "relu or tanh")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--epochs", rec.set(&ExperimentConfig::epochs),
                                "training epochs")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--batch-size", rec.set(&ExperimentConfig::batch_size),
                                "known batch size")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--batch-size-bg",
                                rec.set(&ExperimentConfig::batch_size_bg),
                                "background batch size")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<double>("--lr", rec.set(&ExperimentConfig::lr),
                                   "RMSprop learning rate")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<double>("--rms-decay", rec.set(&ExperimentConfig::rms_decay),
                                   "RMSprop decay")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<double>("--rms-epsilon",
                                   rec.set(&ExperimentConfig::rms_epsilon),
                                   "RMSprop epsilon")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<double>("--lambda-inter",
                                   rec.set(&ExperimentConfig::lambda_inter),
                                   "inter-class loss weight")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<double>("--lambda-bg", rec.set(&ExperimentConfig::lambda_bg),
                                   "background loss weight")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<double>("--m-min", rec.set(&ExperimentConfig::m_min),
                                   "minimum margin")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<double>("--m-max", rec.set(&ExperimentConfig::m_max),
                                   "maximum margin (< radius/sqrt(2))")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<double>("--radius", rec.set(&ExperimentConfig::radius),
                                   "hypersphere radius for class centers")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_flag_function("--square-margins",
                         [&rec](std::int64_t count) {
                           if (count > 0)
                             rec.set_flag_true(&ExperimentConfig::square_margins);
                         },
                         "square schedule margins before the hinges");
  cmd->add_option_function<std::string>("--margin-mode",
                                        rec.set(&ExperimentConfig::margin_mode),
                                        "dynamic or uniform")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--eval-every", rec.set(&ExperimentConfig::eval_every),
                                "train-accuracy cadence in epochs")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--trials", rec.set(&ExperimentConfig::trials),
                                "number of open-set trials")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<int>("--seeds", rec.set(&ExperimentConfig::seeds),
                                "runs per configuration (seeds base..base+n-1)")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<std::uint64_t>("--seed", rec.set(&ExperimentConfig::seed),
                                          "base seed")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option_function<std::string>("--out", rec.set(&ExperimentConfig::out),
                                        "output directory")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"dynamic-margin simplex classifier for open-set recognition"};
  app.require_subcommand(1);

  FlagRecorder rec;
  std::string config_path;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic benchmark");
  CLI::App* train_cmd = app.add_subcommand("train", "train on generated CSVs");
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a trained checkpoint");
  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "sweep lambda or margin grids end to end");
  CLI::App* ir_cmd = app.add_subcommand(
      "ir-study", "uniform vs dynamic margins across imbalance ratios");

  std::string train_data_dir;
  std::string eval_checkpoint, eval_test_known, eval_test_unknown, eval_data,
      eval_ckpt_dir;
  std::string sweep_kind = "lambda";
  std::vector<double> li_list = {0.0, 0.1, 1.0};
  std::vector<double> lb_list = {0.0, 0.1, 1.0};
  std::vector<double> mmin_list = {25.0, 35.0, 45.0};
  std::vector<double> mmax_list = {45.0, 55.0, 65.0};
  std::vector<double> ir_list = {1.0, 10.0, 100.0};

  for (CLI::App* cmd : {gen, train_cmd, eval_cmd, ablate_cmd, ir_cmd})
    add_config_flags(cmd, rec, config_path);

  train_cmd->add_option("--data", train_data_dir, "directory with gen-data output")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  eval_cmd->add_option("--test-known", eval_test_known, "known test CSV");
  eval_cmd->add_option("--test-unknown", eval_test_unknown, "unknown test CSV");
  eval_cmd->add_option("--data", eval_data,
                       "dataset directory (supplies test CSVs / trial subdirs)");
  eval_cmd->add_option("--ckpt-dir", eval_ckpt_dir,
                       "directory with trial_<i>/checkpoint.txt (trials > 1)");

  ablate_cmd->add_option("--sweep", sweep_kind, "lambda or margin")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  ablate_cmd->add_option("--lambda-inter-list", li_list, "lambda_inter grid values")
      ->delimiter(',');
  ablate_cmd->add_option("--lambda-bg-list", lb_list, "lambda_bg grid values")
      ->delimiter(',');
  ablate_cmd->add_option("--m-min-list", mmin_list, "m_min grid values")
      ->delimiter(',');
  ablate_cmd->add_option("--m-max-list", mmax_list, "m_max grid values")
      ->delimiter(',');

  ir_cmd->add_option("--ir-list", ir_list, "imbalance ratios to study")
      ->delimiter(',');

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("osr");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg.apply_file(config_path);
    rec.apply(cfg);

    if (gen->parsed()) {
      cmd_gen_data(cfg);
    } else if (train_cmd->parsed()) {
      cmd_train(cfg, train_data_dir);
    } else if (eval_cmd->parsed()) {
      if (cfg.trials > 1) {
        cmd_eval_trials(cfg, eval_data, eval_ckpt_dir);
      } else {
        if (eval_checkpoint.empty())
          throw ValidationError("eval requires --checkpoint");
        std::string known_csv = eval_test_known;
        std::string unknown_csv = eval_test_unknown;
        if (known_csv.empty() && !eval_data.empty())
          known_csv = (fs::path(eval_data) / "test_known.csv").string();
        if (unknown_csv.empty() && !eval_data.empty())
          unknown_csv = (fs::path(eval_data) / "test_unknown.csv").string();
        if (known_csv.empty() || unknown_csv.empty())
          throw ValidationError(
              "eval requires --test-known/--test-unknown or --data");
        cmd_eval_single(cfg, eval_checkpoint, known_csv, unknown_csv);
      }
    } else if (ablate_cmd->parsed()) {
      AblateSpec spec;
      if (sweep_kind == "lambda") {
        spec.kind = AblateSpec::Kind::lambda;
        spec.first = li_list;
        spec.second = lb_list;
      } else if (sweep_kind == "margin") {
        spec.kind = AblateSpec::Kind::margin;
        spec.first = mmin_list;
        spec.second = mmax_list;
      } else {
        throw ValidationError("--sweep must be 'lambda' or 'margin'");
      }
      cmd_ablate(cfg, spec);
    } else if (ir_cmd->parsed()) {
      cmd_ir_study(cfg, ir_list);
    }
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace osr
