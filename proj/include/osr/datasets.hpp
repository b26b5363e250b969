#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "osr/linalg.hpp"

namespace osr {

enum class DatasetRole { known_train, known_test, unknown_test, background };

std::string to_string(DatasetRole role);

/// Feature vectors with 1-based integer labels. Background samples carry
/// label 0. class_counts tracks the number of samples per label.
struct LabeledDataset {
  Matrix features;          // N x D
  std::vector<int> labels;  // N
  DatasetRole role = DatasetRole::known_train;
  std::map<int, std::int64_t> class_counts;

  std::size_t size() const { return features.rows; }
};

/// Recomputes class_counts from labels.
void refresh_counts(LabeledDataset& ds);

/// Counts for contiguous labels 1..C as a dense vector; throws if any label
/// in that range is missing or out of range.
std::vector<std::int64_t> dense_class_counts(const LabeledDataset& ds);

/// Synthetic benchmark: Gaussian class clusters on a sphere with a geometric
/// long-tail count profile, plus a uniform box background.
struct SynthConfig {
  int num_known = 2;
  int num_unknown = 1;
  int input_dim = 2;
  int samples_per_majority_class = 100;
  double imbalance_ratio = 1.0;  // majority count / minority count
  double cluster_std = 1.0;
  double center_separation = 10.0;  // radius of the sphere holding class centers
  int bg_samples = 100;
  std::uint64_t seed = 0;
};

struct SynthData {
  LabeledDataset train;         // known classes, 80% per class
  LabeledDataset test_known;    // known classes, 20% per class
  LabeledDataset test_unknown;  // unknown classes, labels num_known+1..
  LabeledDataset background;    // uniform over the inflated known-center box
};

/// One open-set trial: which generated class ids are treated as known.
struct TrialSplit {
  int trial_index = 0;
  std::vector<int> known_class_ids;    // sorted, 1-based
  std::vector<int> unknown_class_ids;  // sorted, 1-based
};

SynthData generate_synthetic(const SynthConfig& config);

/// As generate_synthetic, but the known/unknown roles follow the given split
/// over num_known + num_unknown generated classes. Known classes are
/// relabeled 1..num_known in split order; unknown classes follow.
SynthData generate_synthetic_for_split(const SynthConfig& config,
                                       const TrialSplit& split);

/// num_trials deterministic splits of (seed, trial_index); each picks
/// num_known distinct known classes, and splits differ across trials unless
/// there are fewer distinct combinations than trials.
std::vector<TrialSplit> make_trial_splits(int num_classes, int num_known,
                                          int num_trials, std::uint64_t seed);

/// CSV with header `label,f1,...,fD`. Parse errors name the line.
LabeledDataset read_csv(const std::filesystem::path& path, DatasetRole role);
void write_csv(const LabeledDataset& ds, const std::filesystem::path& path);

}  // namespace osr
