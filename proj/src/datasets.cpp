#include "osr/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "osr/errors.hpp"
#include "osr/rng.hpp"
#include "osr/textio.hpp"

namespace osr {

std::string to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::known_train: return "known-train";
    case DatasetRole::known_test: return "known-test";
    case DatasetRole::unknown_test: return "unknown-test";
    case DatasetRole::background: return "background";
  }
  return "unknown-role";
}

void refresh_counts(LabeledDataset& ds) {
  ds.class_counts.clear();
  for (int label : ds.labels) ++ds.class_counts[label];
}

std::vector<std::int64_t> dense_class_counts(const LabeledDataset& ds) {
  if (ds.labels.empty()) throw ValidationError("dataset has no samples");
  int max_label = 0;
  for (int label : ds.labels) {
    if (label < 1)
      throw ValidationError("dataset labels must be >= 1, found " +
                            std::to_string(label));
    max_label = std::max(max_label, label);
  }
  std::vector<std::int64_t> counts(static_cast<std::size_t>(max_label), 0);
  for (int label : ds.labels) ++counts[static_cast<std::size_t>(label - 1)];
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0)
      throw ValidationError("dataset labels are not contiguous: class " +
                            std::to_string(c + 1) + " has no samples");
  return counts;
}

namespace {

void check_synth_config(const SynthConfig& cfg) {
  if (cfg.num_known < 2)
    throw ValidationError("synth config: num_known must be >= 2, got " +
                          std::to_string(cfg.num_known));
  if (cfg.num_unknown < 1)
    throw ValidationError("synth config: num_unknown must be >= 1, got " +
                          std::to_string(cfg.num_unknown));
  if (cfg.input_dim < 2)
    throw ValidationError("synth config: input_dim must be >= 2, got " +
                          std::to_string(cfg.input_dim));
  if (cfg.samples_per_majority_class < 1)
    throw ValidationError("synth config: samples_per_majority_class must be >= 1");
  if (cfg.imbalance_ratio < 1.0)
    throw ValidationError("synth config: imbalance_ratio must be >= 1, got " +
                          format_g6(cfg.imbalance_ratio));
  if (cfg.cluster_std <= 0.0)
    throw ValidationError("synth config: cluster_std must be > 0");
  if (cfg.center_separation <= 0.0)
    throw ValidationError("synth config: center_separation must be > 0");
  if (cfg.bg_samples < 0)
    throw ValidationError("synth config: bg_samples must be >= 0");
  const double minority = std::llround(
      cfg.samples_per_majority_class / cfg.imbalance_ratio);
  if (minority < 1)
    throw ValidationError(
        "synth config: imbalance_ratio " + format_g6(cfg.imbalance_ratio) +
        " leaves the minority class empty (majority " +
        std::to_string(cfg.samples_per_majority_class) + ")");
}

/// Geometric long-tail profile: rank 0 gets the majority count, the last rank
/// gets majority / IR.
std::vector<std::int64_t> count_profile(int num_classes, int majority, double ir) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes));
  for (int r = 0; r < num_classes; ++r) {
    const double expo = num_classes > 1
                            ? -static_cast<double>(r) / (num_classes - 1)
                            : 0.0;
    counts[static_cast<std::size_t>(r)] =
        std::llround(majority * std::pow(ir, expo));
  }
  for (std::int64_t c : counts)
    if (c < 1)
      throw ValidationError("synth config: count profile yields an empty class");
  return counts;
}

Matrix draw_centers(const SynthConfig& cfg, int total, Rng& rng) {
  const double min_dist = 3.0 * cfg.cluster_std;
  Matrix centers(static_cast<std::size_t>(total),
                 static_cast<std::size_t>(cfg.input_dim));
  const int max_attempts = 1000 * total;
  int attempts = 0;
  int placed = 0;
  std::vector<double> cand(static_cast<std::size_t>(cfg.input_dim));
  while (placed < total) {
    if (++attempts > max_attempts)
      throw ValidationError(
          "synthetic generation: could not place " + std::to_string(total) +
          " class centers with pairwise separation >= " + format_g6(min_dist) +
          " on a sphere of radius " + format_g6(cfg.center_separation) +
          "; increase center_separation or reduce cluster_std");
    double n2 = 0.0;
    for (double& v : cand) {
      v = rng.normal();
      n2 += v * v;
    }
    if (n2 <= 0.0) continue;
    const double scale = cfg.center_separation / std::sqrt(n2);
    for (double& v : cand) v *= scale;
    bool ok = true;
    for (int j = 0; j < placed && ok; ++j) {
      const double d2 = squared_distance(
          std::span<const double>(cand),
          centers.row(static_cast<std::size_t>(j)));
      if (d2 < min_dist * min_dist) ok = false;
    }
    if (!ok) continue;
    auto row = centers.row(static_cast<std::size_t>(placed));
    std::copy(cand.begin(), cand.end(), row.begin());
    ++placed;
  }
  return centers;
}

void append_sample(LabeledDataset& ds, std::span<const double> x, int label) {
  ds.features.data.insert(ds.features.data.end(), x.begin(), x.end());
  ++ds.features.rows;
  ds.labels.push_back(label);
}

}  // namespace

SynthData generate_synthetic_for_split(const SynthConfig& cfg, const TrialSplit& split) {
  check_synth_config(cfg);
  const int total = cfg.num_known + cfg.num_unknown;
  if (static_cast<int>(split.known_class_ids.size()) != cfg.num_known ||
      static_cast<int>(split.unknown_class_ids.size()) != cfg.num_unknown)
    throw ValidationError("trial split sizes do not match the synth config");
  {
    std::set<int> all(split.known_class_ids.begin(), split.known_class_ids.end());
    all.insert(split.unknown_class_ids.begin(), split.unknown_class_ids.end());
    if (static_cast<int>(all.size()) != total || *all.begin() != 1 ||
        *all.rbegin() != total)
      throw ValidationError("trial split does not partition classes 1.." +
                            std::to_string(total));
  }

  Rng rng(cfg.seed);
  const Matrix centers = draw_centers(cfg, total, rng);

  // Per generated class: its relabeled id and sample count under this split.
  const std::vector<std::int64_t> known_counts =
      count_profile(cfg.num_known, cfg.samples_per_majority_class, cfg.imbalance_ratio);
  const std::vector<std::int64_t> unknown_counts =
      count_profile(cfg.num_unknown, cfg.samples_per_majority_class,
                    cfg.imbalance_ratio);
  std::vector<std::int64_t> count_of(static_cast<std::size_t>(total), 0);
  std::vector<int> new_label(static_cast<std::size_t>(total), 0);
  std::vector<bool> is_known(static_cast<std::size_t>(total), false);
  for (int r = 0; r < cfg.num_known; ++r) {
    const int id = split.known_class_ids[static_cast<std::size_t>(r)];
    count_of[static_cast<std::size_t>(id - 1)] = known_counts[static_cast<std::size_t>(r)];
    new_label[static_cast<std::size_t>(id - 1)] = r + 1;
    is_known[static_cast<std::size_t>(id - 1)] = true;
  }
  for (int r = 0; r < cfg.num_unknown; ++r) {
    const int id = split.unknown_class_ids[static_cast<std::size_t>(r)];
    count_of[static_cast<std::size_t>(id - 1)] =
        unknown_counts[static_cast<std::size_t>(r)];
    new_label[static_cast<std::size_t>(id - 1)] = cfg.num_known + r + 1;
  }

  SynthData out;
  const std::size_t dim = static_cast<std::size_t>(cfg.input_dim);
  out.train.features.cols = dim;
  out.test_known.features.cols = dim;
  out.test_unknown.features.cols = dim;
  out.background.features.cols = dim;
  out.train.role = DatasetRole::known_train;
  out.test_known.role = DatasetRole::known_test;
  out.test_unknown.role = DatasetRole::unknown_test;
  out.background.role = DatasetRole::background;

  std::vector<double> x(dim);
  for (int id = 1; id <= total; ++id) {
    const auto center = centers.row(static_cast<std::size_t>(id - 1));
    const std::int64_t n = count_of[static_cast<std::size_t>(id - 1)];
    const int label = new_label[static_cast<std::size_t>(id - 1)];
    // 80/20 stratified split; singleton classes go entirely to train.
    std::int64_t n_train = std::llround(0.8 * static_cast<double>(n));
    n_train = std::clamp<std::int64_t>(n_train, 1, std::max<std::int64_t>(1, n - 1));
    for (std::int64_t s = 0; s < n; ++s) {
      for (std::size_t k = 0; k < dim; ++k)
        x[k] = center[k] + cfg.cluster_std * rng.normal();
      if (!is_known[static_cast<std::size_t>(id - 1)])
        append_sample(out.test_unknown, x, label);
      else if (s < n_train)
        append_sample(out.train, x, label);
      else
        append_sample(out.test_known, x, label);
    }
  }

  // Background: uniform over the bounding box of the known centers, inflated
  // by 3 cluster standard deviations on every side.
  std::vector<double> lo(dim), hi(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    double mn = centers(static_cast<std::size_t>(split.known_class_ids[0] - 1), k);
    double mx = mn;
    for (int id : split.known_class_ids) {
      const double v = centers(static_cast<std::size_t>(id - 1), k);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    lo[k] = mn - 3.0 * cfg.cluster_std;
    hi[k] = mx + 3.0 * cfg.cluster_std;
  }
  for (int s = 0; s < cfg.bg_samples; ++s) {
    for (std::size_t k = 0; k < dim; ++k) x[k] = rng.uniform(lo[k], hi[k]);
    append_sample(out.background, x, 0);
  }

  refresh_counts(out.train);
  refresh_counts(out.test_known);
  refresh_counts(out.test_unknown);
  refresh_counts(out.background);
  return out;
}

SynthData generate_synthetic(const SynthConfig& cfg) {
  check_synth_config(cfg);
  TrialSplit identity;
  identity.trial_index = 0;
  for (int c = 1; c <= cfg.num_known; ++c) identity.known_class_ids.push_back(c);
  for (int c = cfg.num_known + 1; c <= cfg.num_known + cfg.num_unknown; ++c)
    identity.unknown_class_ids.push_back(c);
  return generate_synthetic_for_split(cfg, identity);
}

namespace {

// C(n, k), saturating well above any realistic trial count.
unsigned long long combinations(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned long long result = 1;
  for (int i = 1; i <= k; ++i) {
    const unsigned long long next =
        result * static_cast<unsigned long long>(n - k + i) /
        static_cast<unsigned long long>(i);
    if (next < result) return ~0ull;  // overflow, treat as huge
    result = next;
  }
  return result;
}

}  // namespace

std::vector<TrialSplit> make_trial_splits(int num_classes, int num_known,
                                          int num_trials, std::uint64_t seed) {
  if (num_known < 1 || num_known >= num_classes)
    throw ValidationError("make_trial_splits: require 1 <= num_known < num_classes");
  if (num_trials < 1)
    throw ValidationError("make_trial_splits: num_trials must be >= 1");

  const unsigned long long num_combos = combinations(num_classes, num_known);
  std::set<std::vector<int>> seen;
  std::vector<TrialSplit> splits;
  splits.reserve(static_cast<std::size_t>(num_trials));

  std::vector<int> ids(static_cast<std::size_t>(num_classes));
  for (int trial = 0; trial < num_trials; ++trial) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(trial)));
    TrialSplit split;
    split.trial_index = trial;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      for (int c = 0; c < num_classes; ++c) ids[static_cast<std::size_t>(c)] = c + 1;
      rng.shuffle(ids);
      std::vector<int> known(ids.begin(), ids.begin() + num_known);
      std::sort(known.begin(), known.end());
      if (seen.count(known) && seen.size() < num_combos) continue;
      split.known_class_ids = known;
      split.unknown_class_ids.assign(ids.begin() + num_known, ids.end());
      std::sort(split.unknown_class_ids.begin(), split.unknown_class_ids.end());
      seen.insert(std::move(known));
      break;
    }
    if (split.known_class_ids.empty())
      throw std::runtime_error("make_trial_splits: failed to find a fresh split");
    splits.push_back(std::move(split));
  }
  return splits;
}

// ---------------------------------------------------------------------------
// CSV: header `label,f1,...,fD`, UTF-8, one sample per row.
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

LabeledDataset read_csv(const std::filesystem::path& path, DatasetRole role) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw CsvParseError("empty CSV file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_fields(line);
  if (header.size() < 2 || header[0] != "label")
    throw CsvParseError(path.string() + ":1: header must be label,f1,...,fD");
  for (std::size_t k = 1; k < header.size(); ++k)
    if (header[k] != "f" + std::to_string(k))
      throw CsvParseError(path.string() + ":1: expected column 'f" +
                          std::to_string(k) + "', found '" + header[k] + "'");
  const std::size_t dim = header.size() - 1;

  LabeledDataset ds;
  ds.role = role;
  ds.features.cols = dim;

  std::size_t line_no = 1;
  std::vector<double> x(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != dim + 1)
      throw CsvParseError(path.string() + ":" + std::to_string(line_no) +
                          ": row has " + std::to_string(fields.size()) +
                          " columns, header has " + std::to_string(dim + 1));
    int label = 0;
    try {
      std::size_t pos = 0;
      label = std::stoi(fields[0], &pos);
      if (pos != fields[0].size()) throw std::invalid_argument(fields[0]);
    } catch (const std::exception&) {
      throw CsvParseError(path.string() + ":" + std::to_string(line_no) +
                          ": column 1: invalid label '" + fields[0] + "'");
    }
    for (std::size_t k = 0; k < dim; ++k) {
      try {
        std::size_t pos = 0;
        x[k] = std::stod(fields[k + 1], &pos);
        if (pos != fields[k + 1].size()) throw std::invalid_argument(fields[k + 1]);
      } catch (const std::exception&) {
        throw CsvParseError(path.string() + ":" + std::to_string(line_no) +
                            ": column " + std::to_string(k + 2) +
                            ": invalid number '" + fields[k + 1] + "'");
      }
      if (!std::isfinite(x[k]))
        throw CsvParseError(path.string() + ":" + std::to_string(line_no) +
                            ": column " + std::to_string(k + 2) +
                            ": non-finite feature value");
    }
    append_sample(ds, x, label);
  }
  if (ds.size() == 0)
    throw CsvParseError("CSV file has no data rows: " + path.string());
  refresh_counts(ds);
  return ds;
}

void write_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::string out;
  out.reserve(ds.size() * (ds.features.cols + 1) * 16 + 64);
  out += "label";
  for (std::size_t k = 1; k <= ds.features.cols; ++k) out += ",f" + std::to_string(k);
  out += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += std::to_string(ds.labels[i]);
    const auto row = ds.features.row(i);
    for (std::size_t k = 0; k < ds.features.cols; ++k) {
      out += ',';
      out += format_g17(row[k]);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace osr
