#pragma once

#include <filesystem>
#include <vector>

#include "osr/datasets.hpp"
#include "osr/embedding_net.hpp"
#include "osr/etf_geometry.hpp"
#include "osr/linalg.hpp"

namespace osr {

/// Nearest-center prediction with the knownness score: the negated minimum
/// squared distance to any class center (higher = more known-like).
struct ScoredSample {
  int predicted_class = 0;  // argmin-distance class, ties broken low
  double score = 0.0;       // -min_c ||f - s_c||^2
  int true_label = 0;
};

struct CurvePoint {
  double fpr = 0.0;
  double ccr = 0.0;
};

struct EvalReport {
  double acc = 0.0;
  double auroc = 0.0;
  double oscr = 0.0;
  std::vector<CurvePoint> ccr_fpr_curve;
  int num_known_test = 0;
  int num_unknown_test = 0;
};

/// Scores every row: nearest center, negated min squared distance.
std::vector<ScoredSample> score_features(const Matrix& features,
                                         const std::vector<int>& true_labels,
                                         const EtfCenters& centers);

/// Nearest-center label when score >= threshold, else the unknown label C+1.
std::vector<int> classify(const Matrix& features, const EtfCenters& centers,
                          double threshold);

/// Closed-set accuracy over known samples; thresholds play no part.
double accuracy(const std::vector<ScoredSample>& known);

/// Mann-Whitney statistic: probability a random known score exceeds a random
/// unknown score, ties counted half.
double auroc(const std::vector<double>& known_scores,
             const std::vector<double>& unknown_scores);

struct OscrResult {
  double area = 0.0;
  std::vector<CurvePoint> curve;
};

/// Correct-classification rate vs false-positive rate over the threshold set
/// {+inf} union all observed scores; area by the trapezoid rule.
OscrResult oscr(const std::vector<ScoredSample>& scored_known,
                const std::vector<double>& unknown_scores);

/// Embeds both test sets through the checkpointed network and computes all
/// three metrics. Requires a non-empty unknown test set.
EvalReport evaluate_trial(const Checkpoint& ckpt, const LabeledDataset& test_known,
                          const LabeledDataset& test_unknown);

/// Arithmetic mean of acc/auroc/oscr; curves are omitted from the average.
EvalReport average_reports(const std::vector<EvalReport>& reports);

void write_report(const EvalReport& report, const std::filesystem::path& path);
void write_curve_csv(const std::vector<CurvePoint>& curve,
                     const std::filesystem::path& path);

}  // namespace osr
