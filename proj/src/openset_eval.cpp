#include "osr/openset_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "osr/errors.hpp"
#include "osr/textio.hpp"

namespace osr {

std::vector<ScoredSample> score_features(const Matrix& features,
                                         const std::vector<int>& true_labels,
                                         const EtfCenters& centers) {
  if (features.cols != static_cast<std::size_t>(centers.embed_dim))
    throw ValidationError("score_features: feature dim " +
                          std::to_string(features.cols) + " != centers dim " +
                          std::to_string(centers.embed_dim));
  if (!true_labels.empty() && true_labels.size() != features.rows)
    throw ValidationError("score_features: labels/features size mismatch");

  std::vector<ScoredSample> out(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const auto f = features.row(i);
    int best = 1;
    double best_d2 = squared_distance(f, centers.centers.row(0));
    for (int c = 2; c <= centers.num_classes; ++c) {
      const double d2 =
          squared_distance(f, centers.centers.row(static_cast<std::size_t>(c - 1)));
      if (d2 < best_d2) {
        best_d2 = d2;
        best = c;
      }
    }
    out[i].predicted_class = best;
    out[i].score = -best_d2;
    out[i].true_label = true_labels.empty() ? 0 : true_labels[i];
  }
  return out;
}

std::vector<int> classify(const Matrix& features, const EtfCenters& centers,
                          double threshold) {
  const std::vector<ScoredSample> scored = score_features(features, {}, centers);
  std::vector<int> labels(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i)
    labels[i] = scored[i].score >= threshold ? scored[i].predicted_class
                                             : centers.num_classes + 1;
  return labels;
}

double accuracy(const std::vector<ScoredSample>& known) {
  if (known.empty()) throw ValidationError("accuracy: empty sample set");
  std::size_t correct = 0;
  for (const ScoredSample& s : known)
    if (s.predicted_class == s.true_label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(known.size());
}

double auroc(const std::vector<double>& known_scores,
             const std::vector<double>& unknown_scores) {
  if (known_scores.empty() || unknown_scores.empty())
    throw ValidationError("auroc: both score lists must be non-empty");

  // Rank formulation with average ranks for ties; exactly the pairwise
  // win + half-tie count.
  struct Entry {
    double score;
    bool known;
  };
  std::vector<Entry> all;
  all.reserve(known_scores.size() + unknown_scores.size());
  for (double s : known_scores) all.push_back({s, true});
  for (double s : unknown_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  double known_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (all[k].known) known_rank_sum += avg_rank;
    i = j;
  }
  const double nk = static_cast<double>(known_scores.size());
  const double nu = static_cast<double>(unknown_scores.size());
  const double u = known_rank_sum - nk * (nk + 1.0) / 2.0;
  return u / (nk * nu);
}

OscrResult oscr(const std::vector<ScoredSample>& scored_known,
                const std::vector<double>& unknown_scores) {
  if (scored_known.empty() || unknown_scores.empty())
    throw ValidationError("oscr: both sample sets must be non-empty");

  std::vector<double> thresholds;
  thresholds.reserve(scored_known.size() + unknown_scores.size());
  std::vector<double> correct_scores;
  for (const ScoredSample& s : scored_known) {
    thresholds.push_back(s.score);
    if (s.predicted_class == s.true_label) correct_scores.push_back(s.score);
  }
  thresholds.insert(thresholds.end(), unknown_scores.begin(), unknown_scores.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  std::sort(correct_scores.begin(), correct_scores.end(), std::greater<>());
  std::vector<double> unknown_sorted = unknown_scores;
  std::sort(unknown_sorted.begin(), unknown_sorted.end(), std::greater<>());

  const double nk = static_cast<double>(scored_known.size());
  const double nu = static_cast<double>(unknown_sorted.size());

  OscrResult out;
  out.curve.push_back({0.0, 0.0});  // threshold +inf
  std::size_t ic = 0, iu = 0;
  for (double tau : thresholds) {
    while (ic < correct_scores.size() && correct_scores[ic] >= tau) ++ic;
    while (iu < unknown_sorted.size() && unknown_sorted[iu] >= tau) ++iu;
    out.curve.push_back(
        {static_cast<double>(iu) / nu, static_cast<double>(ic) / nk});
  }

  double area = 0.0;
  for (std::size_t p = 1; p < out.curve.size(); ++p)
    area += (out.curve[p].fpr - out.curve[p - 1].fpr) * 0.5 *
            (out.curve[p].ccr + out.curve[p - 1].ccr);
  out.area = area;
  return out;
}

EvalReport evaluate_trial(const Checkpoint& ckpt, const LabeledDataset& test_known,
                          const LabeledDataset& test_unknown) {
  if (test_unknown.size() == 0)
    throw ValidationError(
        "evaluate_trial: unknown test set is empty; open-set metrics undefined");
  if (test_known.size() == 0)
    throw ValidationError("evaluate_trial: known test set is empty");

  const Matrix known_feats =
      forward(ckpt.net_config, ckpt.net_params, test_known.features);
  const Matrix unknown_feats =
      forward(ckpt.net_config, ckpt.net_params, test_unknown.features);

  const std::vector<ScoredSample> scored_known =
      score_features(known_feats, test_known.labels, ckpt.centers);
  const std::vector<ScoredSample> scored_unknown =
      score_features(unknown_feats, {}, ckpt.centers);

  std::vector<double> known_scores(scored_known.size());
  for (std::size_t i = 0; i < scored_known.size(); ++i)
    known_scores[i] = scored_known[i].score;
  std::vector<double> unknown_scores(scored_unknown.size());
  for (std::size_t i = 0; i < scored_unknown.size(); ++i)
    unknown_scores[i] = scored_unknown[i].score;

  EvalReport report;
  report.acc = accuracy(scored_known);
  report.auroc = auroc(known_scores, unknown_scores);
  const OscrResult o = oscr(scored_known, unknown_scores);
  report.oscr = o.area;
  report.ccr_fpr_curve = o.curve;
  report.num_known_test = static_cast<int>(test_known.size());
  report.num_unknown_test = static_cast<int>(test_unknown.size());
  return report;
}

EvalReport average_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ValidationError("average_reports: empty report list");
  EvalReport avg;
  for (const EvalReport& r : reports) {
    avg.acc += r.acc;
    avg.auroc += r.auroc;
    avg.oscr += r.oscr;
    avg.num_known_test += r.num_known_test;
    avg.num_unknown_test += r.num_unknown_test;
  }
  const double n = static_cast<double>(reports.size());
  avg.acc /= n;
  avg.auroc /= n;
  avg.oscr /= n;
  return avg;
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::string out;
  out += "acc " + format_g17(report.acc) + '\n';
  out += "auroc " + format_g17(report.auroc) + '\n';
  out += "oscr " + format_g17(report.oscr) + '\n';
  out += "num_known_test " + std::to_string(report.num_known_test) + '\n';
  out += "num_unknown_test " + std::to_string(report.num_unknown_test) + '\n';
  write_file_atomic(path, out);
}

void write_curve_csv(const std::vector<CurvePoint>& curve,
                     const std::filesystem::path& path) {
  std::string out = "fpr,ccr\n";
  for (const CurvePoint& p : curve)
    out += format_g17(p.fpr) + "," + format_g17(p.ccr) + '\n';
  write_file_atomic(path, out);
}

}  // namespace osr
