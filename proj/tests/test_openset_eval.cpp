#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "osr/datasets.hpp"
#include "osr/errors.hpp"
#include "osr/openset_eval.hpp"
#include "osr/rng.hpp"

using namespace osr;
using namespace osr::test;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Identity embedding: inputs pass through unchanged.
Checkpoint identity_checkpoint(const EtfCenters& centers) {
  Checkpoint ckpt;
  ckpt.net_config.input_dim = centers.embed_dim;
  ckpt.net_config.embed_dim = centers.embed_dim;
  ckpt.net_config.seed = 0;
  Layer layer;
  layer.weights = Matrix(static_cast<std::size_t>(centers.embed_dim),
                         static_cast<std::size_t>(centers.embed_dim));
  for (int i = 0; i < centers.embed_dim; ++i)
    layer.weights(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = 1.0;
  layer.bias.assign(static_cast<std::size_t>(centers.embed_dim), 0.0);
  ckpt.net_params.layers.push_back(layer);
  ckpt.rms_state = zeros_like(ckpt.net_params);
  ckpt.centers = centers;
  ckpt.margins = dynamic_margins(
      std::vector<std::int64_t>(static_cast<std::size_t>(centers.num_classes), 10),
      0.05 * centers.radius, 0.5 * centers.radius, centers.radius);
  return ckpt;
}

std::vector<ScoredSample> random_scored(Rng& rng, std::size_t n, double acc_rate) {
  std::vector<ScoredSample> out(n);
  for (ScoredSample& s : out) {
    s.score = -std::abs(rng.normal(0.0, 2.0));
    s.true_label = 1 + static_cast<int>(rng.bounded(4));
    s.predicted_class = rng.uniform01() < acc_rate
                            ? s.true_label
                            : 1 + static_cast<int>(rng.bounded(4));
  }
  return out;
}

}  // namespace

TEST_SUITE("openset_eval") {

TEST_CASE("classify: feature at a center with threshold -inf") {
  const EtfCenters centers = build_centers(4, 3, 100.0);
  Matrix f(1, 3);
  const auto s3 = centers.centers.row(2);
  std::copy(s3.begin(), s3.end(), f.row(0).begin());
  const std::vector<int> labels = classify(f, centers, -kInf);
  CHECK(labels[0] == 3);
}

TEST_CASE("classify: the origin is equidistant and breaks ties low") {
  const EtfCenters centers = build_centers(5, 6, 42.0);
  // verify equidistance numerically: ||0 - s_c||^2 = R^2 for every c
  Matrix origin(1, 6);
  for (int c = 0; c < 5; ++c)
    CHECK(squared_distance(origin.row(0),
                           centers.centers.row(static_cast<std::size_t>(c))) ==
          doctest::Approx(42.0 * 42.0).epsilon(1e-12));
  CHECK(classify(origin, centers, -kInf)[0] == 1);
}

TEST_CASE("classify: distant feature is rejected as unknown C+1") {
  const EtfCenters centers = build_centers(4, 3, 100.0);
  Matrix f(1, 3, 0.0);
  // place the point at distance >= 2R from every center
  f(0, 0) = -3.0 * 100.0;
  f(0, 1) = -3.0 * 100.0;
  for (int c = 0; c < 4; ++c)
    CHECK(std::sqrt(squared_distance(
              f.row(0), centers.centers.row(static_cast<std::size_t>(c)))) >=
          2.0 * 100.0);
  const double threshold = -(100.0 / std::sqrt(2.0)) * (100.0 / std::sqrt(2.0));
  CHECK(classify(f, centers, threshold)[0] == 5);
}

TEST_CASE("classify: threshold sentinels") {
  const EtfCenters centers = build_centers(3, 2, 1.0);
  Rng rng(5);
  Matrix f(10, 2);
  for (double& v : f.data) v = rng.normal(0.0, 3.0);
  for (int label : classify(f, centers, -kInf)) CHECK(label <= 3);
  for (int label : classify(f, centers, kInf)) CHECK(label == 4);
}

TEST_CASE("accuracy counting") {
  std::vector<ScoredSample> s(4);
  for (int i = 0; i < 4; ++i) {
    s[static_cast<std::size_t>(i)].true_label = i + 1;
    s[static_cast<std::size_t>(i)].predicted_class = i + 1;
  }
  CHECK(accuracy(s) == 1.0);
  s[3].predicted_class = 1;
  CHECK(accuracy(s) == 0.75);
  for (auto& x : s) x.predicted_class = x.true_label + 1;
  CHECK(accuracy(s) == 0.0);
  CHECK_THROWS_AS(accuracy({}), ValidationError);
}

TEST_CASE("auroc basics") {
  CHECK(auroc({5.0, 4.0}, {1.0, 0.0}) == 1.0);
  CHECK(auroc({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.5);
  CHECK(auroc({3.0, 1.0}, {2.0, 0.0}) == 0.75);
  CHECK_THROWS_AS(auroc({}, {1.0}), ValidationError);
  CHECK_THROWS_AS(auroc({1.0}, {}), ValidationError);
}

TEST_CASE("auroc matches the pairwise oracle on random instances") {
  Rng rng(17);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t nk = 1 + rng.bounded(40);
    const std::size_t nu = 1 + rng.bounded(40);
    std::vector<double> known(nk), unknown(nu);
    // quantized scores force plenty of ties
    for (double& v : known) v = std::floor(rng.uniform(-8.0, 8.0)) / 2.0;
    for (double& v : unknown) v = std::floor(rng.uniform(-8.0, 8.0)) / 2.0;
    CHECK(std::abs(auroc(known, unknown) - brute_auroc(known, unknown)) < 1e-12);
  }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
  Rng rng(19);
  std::vector<double> known(25), unknown(30);
  for (double& v : known) v = rng.normal(1.0, 2.0);
  for (double& v : unknown) v = rng.normal(-1.0, 2.0);
  const double base = auroc(known, unknown);
  auto transform = [](std::vector<double> v) {
    for (double& x : v) x = std::atan(0.3 * x) * 5.0 + 2.0;
    return v;
  };
  CHECK(auroc(transform(known), transform(unknown)) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("oscr: perfect separation with all-correct predictions") {
  std::vector<ScoredSample> known(3);
  for (int i = 0; i < 3; ++i) {
    known[static_cast<std::size_t>(i)].true_label = i + 1;
    known[static_cast<std::size_t>(i)].predicted_class = i + 1;
    known[static_cast<std::size_t>(i)].score = 10.0 + i;
  }
  const OscrResult r = oscr(known, {1.0, 2.0, 3.0});
  CHECK(r.area == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("oscr: zero when every known prediction is wrong") {
  std::vector<ScoredSample> known(3);
  for (int i = 0; i < 3; ++i) {
    known[static_cast<std::size_t>(i)].true_label = 1;
    known[static_cast<std::size_t>(i)].predicted_class = 2;
    known[static_cast<std::size_t>(i)].score = 10.0 + i;
  }
  CHECK(oscr(known, {1.0, 5.0, 20.0}).area == 0.0);
}

TEST_CASE("oscr: interleaved hand case matches exhaustive enumeration") {
  // 4 known (3 correct) interleaved with 4 unknown scores
  std::vector<ScoredSample> known(4);
  const double scores[4] = {9.0, 7.0, 5.0, 3.0};
  for (int i = 0; i < 4; ++i) {
    known[static_cast<std::size_t>(i)].true_label = i + 1;
    known[static_cast<std::size_t>(i)].predicted_class = (i == 2) ? 1 : i + 1;
    known[static_cast<std::size_t>(i)].score = scores[i];
  }
  const std::vector<double> unknown = {8.0, 6.0, 4.0, 2.0};
  const OscrResult r = oscr(known, unknown);
  const BruteOscr expect = brute_oscr(known, unknown);
  CHECK(std::abs(r.area - expect.area) < 1e-12);
  REQUIRE(r.curve.size() == expect.curve.size());
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    CHECK(r.curve[i].fpr == expect.curve[i].fpr);
    CHECK(r.curve[i].ccr == expect.curve[i].ccr);
  }
}

TEST_CASE("oscr matches the enumeration oracle on random instances") {
  Rng rng(23);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t nk = 1 + rng.bounded(30);
    const std::size_t nu = 1 + rng.bounded(30);
    std::vector<ScoredSample> known = random_scored(rng, nk, 0.7);
    std::vector<double> unknown(nu);
    for (double& v : unknown) v = -std::abs(rng.normal(0.0, 2.5));
    const OscrResult r = oscr(known, unknown);
    const BruteOscr expect = brute_oscr(known, unknown);
    CHECK(std::abs(r.area - expect.area) < 1e-12);
    // fprs non-decreasing along the curve
    for (std::size_t i = 1; i < r.curve.size(); ++i)
      CHECK(r.curve[i].fpr >= r.curve[i - 1].fpr);
    // OSCR never exceeds closed-set accuracy
    CHECK(r.area <= accuracy(known) + 1e-12);
  }
}

TEST_CASE("oscr equals auroc when closed-set accuracy is one") {
  Rng rng(29);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t nk = 2 + rng.bounded(30);
    const std::size_t nu = 2 + rng.bounded(30);
    std::vector<ScoredSample> known = random_scored(rng, nk, 1.1);  // all correct
    std::vector<double> known_scores(nk), unknown(nu);
    for (std::size_t i = 0; i < nk; ++i) known_scores[i] = known[i].score;
    for (double& v : unknown) v = -std::abs(rng.normal(0.0, 2.5));
    const double a = auroc(known_scores, unknown);
    const double o = oscr(known, unknown).area;
    CHECK(o <= a + 1e-12);
    CHECK(std::abs(o - a) < 1e-12);
  }
}

TEST_CASE("score decreases when moving radially away from the nearest center") {
  const EtfCenters centers = build_centers(4, 4, 2.0);
  Rng rng(31);
  int checked = 0;
  for (int iter = 0; iter < 60; ++iter) {
    Matrix f(1, 4);
    for (double& v : f.data) v = rng.normal(0.0, 1.0);
    const ScoredSample base = score_features(f, {}, centers)[0];
    const auto s = centers.centers.row(static_cast<std::size_t>(base.predicted_class - 1));
    double prev_score = base.score;
    for (double t : {1.1, 1.3, 1.6}) {
      Matrix farther(1, 4);
      for (std::size_t k = 0; k < 4; ++k)
        farther(0, k) = s[k] + t * (f(0, k) - s[k]);  // radially outward
      const ScoredSample moved = score_features(farther, {}, centers)[0];
      // monotone while the point stays in the same nearest-center region
      if (moved.predicted_class != base.predicted_class) break;
      CHECK(moved.score < prev_score);
      prev_score = moved.score;
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("evaluate_trial: idealized collapse gives perfect metrics") {
  const EtfCenters centers = build_centers(3, 2, 1.0);
  const Checkpoint ckpt = identity_checkpoint(centers);

  LabeledDataset known;
  known.role = DatasetRole::known_test;
  known.features = Matrix(3, 2);
  known.labels = {1, 2, 3};
  for (int c = 0; c < 3; ++c) {
    const auto s = centers.centers.row(static_cast<std::size_t>(c));
    std::copy(s.begin(), s.end(),
              known.features.row(static_cast<std::size_t>(c)).begin());
  }
  LabeledDataset unknown;
  unknown.role = DatasetRole::unknown_test;
  unknown.features = Matrix(2, 2);
  unknown.features(0, 0) = 5.0;  // distance > R from every center
  unknown.features(1, 1) = -7.0;
  unknown.labels = {4, 4};

  const EvalReport report = evaluate_trial(ckpt, known, unknown);
  CHECK(report.acc == 1.0);
  CHECK(report.auroc == 1.0);
  CHECK(report.oscr == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(report.num_known_test == 3);
  CHECK(report.num_unknown_test == 2);

  LabeledDataset empty_unknown;
  empty_unknown.role = DatasetRole::unknown_test;
  empty_unknown.features = Matrix(0, 2);
  CHECK_THROWS_AS(evaluate_trial(ckpt, known, empty_unknown), ValidationError);
}

TEST_CASE("evaluate_trial: untrained nets hover near chance AUROC") {
  SynthConfig sc;
  sc.num_known = 4;
  sc.num_unknown = 2;
  sc.input_dim = 6;
  sc.samples_per_majority_class = 60;
  sc.imbalance_ratio = 1.0;
  sc.center_separation = 10.0;
  sc.bg_samples = 10;

  double total = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    sc.seed = 1000 + s;
    const SynthData data = generate_synthetic(sc);
    Checkpoint ckpt;
    ckpt.net_config.input_dim = 6;
    ckpt.net_config.hidden_dims = {16};
    ckpt.net_config.embed_dim = 4;
    ckpt.net_config.seed = 500 + s;
    ckpt.net_params = init(ckpt.net_config);
    ckpt.rms_state = zeros_like(ckpt.net_params);
    ckpt.centers = build_centers(4, 4, 100.0);
    ckpt.margins = dynamic_margins(dense_class_counts(data.train), 35.0, 55.0, 100.0);
    total += evaluate_trial(ckpt, data.test_known, data.test_unknown).auroc;
  }
  const double mean = total / 20.0;
  CHECK(mean > 0.3);
  CHECK(mean < 0.7);
}

TEST_CASE("average_reports") {
  EvalReport a;
  a.acc = 0.9;
  a.auroc = 0.8;
  a.oscr = 0.7;
  a.num_known_test = 10;
  a.num_unknown_test = 5;
  EvalReport b = a;
  b.acc = 0.7;
  b.auroc = 0.6;
  b.oscr = 0.5;

  const EvalReport solo = average_reports({a});
  CHECK(solo.acc == a.acc);
  CHECK(solo.auroc == a.auroc);

  const EvalReport ab = average_reports({a, b});
  const EvalReport ba = average_reports({b, a});
  CHECK(ab.acc == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(ab.auroc == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(ab.oscr == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(ab.acc == ba.acc);
  CHECK(ab.ccr_fpr_curve.empty());
  CHECK_THROWS_AS(average_reports({}), ValidationError);
}

}  // TEST_SUITE
