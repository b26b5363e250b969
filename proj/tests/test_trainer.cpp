#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "osr/datasets.hpp"
#include "osr/errors.hpp"
#include "osr/rng.hpp"
#include "osr/trainer.hpp"

using namespace osr;
namespace fs = std::filesystem;

namespace {

// Two well-separated Gaussians on the x axis, plus a far unknown cluster.
struct SanityData {
  LabeledDataset train;
  LabeledDataset bg;
};

SanityData sanity_dataset(std::uint64_t seed, int per_class = 160) {
  Rng rng(seed);
  SanityData out;
  out.train.role = DatasetRole::known_train;
  out.train.features = Matrix(0, 2);
  out.train.features.cols = 2;
  for (int c = 0; c < 2; ++c) {
    const double cx = c == 0 ? -5.0 : 5.0;
    for (int i = 0; i < per_class; ++i) {
      out.train.features.data.push_back(cx + rng.normal());
      out.train.features.data.push_back(rng.normal());
      ++out.train.features.rows;
      out.train.labels.push_back(c + 1);
    }
  }
  refresh_counts(out.train);

  out.bg.role = DatasetRole::background;
  out.bg.features = Matrix(0, 2);
  out.bg.features.cols = 2;
  for (int i = 0; i < 100; ++i) {
    out.bg.features.data.push_back(rng.uniform(-8.0, 8.0));
    out.bg.features.data.push_back(rng.uniform(-3.0, 3.0));
    ++out.bg.features.rows;
    out.bg.labels.push_back(0);
  }
  refresh_counts(out.bg);
  return out;
}

NetConfig sanity_net(std::uint64_t seed) {
  NetConfig nc;
  nc.input_dim = 2;
  nc.hidden_dims = {16};
  nc.embed_dim = 2;
  nc.seed = seed;
  return nc;
}

TrainConfig sanity_train(std::uint64_t seed, int epochs = 50) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size_known = 64;
  tc.batch_size_bg = 64;
  tc.learning_rate = 1e-2;
  tc.lambda_inter = 0.0;
  tc.lambda_bg = 0.0;
  tc.seed = seed;
  tc.eval_every = 1;
  return tc;
}

bool params_equal(const NetParams& a, const NetParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    if (a.layers[l].weights.data != b.layers[l].weights.data ||
        a.layers[l].bias != b.layers[l].bias)
      return false;
  return true;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("rmsprop: zero gradients leave parameters fixed and decay the state") {
  NetConfig nc = sanity_net(1);
  NetParams p = init(nc);
  const NetParams before = p;
  NetParams g = zeros_like(p);
  NetParams s = zeros_like(p);
  for (Layer& l : s.layers)
    for (double& v : l.weights.data) v = 0.5;
  rmsprop_step(p, g, s, 0.1, 0.9, 1e-8);
  CHECK(params_equal(p, before));
  for (const Layer& l : s.layers)
    for (double v : l.weights.data) CHECK(v == doctest::Approx(0.45).epsilon(1e-15));
}

TEST_CASE("rmsprop: scalar hand-computed step") {
  NetParams p, g, s;
  p.layers.resize(1);
  p.layers[0].weights = Matrix(1, 1);
  p.layers[0].weights(0, 0) = 1.0;
  p.layers[0].bias = {};
  g = p;
  g.layers[0].weights(0, 0) = 2.0;
  s = p;
  s.layers[0].weights(0, 0) = 0.0;

  rmsprop_step(p, g, s, 0.1, 0.9, 1e-8);
  CHECK(s.layers[0].weights(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
  const double expect = 1.0 - 0.1 * 2.0 / (std::sqrt(0.4) + 1e-8);
  CHECK(p.layers[0].weights(0, 0) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(p.layers[0].weights(0, 0) == doctest::Approx(0.68377).epsilon(1e-5));
}

TEST_CASE("rmsprop: repeated identical gradients shrink the step") {
  NetParams p, g, s;
  p.layers.resize(1);
  p.layers[0].weights = Matrix(1, 1);
  p.layers[0].weights(0, 0) = 1.0;
  g = p;
  g.layers[0].weights(0, 0) = 2.0;
  s = zeros_like(p);

  rmsprop_step(p, g, s, 0.1, 0.9, 1e-8);
  const double first_step = std::abs(1.0 - p.layers[0].weights(0, 0));
  const double mid = p.layers[0].weights(0, 0);
  rmsprop_step(p, g, s, 0.1, 0.9, 1e-8);
  const double second_step = std::abs(mid - p.layers[0].weights(0, 0));
  CHECK(second_step < first_step);
}

TEST_CASE("rmsprop: shape mismatch is rejected") {
  NetConfig nc = sanity_net(2);
  NetParams p = init(nc);
  NetParams s = zeros_like(p);
  NetConfig other = nc;
  other.hidden_dims = {8};
  NetParams g = init(other);
  CHECK_THROWS_AS(rmsprop_step(p, g, s, 0.1, 0.9, 1e-8), ValidationError);
}

TEST_CASE("train config validation") {
  TrainConfig tc = sanity_train(0);
  tc.m_max = 80.0;  // above 100/sqrt(2)
  CHECK_THROWS_WITH_AS(tc.validate(), doctest::Contains("70.71"), ValidationError);
  tc = sanity_train(0);
  tc.learning_rate = 0.0;
  CHECK_THROWS_AS(tc.validate(), ValidationError);
  tc = sanity_train(0);
  tc.rms_decay = 1.0;
  CHECK_THROWS_AS(tc.validate(), ValidationError);
}

TEST_CASE("separable two-class run reaches full training accuracy") {
  const SanityData data = sanity_dataset(7);
  const TrainResult result =
      train(data.train, nullptr, sanity_net(7), sanity_train(7));
  CHECK(result.log.records.back().train_acc == 1.0);
  // smoke descent
  CHECK(result.log.records.back().total < result.log.records.front().total);
  // margins frozen from the true class counts
  CHECK(result.checkpoint.margins.class_counts ==
        std::vector<std::int64_t>{160, 160});
  CHECK(result.checkpoint.meta.epoch == 50);
}

TEST_CASE("zero lambdas keep inter and bg columns at zero") {
  const SanityData data = sanity_dataset(8);
  const TrainResult result =
      train(data.train, nullptr, sanity_net(8), sanity_train(8, 5));
  for (const EpochRecord& r : result.log.records) {
    CHECK(r.inter == 0.0);
    CHECK(r.bg == 0.0);
    CHECK(r.total == r.intra);
  }
}

TEST_CASE("training is deterministic in config + seed") {
  const SanityData data = sanity_dataset(9);
  TrainConfig tc = sanity_train(9, 8);
  tc.lambda_inter = 0.1;
  tc.lambda_bg = 0.1;
  const TrainResult a = train(data.train, &data.bg, sanity_net(9), tc);
  const TrainResult b = train(data.train, &data.bg, sanity_net(9), tc);
  REQUIRE(a.log.records.size() == b.log.records.size());
  for (std::size_t i = 0; i < a.log.records.size(); ++i) {
    CHECK(a.log.records[i].total == b.log.records[i].total);
    CHECK(a.log.records[i].train_acc == b.log.records[i].train_acc);
  }
  CHECK(params_equal(a.checkpoint.net_params, b.checkpoint.net_params));

  TrainConfig other = tc;
  other.seed = 10;
  const TrainResult c = train(data.train, &data.bg, sanity_net(9), other);
  CHECK_FALSE(params_equal(a.checkpoint.net_params, c.checkpoint.net_params));
}

TEST_CASE("uniform margin mode freezes the midpoint for every class") {
  const SanityData data = sanity_dataset(11);
  TrainConfig tc = sanity_train(11, 2);
  tc.margin_mode = MarginMode::uniform;
  const TrainResult result = train(data.train, nullptr, sanity_net(11), tc);
  for (double m : result.checkpoint.margins.per_class_margin)
    CHECK(m == doctest::Approx(45.0).epsilon(1e-15));
}

TEST_CASE("lambda_bg > 0 without background data is rejected") {
  const SanityData data = sanity_dataset(12);
  TrainConfig tc = sanity_train(12, 2);
  tc.lambda_bg = 0.5;
  CHECK_THROWS_AS(train(data.train, nullptr, sanity_net(12), tc), ValidationError);
}

TEST_CASE("non-finite loss aborts with epoch and batch context") {
  const SanityData data = sanity_dataset(13);
  TrainConfig tc = sanity_train(13, 3);
  tc.learning_rate = 1e200;  // guaranteed overflow through two layers
  CHECK_THROWS_WITH_AS(train(data.train, nullptr, sanity_net(13), tc),
                       doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("resume from a checkpoint matches the uninterrupted run") {
  const SanityData data = sanity_dataset(14);
  TrainConfig tc = sanity_train(14, 6);
  tc.lambda_inter = 0.1;
  tc.lambda_bg = 0.1;
  const NetConfig nc = sanity_net(14);

  const TrainResult full = train(data.train, &data.bg, nc, tc);

  TrainConfig first_half = tc;
  first_half.epochs = 3;
  const TrainResult part = train(data.train, &data.bg, nc, first_half);

  const fs::path path = fs::temp_directory_path() / "osr_resume_test.txt";
  save_checkpoint(part.checkpoint, path);
  const Checkpoint restored = load_checkpoint(path);

  const TrainResult rest = train(data.train, &data.bg, nc, tc, &restored);
  REQUIRE(rest.log.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rest.log.records[i].epoch == full.log.records[i + 3].epoch);
    CHECK(std::abs(rest.log.records[i].total - full.log.records[i + 3].total) <
          1e-9);
  }
  double worst = 0.0;
  for (std::size_t l = 0; l < full.checkpoint.net_params.layers.size(); ++l)
    for (std::size_t i = 0;
         i < full.checkpoint.net_params.layers[l].weights.data.size(); ++i)
      worst = std::max(worst,
                       std::abs(full.checkpoint.net_params.layers[l].weights.data[i] -
                                rest.checkpoint.net_params.layers[l].weights.data[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("train log CSV has the documented columns") {
  const SanityData data = sanity_dataset(15);
  const TrainResult result =
      train(data.train, nullptr, sanity_net(15), sanity_train(15, 2));
  const fs::path path = fs::temp_directory_path() / "osr_trainlog_test.csv";
  write_train_log_csv(result.log, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,intra,inter,bg,total,train_acc");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
}

}  // TEST_SUITE
