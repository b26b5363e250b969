#include "osr/trainer.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "osr/errors.hpp"
#include "osr/losses.hpp"
#include "osr/openset_eval.hpp"
#include "osr/rng.hpp"
#include "osr/textio.hpp"

namespace osr {

MarginMode margin_mode_from_string(const std::string& name) {
  if (name == "dynamic") return MarginMode::dynamic;
  if (name == "uniform") return MarginMode::uniform;
  throw ValidationError("unknown margin mode '" + name +
                        "' (expected dynamic or uniform)");
}

std::string to_string(MarginMode mode) {
  return mode == MarginMode::dynamic ? "dynamic" : "uniform";
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (batch_size_known < 1)
    throw ValidationError("train config: batch_size_known must be >= 1");
  if (batch_size_bg < 1)
    throw ValidationError("train config: batch_size_bg must be >= 1");
  if (!(learning_rate > 0.0))
    throw ValidationError("train config: learning_rate must be > 0");
  if (!(rms_decay > 0.0 && rms_decay < 1.0))
    throw ValidationError("train config: rms_decay must be in (0,1)");
  if (!(rms_epsilon > 0.0))
    throw ValidationError("train config: rms_epsilon must be > 0");
  if (lambda_inter < 0.0 || lambda_bg < 0.0)
    throw ValidationError("train config: lambda weights must be >= 0");
  if (eval_every < 1) throw ValidationError("train config: eval_every must be >= 1");
  check_margin_constraint(m_min, m_max, radius);
}

void rmsprop_step(NetParams& params, const NetParams& grads, NetParams& state,
                  double learning_rate, double decay, double epsilon) {
  if (params.layers.size() != grads.layers.size() ||
      params.layers.size() != state.layers.size())
    throw ValidationError("rmsprop_step: layer count mismatch");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Layer& p = params.layers[l];
    const Layer& g = grads.layers[l];
    Layer& s = state.layers[l];
    if (!p.weights.same_shape(g.weights) || !p.weights.same_shape(s.weights) ||
        p.bias.size() != g.bias.size() || p.bias.size() != s.bias.size())
      throw ValidationError("rmsprop_step: layer " + std::to_string(l) +
                            " shape mismatch");
    for (std::size_t i = 0; i < p.weights.data.size(); ++i) {
      double& st = s.weights.data[i];
      const double gr = g.weights.data[i];
      st = decay * st + (1.0 - decay) * gr * gr;
      p.weights.data[i] -= learning_rate * gr / (std::sqrt(st) + epsilon);
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
      double& st = s.bias[i];
      const double gr = g.bias[i];
      st = decay * st + (1.0 - decay) * gr * gr;
      p.bias[i] -= learning_rate * gr / (std::sqrt(st) + epsilon);
    }
  }
}

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path) {
  std::string out = "epoch,intra,inter,bg,total,train_acc\n";
  for (const EpochRecord& r : log.records) {
    out += std::to_string(r.epoch);
    out += ',' + format_g17(r.intra);
    out += ',' + format_g17(r.inter);
    out += ',' + format_g17(r.bg);
    out += ',' + format_g17(r.total);
    out += ',' + format_g17(r.train_acc);
    out += '\n';
  }
  write_file_atomic(path, out);
}

namespace {

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx,
                   std::size_t begin, std::size_t end) {
  Matrix out(end - begin, src.cols);
  for (std::size_t i = begin; i < end; ++i) {
    const auto from = src.row(idx[i]);
    auto to = out.row(i - begin);
    std::copy(from.begin(), from.end(), to.begin());
  }
  return out;
}

// Endless pass over a dataset: fresh shuffle whenever the order is exhausted.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, Rng& rng) : order_(n), cursor_(n), rng_(rng) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (cursor_ >= order_.size()) {
        rng_.shuffle(order_);
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_;
  Rng& rng_;
};

double closed_set_train_accuracy(const NetConfig& net_config, const NetParams& params,
                                 const LabeledDataset& data,
                                 const EtfCenters& centers) {
  const Matrix feats = forward(net_config, params, data.features);
  return accuracy(score_features(feats, data.labels, centers));
}

}  // namespace

TrainResult train(const LabeledDataset& train_data, const LabeledDataset* bg_data,
                  const NetConfig& net_config, const TrainConfig& config,
                  const Checkpoint* resume_from) {
  config.validate();
  const std::vector<std::int64_t> counts = dense_class_counts(train_data);
  const int num_classes = static_cast<int>(counts.size());
  if (num_classes < 2)
    throw ValidationError("train: need at least 2 known classes, got " +
                          std::to_string(num_classes));
  if (train_data.features.cols != static_cast<std::size_t>(net_config.input_dim))
    throw ValidationError("train: dataset dim " +
                          std::to_string(train_data.features.cols) +
                          " != net input_dim " +
                          std::to_string(net_config.input_dim));
  const bool use_bg = config.lambda_bg > 0.0;
  if (use_bg && (bg_data == nullptr || bg_data->size() == 0))
    throw ValidationError(
        "train: lambda_bg > 0 requires a non-empty background dataset");
  if (use_bg &&
      bg_data->features.cols != static_cast<std::size_t>(net_config.input_dim))
    throw ValidationError("train: background dim does not match net input_dim");

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  int start_epoch = 0;

  if (resume_from) {
    ckpt = *resume_from;
    start_epoch = ckpt.meta.epoch;
    if (ckpt.centers.num_classes != num_classes)
      throw ValidationError("train: resume checkpoint class count mismatch");
    if (start_epoch >= config.epochs)
      throw ValidationError("train: resume epoch " + std::to_string(start_epoch) +
                            " is already >= target epochs " +
                            std::to_string(config.epochs));
  } else {
    ckpt.net_config = net_config;
    ckpt.centers = build_centers(num_classes, net_config.embed_dim, config.radius);
    ckpt.margins = config.margin_mode == MarginMode::dynamic
                       ? dynamic_margins(counts, config.m_min, config.m_max,
                                         config.radius)
                       : uniform_margins(counts, config.m_min, config.m_max,
                                         config.radius);
    ckpt.net_params = init(net_config);
    ckpt.rms_state = zeros_like(ckpt.net_params);
  }
  ckpt.meta.seed = config.seed;
  ckpt.meta.lambda_inter = config.lambda_inter;
  ckpt.meta.lambda_bg = config.lambda_bg;
  ckpt.meta.learning_rate = config.learning_rate;
  ckpt.meta.rms_decay = config.rms_decay;
  ckpt.meta.rms_epsilon = config.rms_epsilon;
  ckpt.meta.square_margins = config.square_margins;

  const std::size_t n = train_data.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size_known);
  double last_acc = 0.0;

  for (int epoch = start_epoch + 1; epoch <= config.epochs; ++epoch) {
    // Per-epoch generators keyed by (seed, epoch) so a resumed run shuffles
    // identically to an uninterrupted one.
    Rng shuffle_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), 1));
    Rng bg_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), 2));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);
    BatchCycler bg_cycler(use_bg ? bg_data->size() : 1, bg_rng);

    KahanSum intra_sum, inter_sum, bg_sum, total_sum;
    int batch_index = 0;
    for (std::size_t begin = 0; begin < n; begin += batch, ++batch_index) {
      const std::size_t end = std::min(begin + batch, n);
      const std::size_t b = end - begin;

      FeatureBatch known;
      known.role = BatchRole::known;
      known.labels.resize(b);
      for (std::size_t i = begin; i < end; ++i)
        known.labels[i - begin] = train_data.labels[order[i]];
      const Matrix known_inputs = gather_rows(train_data.features, order, begin, end);

      ForwardTape known_tape;
      known.features = forward(net_config, ckpt.net_params, known_inputs, &known_tape);

      FeatureBatch background;
      ForwardTape bg_tape;
      Matrix bg_inputs;
      if (use_bg) {
        const std::vector<std::size_t> bg_idx =
            bg_cycler.next(static_cast<std::size_t>(config.batch_size_bg));
        bg_inputs = gather_rows(bg_data->features, bg_idx, 0, bg_idx.size());
        background.role = BatchRole::background;
        background.features =
            forward(net_config, ckpt.net_params, bg_inputs, &bg_tape);
      }

      const TotalResult loss =
          total_loss(known, use_bg ? &background : nullptr, ckpt.centers,
                     ckpt.margins, config.lambda_inter, config.lambda_bg,
                     config.square_margins);
      if (!std::isfinite(loss.breakdown.total))
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index));

      NetParams grads = backward(net_config, ckpt.net_params, known_tape,
                                 loss.grad_known);
      if (use_bg && loss.grad_bg.rows > 0)
        accumulate(grads,
                   backward(net_config, ckpt.net_params, bg_tape, loss.grad_bg));

      rmsprop_step(ckpt.net_params, grads, ckpt.rms_state, config.learning_rate,
                   config.rms_decay, config.rms_epsilon);

      const double w = static_cast<double>(b);
      intra_sum.add(w * loss.breakdown.intra);
      inter_sum.add(w * loss.breakdown.inter);
      bg_sum.add(w * loss.breakdown.bg);
      total_sum.add(w * loss.breakdown.total);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const double inv_n = 1.0 / static_cast<double>(n);
    rec.intra = intra_sum.value() * inv_n;
    rec.inter = inter_sum.value() * inv_n;
    rec.bg = bg_sum.value() * inv_n;
    rec.total = total_sum.value() * inv_n;
    if (epoch == start_epoch + 1 || epoch == config.epochs ||
        epoch % config.eval_every == 0)
      last_acc = closed_set_train_accuracy(net_config, ckpt.net_params, train_data,
                                           ckpt.centers);
    rec.train_acc = last_acc;
    result.log.records.push_back(rec);
    ckpt.meta.epoch = epoch;
  }

  return result;
}

}  // namespace osr
