#include "osr/losses.hpp"

#include <string>

#include "osr/errors.hpp"

namespace osr {

namespace {

void check_known_batch(const FeatureBatch& batch, const EtfCenters& centers,
                       const char* op) {
  if (batch.role != BatchRole::known)
    throw ValidationError(std::string(op) + ": batch role must be 'known'");
  if (batch.size() == 0)
    throw ValidationError(std::string(op) + ": batch is empty");
  if (batch.labels.size() != batch.size())
    throw ValidationError(std::string(op) + ": labels/features size mismatch");
  if (batch.features.cols != static_cast<std::size_t>(centers.embed_dim))
    throw ValidationError(std::string(op) + ": feature dim " +
                          std::to_string(batch.features.cols) +
                          " != centers dim " + std::to_string(centers.embed_dim));
  for (int y : batch.labels)
    if (y < 1 || y > centers.num_classes)
      throw ValidationError(std::string(op) + ": label " + std::to_string(y) +
                            " out of range [1.." +
                            std::to_string(centers.num_classes) + "]");
}

void check_schedule(const MarginSchedule& margins, const EtfCenters& centers,
                    const char* op) {
  if (margins.num_classes() != centers.num_classes)
    throw ValidationError(std::string(op) + ": margin schedule has " +
                          std::to_string(margins.num_classes()) +
                          " classes, centers have " +
                          std::to_string(centers.num_classes));
}

double margin_value(const MarginSchedule& margins, int label, bool square) {
  const double m = margins.per_class_margin[static_cast<std::size_t>(label - 1)];
  return square ? m * m : m;
}

}  // namespace

IntraResult intra_loss(const FeatureBatch& batch, const EtfCenters& centers) {
  check_known_batch(batch, centers, "intra_loss");

  const std::size_t b = batch.size();
  const std::size_t d = batch.features.cols;
  const double inv_b = 1.0 / static_cast<double>(b);

  IntraResult out;
  out.grad = Matrix(b, d);
  KahanSum acc;
  for (std::size_t i = 0; i < b; ++i) {
    const auto f = batch.features.row(i);
    const auto s = centers.centers.row(static_cast<std::size_t>(batch.labels[i] - 1));
    acc.add(squared_distance(f, s));
    auto g = out.grad.row(i);
    for (std::size_t k = 0; k < d; ++k) g[k] = 2.0 * inv_b * (f[k] - s[k]);
  }
  out.loss = acc.value() * inv_b;
  return out;
}

InterResult inter_loss(const FeatureBatch& batch, const EtfCenters& centers,
                       const MarginSchedule& margins, bool square_margins) {
  check_known_batch(batch, centers, "inter_loss");
  check_schedule(margins, centers, "inter_loss");

  const std::size_t b = batch.size();
  const std::size_t d = batch.features.cols;
  const double inv_b = 1.0 / static_cast<double>(b);

  InterResult out;
  out.grad = Matrix(b, d);
  KahanSum acc;
  for (std::size_t i = 0; i < b; ++i) {
    const int y = batch.labels[i];
    const auto f = batch.features.row(i);
    const auto s_y = centers.centers.row(static_cast<std::size_t>(y - 1));
    const double d2_own = squared_distance(f, s_y);
    const double m = margin_value(margins, y, square_margins);
    auto g = out.grad.row(i);
    for (int c = 1; c <= centers.num_classes; ++c) {
      if (c == y) continue;
      const auto s_c = centers.centers.row(static_cast<std::size_t>(c - 1));
      const double arg = m + d2_own - squared_distance(f, s_c);
      if (arg > 0.0) {
        acc.add(arg);
        for (std::size_t k = 0; k < d; ++k) g[k] += 2.0 * inv_b * (s_c[k] - s_y[k]);
        ++out.active_pairs;
      }
    }
  }
  out.loss = acc.value() * inv_b;
  return out;
}

BgResult bg_loss(const FeatureBatch& known, const FeatureBatch& background,
                 const EtfCenters& centers, const MarginSchedule& margins,
                 bool square_margins) {
  check_known_batch(known, centers, "bg_loss");
  check_schedule(margins, centers, "bg_loss");
  if (background.role != BatchRole::background)
    throw ValidationError("bg_loss: second batch role must be 'background'");
  if (background.size() == 0) throw ValidationError("bg_loss: background batch is empty");
  if (background.features.cols != static_cast<std::size_t>(centers.embed_dim))
    throw ValidationError("bg_loss: background feature dim mismatch");

  const std::size_t bk = known.size();
  const std::size_t bb = background.size();
  const std::size_t d = known.features.cols;
  const double inv = 1.0 / (static_cast<double>(bk) * static_cast<double>(bb));

  BgResult out;
  out.grad_known = Matrix(bk, d);
  out.grad_bg = Matrix(bb, d);
  KahanSum acc;
  for (std::size_t i = 0; i < bk; ++i) {
    const int y = known.labels[i];
    const auto f = known.features.row(i);
    const auto s_y = centers.centers.row(static_cast<std::size_t>(y - 1));
    const double d2_own = squared_distance(f, s_y);
    const double m = margin_value(margins, y, square_margins);
    auto gk = out.grad_known.row(i);
    for (std::size_t k = 0; k < bb; ++k) {
      const auto fb = background.features.row(k);
      const double arg = m + d2_own - squared_distance(fb, s_y);
      if (arg > 0.0) {
        acc.add(arg);
        auto gb = out.grad_bg.row(k);
        for (std::size_t t = 0; t < d; ++t) {
          gk[t] += 2.0 * inv * (f[t] - s_y[t]);
          gb[t] -= 2.0 * inv * (fb[t] - s_y[t]);
        }
        ++out.active_pairs;
      }
    }
  }
  out.loss = acc.value() * inv;
  return out;
}

TotalResult total_loss(const FeatureBatch& known, const FeatureBatch* background,
                       const EtfCenters& centers, const MarginSchedule& margins,
                       double lambda_inter, double lambda_bg, bool square_margins) {
  if (lambda_inter < 0.0 || lambda_bg < 0.0)
    throw ValidationError("total_loss: lambda weights must be >= 0");
  if (lambda_bg > 0.0 && (background == nullptr || background->size() == 0))
    throw ValidationError(
        "total_loss: lambda_bg > 0 requires a non-empty background batch");

  TotalResult out;
  IntraResult intra = intra_loss(known, centers);
  out.breakdown.intra = intra.loss;
  out.grad_known = std::move(intra.grad);

  if (lambda_inter > 0.0) {
    const InterResult inter = inter_loss(known, centers, margins, square_margins);
    out.breakdown.inter = inter.loss;
    out.breakdown.active_inter_pairs = inter.active_pairs;
    for (std::size_t i = 0; i < out.grad_known.data.size(); ++i)
      out.grad_known.data[i] += lambda_inter * inter.grad.data[i];
  }

  if (lambda_bg > 0.0) {
    const BgResult bg = bg_loss(known, *background, centers, margins, square_margins);
    out.breakdown.bg = bg.loss;
    out.breakdown.active_bg_pairs = bg.active_pairs;
    for (std::size_t i = 0; i < out.grad_known.data.size(); ++i)
      out.grad_known.data[i] += lambda_bg * bg.grad_known.data[i];
    out.grad_bg = Matrix(bg.grad_bg.rows, bg.grad_bg.cols);
    for (std::size_t i = 0; i < out.grad_bg.data.size(); ++i)
      out.grad_bg.data[i] = lambda_bg * bg.grad_bg.data[i];
  }

  out.breakdown.total = out.breakdown.intra + lambda_inter * out.breakdown.inter +
                        lambda_bg * out.breakdown.bg;
  return out;
}

}  // namespace osr
