#pragma once

#include <cstdint>
#include <vector>

#include "osr/etf_geometry.hpp"
#include "osr/linalg.hpp"

namespace osr {

enum class BatchRole { known, background };

/// A batch of embedded features. Labels are 1-based class ids and present
/// only for known batches.
struct FeatureBatch {
  Matrix features;          // B x d
  std::vector<int> labels;  // size B for known batches, empty for background
  BatchRole role = BatchRole::known;

  std::size_t size() const { return features.rows; }
};

struct LossBreakdown {
  double intra = 0.0;
  double inter = 0.0;
  double bg = 0.0;
  double total = 0.0;
  long active_inter_pairs = 0;
  long active_bg_pairs = 0;
};

struct IntraResult {
  double loss = 0.0;
  Matrix grad;  // B x d, gradient w.r.t. the known features
};

struct InterResult {
  double loss = 0.0;
  Matrix grad;  // B x d
  long active_pairs = 0;
};

struct BgResult {
  double loss = 0.0;
  Matrix grad_known;  // B_k x d
  Matrix grad_bg;     // B_b x d
  long active_pairs = 0;
};

struct TotalResult {
  LossBreakdown breakdown;
  Matrix grad_known;  // B_k x d
  Matrix grad_bg;     // B_b x d; empty when no background batch participates
};

/// Mean squared distance to the own-class center:
///   L = (1/B) sum_i ||f_i - s_{y_i}||^2,  dL/df_i = (2/B) (f_i - s_{y_i}).
IntraResult intra_loss(const FeatureBatch& batch, const EtfCenters& centers);

/// Triplet-style hinge against every rival center:
///   L = (1/B) sum_i sum_{c != y_i} max(0, m_{y_i} + ||f_i - s_{y_i}||^2
///                                          - ||f_i - s_c||^2).
/// Active pairs contribute (2/B)(s_c - s_{y_i}) to dL/df_i; a hinge argument
/// of exactly zero counts as inactive. With square_margins the schedule
/// values are squared before entering the hinge.
InterResult inter_loss(const FeatureBatch& batch, const EtfCenters& centers,
                       const MarginSchedule& margins, bool square_margins = false);

/// Class-inclusion hinge pushing background features beyond the known ones:
///   L = (1/(B_k B_b)) sum_i sum_k max(0, m_{y_i} + ||f_i - s_{y_i}||^2
///                                         - ||f_k^bg - s_{y_i}||^2).
BgResult bg_loss(const FeatureBatch& known, const FeatureBatch& background,
                 const EtfCenters& centers, const MarginSchedule& margins,
                 bool square_margins = false);

/// total = intra + lambda_inter * inter + lambda_bg * bg. Terms with a zero
/// weight are skipped entirely, so (0, 0) reduces byte-identically to
/// intra_loss. A background batch is required iff lambda_bg > 0.
TotalResult total_loss(const FeatureBatch& known, const FeatureBatch* background,
                       const EtfCenters& centers, const MarginSchedule& margins,
                       double lambda_inter, double lambda_bg,
                       bool square_margins = false);

}  // namespace osr
