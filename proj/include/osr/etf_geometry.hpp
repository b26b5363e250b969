#pragma once

#include <cstdint>
#include <vector>

#include "osr/linalg.hpp"

namespace osr {

/// C fixed class prototypes on a radius-R hypersphere: the vertices of a
/// regular simplex centered at the origin, embedded in the first C-1
/// coordinates of R^d and zero-padded beyond. Construction is deterministic:
/// the same (C, d, R) always yields bit-identical centers.
struct EtfCenters {
  int num_classes = 0;
  int embed_dim = 0;
  double radius = 0.0;
  Matrix centers;  // num_classes x embed_dim
};

/// Per-class margins m_c derived from training class frequencies, together
/// with the bounds and counts they were computed from. Margins are the plain
/// values of the schedule (added to squared distances by the losses).
struct MarginSchedule {
  std::vector<double> per_class_margin;
  double m_min = 0.0;
  double m_max = 0.0;
  std::vector<std::int64_t> class_counts;

  int num_classes() const { return static_cast<int>(per_class_margin.size()); }
};

/// Builds the simplex vertices: center the C standard basis directions
/// (u_i = e_i - (1/C) 1), map their span onto the first C-1 coordinates via
/// the Helmert orthonormal basis, scale each vertex to norm R.
/// Requires num_classes >= 2, embed_dim >= num_classes - 1, radius > 0.
EtfCenters build_centers(int num_classes, int embed_dim, double radius);

/// Distance between any two simplex vertices: R * sqrt(2C / (C-1)).
double pairwise_center_distance(int num_classes, double radius);

/// Throws ValidationError unless 0 < m_min < m_max < radius/sqrt(2);
/// the message names the violated bound.
void check_margin_constraint(double m_min, double m_max, double radius);

/// m_c = m_min + (m_max - m_min) * (1 - n_c / N), N = sum of counts.
/// All counts must be >= 1 and the margin constraint must hold.
MarginSchedule dynamic_margins(const std::vector<std::int64_t>& class_counts,
                               double m_min, double m_max, double radius);

/// Frequency-independent schedule with every margin at (m_min + m_max) / 2;
/// the baseline arm of the imbalance study.
MarginSchedule uniform_margins(const std::vector<std::int64_t>& class_counts,
                               double m_min, double m_max, double radius);

/// True iff the closed balls of radius m_max around all centers are pairwise
/// disjoint, i.e. 2 * m_max < min_{i != j} ||s_i - s_j||.
bool verify_ball_disjointness(const EtfCenters& centers, double m_max);

}  // namespace osr
