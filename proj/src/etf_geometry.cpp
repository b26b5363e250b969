#include "osr/etf_geometry.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "osr/errors.hpp"

namespace osr {

EtfCenters build_centers(int num_classes, int embed_dim, double radius) {
  if (num_classes < 2)
    throw ValidationError("build_centers: num_classes must be >= 2, got " +
                          std::to_string(num_classes));
  if (radius <= 0.0)
    throw ValidationError("build_centers: radius must be > 0, got " +
                          std::to_string(radius));
  if (embed_dim < num_classes - 1)
    throw ValidationError("build_centers: embed_dim (" + std::to_string(embed_dim) +
                          ") must be >= num_classes - 1 (" +
                          std::to_string(num_classes - 1) + ")");

  const int c = num_classes;
  EtfCenters out;
  out.num_classes = c;
  out.embed_dim = embed_dim;
  out.radius = radius;
  out.centers = Matrix(static_cast<std::size_t>(c), static_cast<std::size_t>(embed_dim));

  // Helmert row k of R^C (k = 1..C-1) has entries 1/sqrt(k(k+1)) at positions
  // j < k, -k/sqrt(k(k+1)) at j = k, zero beyond. These rows are orthonormal
  // and orthogonal to the all-ones vector, so the projected vertex i is just
  // column i of the Helmert submatrix.
  for (int i = 0; i < c; ++i) {
    auto row = out.centers.row(static_cast<std::size_t>(i));
    for (int k = 1; k < c; ++k) {
      const double denom = std::sqrt(static_cast<double>(k) * (k + 1));
      double v = 0.0;
      if (i < k)
        v = 1.0 / denom;
      else if (i == k)
        v = -static_cast<double>(k) / denom;
      row[static_cast<std::size_t>(k - 1)] = v;
    }
    const double scale = radius / norm(row);
    for (int k = 0; k < c - 1; ++k) row[static_cast<std::size_t>(k)] *= scale;
    // coordinates c-1 .. embed_dim-1 stay zero
  }
  return out;
}

double pairwise_center_distance(int num_classes, double radius) {
  if (num_classes < 2)
    throw ValidationError("pairwise_center_distance: num_classes must be >= 2, got " +
                          std::to_string(num_classes));
  if (radius <= 0.0)
    throw ValidationError("pairwise_center_distance: radius must be > 0, got " +
                          std::to_string(radius));
  const double c = static_cast<double>(num_classes);
  return radius * std::sqrt(2.0 * c / (c - 1.0));
}

void check_margin_constraint(double m_min, double m_max, double radius) {
  const double bound = radius / std::sqrt(2.0);
  char msg[256];
  if (!(radius > 0.0)) {
    std::snprintf(msg, sizeof(msg), "margin constraint: radius must be > 0, got %.6g",
                  radius);
    throw ValidationError(msg);
  }
  if (!(m_min > 0.0) || !(m_min < m_max) || !(m_max < bound)) {
    std::snprintf(msg, sizeof(msg),
                  "margin constraint violated: require 0 < m_min < m_max < "
                  "radius/sqrt(2) = %.6g (got m_min = %.6g, m_max = %.6g)",
                  bound, m_min, m_max);
    throw ValidationError(msg);
  }
}

namespace {

std::int64_t checked_total(const std::vector<std::int64_t>& counts) {
  if (counts.empty())
    throw ValidationError("margin schedule: class_counts must be non-empty");
  std::int64_t total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 1)
      throw ValidationError("margin schedule: class " + std::to_string(i + 1) +
                            " has count " + std::to_string(counts[i]) +
                            ", all counts must be >= 1");
    total += counts[i];
  }
  return total;
}

}  // namespace

MarginSchedule dynamic_margins(const std::vector<std::int64_t>& class_counts,
                               double m_min, double m_max, double radius) {
  check_margin_constraint(m_min, m_max, radius);
  const std::int64_t total = checked_total(class_counts);

  MarginSchedule sched;
  sched.m_min = m_min;
  sched.m_max = m_max;
  sched.class_counts = class_counts;
  sched.per_class_margin.resize(class_counts.size());
  for (std::size_t i = 0; i < class_counts.size(); ++i) {
    const double p = static_cast<double>(class_counts[i]) / static_cast<double>(total);
    sched.per_class_margin[i] = m_min + (m_max - m_min) * (1.0 - p);
  }
  return sched;
}

MarginSchedule uniform_margins(const std::vector<std::int64_t>& class_counts,
                               double m_min, double m_max, double radius) {
  check_margin_constraint(m_min, m_max, radius);
  checked_total(class_counts);

  MarginSchedule sched;
  sched.m_min = m_min;
  sched.m_max = m_max;
  sched.class_counts = class_counts;
  sched.per_class_margin.assign(class_counts.size(), 0.5 * (m_min + m_max));
  return sched;
}

bool verify_ball_disjointness(const EtfCenters& centers, double m_max) {
  double min_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < centers.num_classes; ++i)
    for (int j = i + 1; j < centers.num_classes; ++j) {
      const double d = std::sqrt(squared_distance(
          centers.centers.row(static_cast<std::size_t>(i)),
          centers.centers.row(static_cast<std::size_t>(j))));
      if (d < min_dist) min_dist = d;
    }
  return 2.0 * m_max < min_dist;
}

}  // namespace osr
