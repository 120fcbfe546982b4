#include "flowforge/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowforge {

namespace {

// Positive when `a` is better than `b` along the objective.
double gain(double a, double b, Direction d) { return d == Direction::Max ? a - b : b - a; }

void check_compatible(const ObjectivePoint& a, const ObjectivePoint& b) {
  if (a.values.size() != b.values.size() || a.directions != b.directions || a.values.size() != a.directions.size())
    throw std::invalid_argument("objective points have mismatched dimensions or directions");
}

}  // namespace

bool dominates(const ObjectivePoint& a, const ObjectivePoint& b) {
  check_compatible(a, b);
  if (a.values.empty()) throw std::invalid_argument("objective points need at least one objective");
  bool strictly = false;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double g = gain(a.values[i], b.values[i], a.directions[i]);
    if (g < 0.0) return false;
    if (g > 0.0) strictly = true;
  }
  return strictly;
}

std::vector<std::size_t> frontier_indices(std::span<const ObjectivePoint> points) {
  std::vector<std::size_t> unique;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool duplicate = false;
    for (auto j : unique)
      if (points[j].payload == points[i].payload && points[j].values == points[i].values) {
        duplicate = true;
        break;
      }
    if (!duplicate) unique.push_back(i);
  }
  std::vector<std::size_t> out;
  for (auto i : unique) {
    bool dominated = false;
    for (auto j : unique)
      if (j != i && dominates(points[j], points[i])) {
        dominated = true;
        break;
      }
    if (!dominated) out.push_back(i);
  }
  return out;
}

std::vector<ObjectivePoint> frontier(std::span<const ObjectivePoint> points) {
  std::vector<ObjectivePoint> out;
  for (auto i : frontier_indices(points)) out.push_back(points[i]);
  return out;
}

double hypervolume_2d(std::span<const ObjectivePoint> front, std::span<const double> reference) {
  if (reference.size() != 2) throw std::invalid_argument("hypervolume_2d needs a two-dimensional reference");
  std::vector<std::pair<double, double>> gains;
  for (const auto& p : front) {
    if (p.values.size() != 2 || p.directions.size() != 2)
      throw std::invalid_argument("hypervolume_2d needs two-objective points");
    const double g0 = gain(p.values[0], reference[0], p.directions[0]);
    const double g1 = gain(p.values[1], reference[1], p.directions[1]);
    if (g0 < 0.0 || g1 < 0.0) throw std::invalid_argument("reference point is not dominated by the front");
    gains.emplace_back(g0, g1);
  }
  // Sweep from the largest first-objective gain; each point adds the slab
  // it raises above the best second-objective gain seen so far.
  std::sort(gains.begin(), gains.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  double area = 0.0;
  double best_second = 0.0;
  for (const auto& [g0, g1] : gains) {
    if (g1 > best_second) {
      area += g0 * (g1 - best_second);
      best_second = g1;
    }
  }
  return area;
}

}  // namespace flowforge
