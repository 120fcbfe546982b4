#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace flowforge {

enum class Direction { Min, Max };

struct ObjectivePoint {
  std::vector<double> values;
  std::vector<Direction> directions;
  std::size_t payload = 0;  // caller-defined reference, e.g. an index into a candidate list
};

/// a is no worse than b everywhere and strictly better somewhere. Throws
/// std::invalid_argument on dimension or direction mismatch.
bool dominates(const ObjectivePoint& a, const ObjectivePoint& b);

/// Non-dominated subset in input order. Points equal in both values and
/// payload are collapsed to their first occurrence; distinct payloads that
/// tie on every objective are all kept.
std::vector<ObjectivePoint> frontier(std::span<const ObjectivePoint> points);
std::vector<std::size_t> frontier_indices(std::span<const ObjectivePoint> points);

/// Area dominated by a two-objective front relative to `reference`, which
/// every point must weakly dominate.
double hypervolume_2d(std::span<const ObjectivePoint> front, std::span<const double> reference);

}  // namespace flowforge
