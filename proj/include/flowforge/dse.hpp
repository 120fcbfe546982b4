#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flowforge/flowgraph.hpp"
#include "flowforge/gp.hpp"
#include "flowforge/metamodel.hpp"
#include "flowforge/netmodel.hpp"

namespace flowforge {

enum class OTaskKind { S, P, Q };

using Ordering = std::vector<OTaskKind>;

/// "SPQ" -> {S, P, Q}. Throws std::invalid_argument on unknown letters,
/// repeats or an empty sequence.
Ordering parse_ordering(std::string_view text);
/// Comma-separated list of orderings.
std::vector<Ordering> parse_orderings(std::string_view text);
std::string to_string(const Ordering& o);

struct Theta {
  double alpha_p = 0.0;
  double alpha_s = 0.0;
  double alpha_q = 0.0;

  double& operator[](std::size_t i);
  double operator[](std::size_t i) const;
  bool operator==(const Theta&) const = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

struct ThetaBounds {
  std::array<Interval, 3> range{{{0.0, 0.1}, {0.0, 0.1}, {0.0, 0.1}}};

  /// Throws std::invalid_argument unless every lo <= hi and lo >= 0.
  void check() const;
  Theta from_unit(std::span<const double> u) const;
  std::vector<double> to_unit(const Theta& t) const;
};

struct Limits {
  double u_max = 1.0;
  double t_max = std::numeric_limits<double>::infinity();
  double acc_loss_max = 1.0;
};

/// (w1, w2, w3, w4) for accuracy, DSP, LUT and latency.
using Weights = std::array<double, 4>;

inline constexpr double kInfeasibleScore = -1e6;

enum class SelectPolicy { Score, BestAccuracy, BestDsp, BestLut };

struct DseConfig {
  int budget = 22;
  int initial_design = 5;
  Weights weights{0.25, 0.25, 0.25, 0.25};
  Limits limits;
  int stall_limit = 5;
  std::uint64_t seed = 0;
  ThetaBounds bounds;
  int pool_size = 2048;
  double xi = 0.01;
  int workers = 0;  // concurrent orderings; 0: hardware parallelism
  SelectPolicy select = SelectPolicy::Score;

  void check() const;
};

struct Candidate {
  int index = 0;
  Ordering ordering;
  Theta theta;
  Metrics metrics;
  bool feasible = false;
  double score = kInfeasibleScore;
  double wall_time_s = 0.0;
};

struct Range {
  double min = 0.0;
  double max = 0.0;
};

/// Min-max normalization; a degenerate range maps everything to 0.5.
/// Throws std::invalid_argument on an empty input.
std::vector<double> normalize(std::span<const double> values, Range* range = nullptr);
double normalize_value(double v, const Range& r);

struct NormalizedMetrics {
  double acc_loss = 0.0;
  double dsp = 0.0;
  double lut = 0.0;
  double latency = 0.0;
};

/// Throws std::invalid_argument for negative weights or an all-zero vector.
void check_weights(const Weights& w);
double score(const NormalizedMetrics& m, const Weights& w, bool feasible);
bool is_feasible(const Metrics& m, const Limits& limits);

/// Recomputes feasibility and scores of every candidate, normalizing over
/// the ranges of the whole list.
void rescore(std::span<Candidate> history, const Weights& w, const Limits& limits);

/// Highest score, ties to the lowest position; nullopt for an empty list.
std::optional<std::size_t> incumbent(std::span<const Candidate> history);

/// Low-discrepancy points in [0,1)^dim with a seeded random shift.
std::vector<std::vector<double>> shifted_halton(int dim, int count, std::uint64_t seed, int skip = 0);

/// EI-argmax over a seeded quasi-random pool of the unit cube; ties go to
/// the lowest pool index.
std::vector<double> propose(const GpModel& gp, double best, double xi, int pool_size, std::uint64_t seed);

struct BoOptions {
  int budget = 22;
  int initial_design = 5;
  int stall_limit = 5;
  int pool_size = 2048;
  double xi = 0.01;
  std::uint64_t seed = 0;
};

/// Generic sequential loop over the unit cube. `evaluate` observes a point;
/// `scores` returns the current score of every point evaluated so far
/// (scores at or below kInfeasibleScore / 2 count as infeasible). Returns
/// the evaluated points in order.
std::vector<std::vector<double>> bo_maximize(int dim, const BoOptions& options,
                                             const std::function<void(const std::vector<double>&)>& evaluate,
                                             const std::function<std::vector<double>()>& scores);

/// What every DSE evaluation runs: model generation, the ordering's
/// O-tasks, a vendor BRANCH and mock synthesis, on a copy of `cfg`.
struct FlowTemplate {
  ConfigStore cfg;
  double default_pruning_rate_thresh = 0.02;
};

FlowGraph instantiate(const Ordering& ordering);
/// Throws on flow failure.
Metrics evaluate_theta(const FlowTemplate& tmpl, const Ordering& ordering, const Theta& theta,
                       const EvaluationBackend& backend);

struct OrderingRun {
  Ordering ordering;
  std::vector<Candidate> history;
  std::optional<std::string> error;
};

struct DseResult {
  std::vector<OrderingRun> runs;
  std::vector<Candidate> merged;  // all histories, rescored together
  std::vector<Candidate> pareto;  // feasible, non-dominated in (accuracy, dsp, lut, latency)
  std::optional<Candidate> best;
};

DseResult run_dse(const FlowTemplate& tmpl, const std::vector<Ordering>& orderings, const DseConfig& cfg,
                  const EvaluationBackend& backend);

/// Feasible candidates non-dominated in (accuracy max, dsp min, lut min, latency min).
std::vector<Candidate> pareto_candidates(std::span<const Candidate> history);
std::optional<Candidate> select_best(std::span<const Candidate> pareto, SelectPolicy policy);

struct GridSpec {
  std::array<int, 3> counts{7, 7, 7};
  ThetaBounds bounds;
};

/// Inclusive linspace per component (a single point sits at the midpoint);
/// alpha_p varies slowest.
std::vector<Theta> grid_points(const GridSpec& grid);

std::vector<Candidate> grid_search(const FlowTemplate& tmpl, const Ordering& ordering, const GridSpec& grid,
                                   const DseConfig& cfg, const EvaluationBackend& backend);
std::vector<Candidate> stochastic_grid_search(const FlowTemplate& tmpl, const Ordering& ordering,
                                              const GridSpec& grid, int sample_count, std::uint64_t seed,
                                              const DseConfig& cfg, const EvaluationBackend& backend);

/// Hypervolume of the feasible (accuracy max, dsp min) front.
double accuracy_dsp_hypervolume(std::span<const Candidate> history, std::span<const double> reference);

nlohmann::json to_json(const Candidate& c, bool with_wall_time = true);
Candidate candidate_from_json(const nlohmann::json& j);
std::string history_jsonl(std::span<const Candidate> history, bool with_wall_time = true);
/// Throws std::invalid_argument with the line number on malformed input.
std::vector<Candidate> parse_history_jsonl(std::string_view text);

inline constexpr std::string_view kParetoCsvHeader =
    "ordering,alpha_p,alpha_s,alpha_q,accuracy,latency_ns,dsp,lut,ff,bram,score";
std::string pareto_csv(std::span<const Candidate> rows);

}  // namespace flowforge
