#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowforge/metamodel.hpp"
#include "flowforge/pareto.hpp"

namespace flowforge {

using NumericParams = std::map<std::string, double, std::less<>>;

struct PredicateSpec {
  std::string name;
  NumericParams params;
  bool operator==(const PredicateSpec&) const = default;
};

struct ActionSpec {
  std::string name;
  NumericParams params;
  bool operator==(const ActionSpec&) const = default;
};

struct Objective {
  std::string metric;
  Direction direction = Direction::Max;
  bool operator==(const Objective&) const = default;
};

struct ReduceSpec {
  std::string name;  // "pareto" or "best_score"
  std::vector<Objective> objectives;
  NumericParams params;
  bool operator==(const ReduceSpec&) const = default;
};

/// Parses "accuracy:max,dsp:min". Throws std::invalid_argument on unknown
/// metrics or directions.
std::vector<Objective> parse_objectives(std::string_view text);

using PredicateFn = std::function<bool(const MetaModel&, const NumericParams&, std::string_view instance)>;
using ActionFn = std::function<void(MetaModel&, const NumericParams&, std::string_view instance)>;
using ReduceFn = std::function<MetaModel(std::span<const MetaModel>, const ReduceSpec&)>;

/// Named predicates, actions and reducers a flow file may reference.
class Registry {
 public:
  void add_predicate(std::string name, PredicateFn fn);
  void add_action(std::string name, ActionFn fn);
  void add_reducer(std::string name, ReduceFn fn);

  const PredicateFn* predicate(std::string_view name) const;
  const ActionFn* action(std::string_view name) const;
  const ReduceFn* reducer(std::string_view name) const;

  std::vector<std::string> predicate_names() const;
  std::vector<std::string> action_names() const;
  std::vector<std::string> reducer_names() const;

  /// overmapped, acc_loss_exceeds, always_true, always_false, loop_count,
  /// vendor_a; relax_tolerances; pareto, best_score.
  static const Registry& builtin();

 private:
  std::map<std::string, PredicateFn, std::less<>> predicates_;
  std::map<std::string, ActionFn, std::less<>> actions_;
  std::map<std::string, ReduceFn, std::less<>> reducers_;
};

/// Metrics of the newest kernel entry, else of the newest entry with metrics.
const ModelEntry* latest_measured_entry(const MetaModel& mm);

/// Evaluates the predicate; when it holds and an action is given, the
/// action edits the CFG. Appends one `branched` record. Returns the port:
/// 0 when the predicate holds, 1 otherwise.
int branch_decide(MetaModel& mm, const PredicateSpec& predicate, const ActionSpec* action,
                  std::string_view instance, const Registry& registry = Registry::builtin());

/// Kernel entries carrying metrics: the candidates a REDUCE compares.
std::vector<const ModelEntry*> reduce_candidates(const MetaModel& mm);

MetaModel reduce_apply(std::span<const MetaModel> inputs, const ReduceSpec& spec,
                       const Registry& registry = Registry::builtin());

struct FlowOutput {
  ModelEntry selected;
  MetaModel mm;
};

/// Latest entry of the most refined stage present.
FlowOutput stop_extract(const MetaModel& mm);

}  // namespace flowforge
