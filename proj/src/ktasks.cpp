#include "flowforge/ktasks.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace flowforge {

namespace {

double param_or(const NumericParams& p, std::string_view name, double fallback) {
  auto it = p.find(name);
  return it == p.end() ? fallback : it->second;
}

const Metrics& require_metrics(const MetaModel& mm, std::string_view predicate) {
  const ModelEntry* e = latest_measured_entry(mm);
  if (!e) throw std::runtime_error("predicate '" + std::string(predicate) + "' needs metrics but the model space has none");
  return *e->metrics;
}

bool pred_overmapped(const MetaModel& mm, const NumericParams& p, std::string_view) {
  return require_metrics(mm, "overmapped").max_utilization() > param_or(p, "u_max", 1.0);
}

bool pred_acc_loss_exceeds(const MetaModel& mm, const NumericParams& p, std::string_view) {
  auto it = p.find("max");
  if (it == p.end()) throw std::invalid_argument("acc_loss_exceeds needs a 'max' parameter");
  return require_metrics(mm, "acc_loss_exceeds").accuracy_loss > it->second;
}

// True while this BRANCH instance has taken port 0 fewer than `times` times.
bool pred_loop_count(const MetaModel& mm, const NumericParams& p, std::string_view instance) {
  const double times = param_or(p, "times", 1.0);
  int taken = 0;
  for (const auto& r : mm.log.records())
    if (r.kind == EventKind::Branched && r.task == instance && r.detail.rfind("port=0", 0) == 0) ++taken;
  return taken < times;
}

bool pred_vendor_a(const MetaModel& mm, const NumericParams&, std::string_view instance) {
  return mm.cfg.resolve_string(instance, "Branch", "target_vendor").value_or("A") == "A";
}

// Raises each type-scoped tolerate_acc_loss that is defined, capped.
void act_relax_tolerances(MetaModel& mm, const NumericParams& p, std::string_view) {
  struct Target {
    const char* type;
    const char* suffix;
  };
  static constexpr Target targets[] = {{"Pruning", "p"}, {"Scaling", "s"}, {"Quantization", "q"}};
  const double delta = param_or(p, "delta", 0.01);
  const double cap = param_or(p, "cap", 1.0);
  if (delta < 0.0) throw std::invalid_argument("relax_tolerances delta must be non-negative");
  for (const auto& t : targets) {
    const std::string key = type_key(t.type, "tolerate_acc_loss");
    const ConfigValue* v = mm.cfg.find(key);
    if (!v) continue;
    const double* old = std::get_if<double>(v);
    if (!old) throw std::invalid_argument("'" + key + "' is not a number");
    const double d = param_or(p, std::string("delta_") + t.suffix, delta);
    const double c = param_or(p, std::string("cap_") + t.suffix, cap);
    if (d < 0.0) throw std::invalid_argument("relax_tolerances delta must be non-negative");
    if (c < *old) throw std::invalid_argument("relax_tolerances cap is below the current '" + key + "'");
    mm.cfg.set(key, std::min(c, *old + d));
  }
}

struct Candidate {
  const ModelEntry* entry;
  std::size_t input;
};

std::vector<Candidate> gather(std::span<const MetaModel> inputs) {
  if (inputs.empty()) throw std::invalid_argument("REDUCE needs at least one input");
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto cands = reduce_candidates(inputs[i]);
    if (cands.empty()) throw std::runtime_error("REDUCE input " + std::to_string(i) + " has no measured kernel");
    for (const ModelEntry* e : cands) {
      const bool dup = std::any_of(out.begin(), out.end(), [&](const Candidate& c) {
        return c.entry->payload == e->payload && c.entry->metrics == e->metrics;
      });
      if (!dup) out.push_back({e, i});
    }
  }
  return out;
}

std::vector<double> objective_values(const Metrics& m, const std::vector<Objective>& objectives) {
  std::vector<double> v;
  for (const auto& o : objectives) {
    auto x = metric_value(m, o.metric);
    if (!x) throw std::invalid_argument("unknown metric '" + o.metric + "' in REDUCE objectives");
    v.push_back(*x);
  }
  return v;
}

// Log of the first input followed by what each other input appended after
// the history it shares with the first.
ExecutionLog merge_logs(std::span<const MetaModel> inputs) {
  ExecutionLog log = inputs.front().log;
  const auto& base = inputs.front().log.records();
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    const auto& recs = inputs[i].log.records();
    std::size_t k = 0;
    while (k < recs.size() && k < base.size() && recs[k] == base[k]) ++k;
    for (; k < recs.size(); ++k) log.append_record(recs[k]);
  }
  return log;
}

MetaModel assemble(std::span<const MetaModel> inputs, const std::vector<const ModelEntry*>& kept) {
  MetaModel out;
  out.cfg = inputs.front().cfg;
  out.log = merge_logs(inputs);
  for (const ModelEntry* e : kept) out.space.put(e->stage, e->payload, e->metrics, e->producer);
  return out;
}

MetaModel reduce_pareto(std::span<const MetaModel> inputs, const ReduceSpec& spec) {
  if (spec.objectives.empty()) throw std::invalid_argument("pareto REDUCE needs at least one objective");
  const auto cands = gather(inputs);
  std::vector<Direction> dirs;
  for (const auto& o : spec.objectives) dirs.push_back(o.direction);
  std::vector<ObjectivePoint> pts;
  for (std::size_t i = 0; i < cands.size(); ++i)
    pts.push_back({objective_values(*cands[i].entry->metrics, spec.objectives), dirs, i});
  std::vector<const ModelEntry*> kept;
  for (std::size_t i : frontier_indices(pts)) kept.push_back(cands[i].entry);
  return assemble(inputs, kept);
}

// Weighted sum of min-max normalized objectives oriented so larger is better.
MetaModel reduce_best_score(std::span<const MetaModel> inputs, const ReduceSpec& spec) {
  if (spec.objectives.empty()) throw std::invalid_argument("best_score REDUCE needs at least one objective");
  const auto cands = gather(inputs);
  std::vector<std::vector<double>> vals;
  for (const auto& c : cands) vals.push_back(objective_values(*c.entry->metrics, spec.objectives));
  std::vector<double> score(cands.size(), 0.0);
  for (std::size_t j = 0; j < spec.objectives.size(); ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& v : vals) lo = std::min(lo, v[j]), hi = std::max(hi, v[j]);
    const double w = param_or(spec.params, "w" + std::to_string(j), 1.0);
    if (w < 0.0) throw std::invalid_argument("best_score weights must be non-negative");
    for (std::size_t i = 0; i < cands.size(); ++i) {
      double n = hi > lo ? (vals[i][j] - lo) / (hi - lo) : 0.5;
      if (spec.objectives[j].direction == Direction::Min) n = 1.0 - n;
      score[i] += w * n;
    }
  }
  const auto best = std::max_element(score.begin(), score.end()) - score.begin();
  return assemble(inputs, {cands[static_cast<std::size_t>(best)].entry});
}

Registry make_builtin() {
  Registry r;
  r.add_predicate("overmapped", pred_overmapped);
  r.add_predicate("acc_loss_exceeds", pred_acc_loss_exceeds);
  r.add_predicate("always_true", [](const MetaModel&, const NumericParams&, std::string_view) { return true; });
  r.add_predicate("always_false", [](const MetaModel&, const NumericParams&, std::string_view) { return false; });
  r.add_predicate("loop_count", pred_loop_count);
  r.add_predicate("vendor_a", pred_vendor_a);
  r.add_action("relax_tolerances", act_relax_tolerances);
  r.add_reducer("pareto", reduce_pareto);
  r.add_reducer("best_score", reduce_best_score);
  return r;
}

template <class Map>
std::vector<std::string> keys_of(const Map& m) {
  std::vector<std::string> out;
  for (const auto& [k, v] : m) out.push_back(k);
  return out;
}

template <class Map>
auto lookup(const Map& m, std::string_view name) -> const typename Map::mapped_type* {
  auto it = m.find(name);
  return it == m.end() ? nullptr : &it->second;
}

}  // namespace

std::vector<Objective> parse_objectives(std::string_view text) {
  std::vector<Objective> out;
  const auto known = metric_names();
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto item = text.substr(pos, end - pos);
    const auto colon = item.find(':');
    if (item.empty() || colon == std::string_view::npos)
      throw std::invalid_argument("objective '" + std::string(item) + "' must look like metric:min or metric:max");
    Objective o;
    o.metric = std::string(item.substr(0, colon));
    const auto dir = item.substr(colon + 1);
    if (dir == "max") o.direction = Direction::Max;
    else if (dir == "min") o.direction = Direction::Min;
    else throw std::invalid_argument("objective direction must be min or max, got '" + std::string(dir) + "'");
    if (!metric_value(Metrics{}, o.metric)) throw std::invalid_argument("unknown metric '" + o.metric + "'");
    out.push_back(std::move(o));
    pos = end + 1;
  }
  return out;
}

void Registry::add_predicate(std::string name, PredicateFn fn) { predicates_[std::move(name)] = std::move(fn); }
void Registry::add_action(std::string name, ActionFn fn) { actions_[std::move(name)] = std::move(fn); }
void Registry::add_reducer(std::string name, ReduceFn fn) { reducers_[std::move(name)] = std::move(fn); }

const PredicateFn* Registry::predicate(std::string_view name) const { return lookup(predicates_, name); }
const ActionFn* Registry::action(std::string_view name) const { return lookup(actions_, name); }
const ReduceFn* Registry::reducer(std::string_view name) const { return lookup(reducers_, name); }

std::vector<std::string> Registry::predicate_names() const { return keys_of(predicates_); }
std::vector<std::string> Registry::action_names() const { return keys_of(actions_); }
std::vector<std::string> Registry::reducer_names() const { return keys_of(reducers_); }

const Registry& Registry::builtin() {
  static const Registry r = make_builtin();
  return r;
}

const ModelEntry* latest_measured_entry(const MetaModel& mm) {
  const auto& es = mm.space.entries();
  for (auto it = es.rbegin(); it != es.rend(); ++it)
    if (it->stage == Stage::Kernel && it->metrics) return &*it;
  for (auto it = es.rbegin(); it != es.rend(); ++it)
    if (it->metrics) return &*it;
  return nullptr;
}

int branch_decide(MetaModel& mm, const PredicateSpec& predicate, const ActionSpec* action, std::string_view instance,
                  const Registry& registry) {
  const PredicateFn* pred = registry.predicate(predicate.name);
  if (!pred) throw std::invalid_argument("unknown predicate '" + predicate.name + "'");
  const ActionFn* act = nullptr;
  if (action) {
    act = registry.action(action->name);
    if (!act) throw std::invalid_argument("unknown action '" + action->name + "'");
  }
  const bool holds = (*pred)(mm, predicate.params, instance);
  std::string detail = std::string("port=") + (holds ? "0" : "1") + " predicate=" + predicate.name;
  if (holds && act) {
    (*act)(mm, action->params, instance);
    detail += " action=" + action->name;
  }
  mm.log.append(std::string(instance), EventKind::Branched, std::move(detail));
  return holds ? 0 : 1;
}

std::vector<const ModelEntry*> reduce_candidates(const MetaModel& mm) {
  std::vector<const ModelEntry*> out;
  for (const auto& e : mm.space.entries())
    if (e.stage == Stage::Kernel && e.metrics) out.push_back(&e);
  return out;
}

MetaModel reduce_apply(std::span<const MetaModel> inputs, const ReduceSpec& spec, const Registry& registry) {
  const ReduceFn* fn = registry.reducer(spec.name);
  if (!fn) throw std::invalid_argument("unknown reducer '" + spec.name + "'");
  return (*fn)(inputs, spec);
}

FlowOutput stop_extract(const MetaModel& mm) {
  const ModelEntry* e = mm.space.latest(Stage::Kernel);
  if (!e) e = mm.space.latest(Stage::Network);
  if (!e) throw std::runtime_error("nothing to extract: the model space is empty");
  return FlowOutput{*e, mm};
}

}  // namespace flowforge
