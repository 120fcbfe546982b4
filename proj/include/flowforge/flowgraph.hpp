#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flowforge/ktasks.hpp"
#include "flowforge/metamodel.hpp"
#include "flowforge/netmodel.hpp"

namespace flowforge {

enum class TaskKind {
  Join,
  Branch,
  Fork,
  Reduce,
  Stop,
  Pruning,
  Scaling,
  Quantization,
  ModelGen,
  HlsMockA,
  HlsMockB,
};

/// Flow-file spelling: JOIN, O_PRUNING, LAMBDA_HLS_MOCK_A, ...
std::string_view to_string(TaskKind kind);
std::optional<TaskKind> parse_task_kind(std::string_view text);
/// The task-type scope used for `Type::param` configuration keys.
std::string_view task_type_name(TaskKind kind);
std::vector<TaskKind> all_task_kinds();

struct TaskDecl {
  std::string name;
  TaskKind kind = TaskKind::Join;
  // Seeded into the configuration as `name@param` before the run.
  std::map<std::string, ConfigValue, std::less<>> params;
  std::optional<PredicateSpec> predicate;  // BRANCH
  std::optional<ActionSpec> action;        // BRANCH
  std::optional<ReduceSpec> reduce;        // REDUCE

  bool operator==(const TaskDecl&) const = default;
};

struct Edge {
  std::string from;
  int port = 0;
  std::string to;

  bool operator==(const Edge&) const = default;
};

struct FlowGraph {
  std::vector<TaskDecl> tasks;
  std::vector<Edge> edges;
  std::string entry;  // empty: the first task without inbound edges

  const TaskDecl* find(std::string_view name) const;
  /// The task the initial token is delivered to, or nullptr.
  const TaskDecl* entry_task() const;
  bool operator==(const FlowGraph&) const = default;
};

struct Diagnostic {
  std::string locus;  // task name or "a -> b" for edges; empty for graph-wide issues
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

std::string to_string(const Diagnostic& d);

std::vector<Diagnostic> validate(const FlowGraph& graph, const Registry& registry = Registry::builtin());

/// Required O-task parameters missing from `cfg` after task params are seeded.
std::vector<Diagnostic> check_required_parameters(const FlowGraph& graph, const ConfigStore& cfg);

/// The configuration a run starts from: task params as instance keys, then
/// `cfg` on top.
ConfigStore seeded_config(const FlowGraph& graph, const ConfigStore& cfg);

class FlowError : public std::runtime_error {
 public:
  FlowError(const std::string& what, std::vector<Diagnostic> diagnostics = {})
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

struct ForkFrame {
  std::int64_t activation = 0;  // unique per FORK firing
  int branch = 0;
  int fanout = 0;
  bool operator==(const ForkFrame&) const = default;
};

struct Token {
  MetaModel mm;
  std::int64_t path_id = 0;
  int hop_count = 0;
  std::vector<ForkFrame> lineage;
  std::vector<int> route;  // branch index taken at every FORK passed, for ordering outputs
};

struct StopOutput {
  std::string task;
  std::int64_t path_id = 0;
  std::vector<int> route;
  FlowOutput output;
};

struct ReductionRecord {
  std::string task;
  std::vector<int> route;                    // route of the merged token
  std::vector<std::int64_t> input_path_ids;  // in branch order
  std::vector<MetaModel> inputs;
};

struct FlowResult {
  std::vector<StopOutput> outputs;  // ordered by stop task, then route
  ExecutionLog log;
  std::vector<ReductionRecord> reductions;  // ordered by task, then route
  std::optional<std::string> error;
  std::size_t tokens_created = 0;
  std::size_t tokens_stopped = 0;
  std::size_t tokens_merged = 0;  // a REDUCE over k tokens absorbs k - 1

  bool ok() const { return !error.has_value(); }
};

struct RunOptions {
  int workers = 0;  // 0: available hardware parallelism
  int max_hops = 1000;
  const Registry* registry = nullptr;  // nullptr: the built-in registry
};

/// Executes the flow. Throws FlowError before any task runs when the graph
/// is invalid or a required parameter is missing; failures during the run
/// are reported through FlowResult::error with the partial log.
FlowResult run(const FlowGraph& graph, const ConfigStore& cfg, const EvaluationBackend& backend,
               const RunOptions& options = {});

/// Programmatic construction of a FlowGraph.
class FlowBuilder {
 public:
  FlowBuilder& task(std::string name, TaskKind kind, std::map<std::string, ConfigValue, std::less<>> params = {});
  FlowBuilder& branch(std::string name, PredicateSpec predicate, std::optional<ActionSpec> action = std::nullopt);
  FlowBuilder& reduce(std::string name, ReduceSpec spec);
  FlowBuilder& edge(std::string from, std::string to, int port = 0);
  /// Port-0 edges along the sequence.
  FlowBuilder& chain(std::initializer_list<std::string_view> names);
  FlowBuilder& entry(std::string name);
  const FlowGraph& graph() const { return graph_; }

 private:
  FlowGraph graph_;
};

nlohmann::json to_json(const FlowGraph& graph);
/// Throws std::invalid_argument on malformed content.
FlowGraph flowgraph_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FlowResult& result);

}  // namespace flowforge
