#include <doctest.h>

#include <algorithm>
#include <random>

#include "flowforge/flowfile.hpp"
#include "flowforge/flowgraph.hpp"
#include "support/fixtures.hpp"

using namespace flowforge;

namespace {

bool mentions(const std::vector<Diagnostic>& diags, std::string_view locus, std::string_view text) {
  return std::any_of(diags.begin(), diags.end(), [&](const Diagnostic& d) {
    return d.locus == locus && d.message.find(text) != std::string::npos;
  });
}

ConfigStore pruning_cfg() {
  ConfigStore cfg;
  cfg.set("Pruning::tolerate_acc_loss", 0.02);
  cfg.set("Pruning::pruning_rate_thresh", 0.02);
  cfg.set("Scaling::tolerate_acc_loss", 0.02);
  cfg.set("Quantization::tolerate_acc_loss", 0.01);
  return cfg;
}

// gen -> join -> prune -> hls -> B; B port 0 loops back, port 1 stops.
FlowGraph loop_graph(double times) {
  FlowBuilder b;
  b.task("gen", TaskKind::ModelGen)
      .task("join", TaskKind::Join)
      .task("prune", TaskKind::Pruning)
      .task("hls", TaskKind::HlsMockA)
      .branch("B", PredicateSpec{"loop_count", {{"times", times}}})
      .task("stop", TaskKind::Stop)
      .chain({"gen", "join", "prune", "hls", "B"})
      .edge("B", "join", 0)
      .edge("B", "stop", 1);
  return b.graph();
}

FlowGraph fork_graph() {
  FlowBuilder b;
  b.task("gen", TaskKind::ModelGen)
      .task("fork", TaskKind::Fork)
      .task("s1", TaskKind::Scaling)
      .task("p1", TaskKind::Pruning)
      .task("h1", TaskKind::HlsMockA)
      .task("p2", TaskKind::Pruning)
      .task("s2", TaskKind::Scaling)
      .task("h2", TaskKind::HlsMockA)
      .reduce("red", ReduceSpec{"pareto", parse_objectives("accuracy:max,dsp:min"), {}})
      .task("stop", TaskKind::Stop)
      .edge("gen", "fork")
      .edge("fork", "s1", 0)
      .edge("fork", "p2", 1)
      .chain({"s1", "p1", "h1", "red"})
      .chain({"p2", "s2", "h2", "red"})
      .edge("red", "stop");
  return b.graph();
}

std::size_t count(const ExecutionLog& log, std::string_view task, EventKind kind) {
  return static_cast<std::size_t>(std::count_if(log.records().begin(), log.records().end(),
                                                [&](const LogRecord& r) { return r.task == task && r.kind == kind; }));
}

// The log without timestamps; ordering across parallel branches may differ.
std::vector<std::string> log_multiset(const ExecutionLog& log) {
  std::vector<std::string> out;
  for (const auto& r : log.records()) out.push_back(r.task + "|" + std::string(to_string(r.kind)) + "|" + r.detail);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("task kinds round trip through their flow-file spelling") {
  for (auto k : all_task_kinds()) CHECK(parse_task_kind(to_string(k)) == k);
  CHECK(parse_task_kind("O_PRUNING") == TaskKind::Pruning);
  CHECK_FALSE(parse_task_kind("O_PRUNE"));
}

TEST_CASE("validation: BRANCH with three outbound edges") {
  FlowBuilder b;
  b.task("gen", TaskKind::ModelGen)
      .branch("B", PredicateSpec{"always_true", {}})
      .task("s1", TaskKind::Stop)
      .task("s2", TaskKind::Stop)
      .task("s3", TaskKind::Stop)
      .edge("gen", "B")
      .edge("B", "s1", 0)
      .edge("B", "s2", 1)
      .edge("B", "s3", 2);
  CHECK(mentions(validate(b.graph()), "B", "multiplicity violation"));
}

TEST_CASE("validation: cycle without a BRANCH") {
  FlowBuilder b;
  b.task("gen", TaskKind::ModelGen)
      .task("join", TaskKind::Join)
      .task("p", TaskKind::Pruning)
      .task("q", TaskKind::Pruning)
      .chain({"gen", "join", "p", "q", "join"});
  const auto d = validate(b.graph());
  CHECK(std::any_of(d.begin(), d.end(),
                    [](const Diagnostic& x) { return x.message.find("non-terminating cycle") != std::string::npos; }));
}

TEST_CASE("validation: duplicates, dangling edges and missing source") {
  FlowBuilder dup;
  dup.task("a", TaskKind::ModelGen).task("a", TaskKind::Stop).edge("a", "a");
  CHECK(mentions(validate(dup.graph()), "a", "duplicate instance name"));

  FlowBuilder dangling;
  dangling.task("gen", TaskKind::ModelGen).task("stop", TaskKind::Stop).chain({"gen", "stop"}).edge("gen", "nowhere");
  CHECK(mentions(validate(dangling.graph()), "gen -> nowhere", "dangling edge"));

  FlowBuilder cyclic;
  cyclic.task("j", TaskKind::Join)
      .branch("B", PredicateSpec{"always_true", {}})
      .task("stop", TaskKind::Stop)
      .edge("j", "B")
      .edge("B", "j", 0)
      .edge("B", "stop", 1);
  CHECK(mentions(validate(cyclic.graph()), "", "missing source"));
}

TEST_CASE("validation: unknown predicate, reducer or metric") {
  FlowBuilder b;
  b.task("gen", TaskKind::ModelGen)
      .branch("B", PredicateSpec{"nope", {}})
      .reduce("R", ReduceSpec{"pareto", {{"bogus", Direction::Max}}, {}})
      .task("s1", TaskKind::Stop)
      .edge("gen", "B")
      .edge("B", "R", 0)
      .edge("B", "s1", 1);
  const auto d = validate(b.graph());
  CHECK(mentions(d, "B", "unknown predicate"));
  CHECK(mentions(d, "R", "unknown metric"));
}

TEST_CASE("the bundled flows validate") {
  for (const char* f : {"flows/pruning_loop.flow", "flows/fork_orderings.flow", "flows/bottom_up.flow",
                        "flows/vendor_branch.flow", "flows/dse_template.flow"}) {
    CAPTURE(f);
    const auto file = load_flow_file(oracle::source_path(f));
    CHECK(validate(file.graph).empty());
    CHECK(check_required_parameters(file.graph, file.effective_cfg()).empty());
  }
}

TEST_CASE("ModelGen straight to STOP selects the network") {
  FlowBuilder b;
  b.task("gen", TaskKind::ModelGen).task("stop", TaskKind::Stop).chain({"gen", "stop"});
  const auto r = run(b.graph(), {}, fixture::jet_backend(), {.workers = 1});
  REQUIRE(r.ok());
  REQUIRE(r.outputs.size() == 1);
  CHECK(r.outputs[0].output.selected.stage == Stage::Network);
  CHECK(r.outputs[0].output.selected.version == 1);
}

TEST_CASE("loop_count 2 runs the loop body three times") {
  const auto r = run(loop_graph(2), pruning_cfg(), fixture::jet_backend(), {.workers = 1});
  REQUIRE(r.ok());
  CHECK(count(r.log, "prune", EventKind::Started) == 3);
  CHECK(count(r.log, "hls", EventKind::Finished) == 3);
  CHECK(count(r.log, "B", EventKind::Branched) == 3);
  REQUIRE(r.outputs.size() == 1);
  CHECK(r.outputs[0].task == "stop");
}

TEST_CASE("FORK delivers two tokens with distinct paths to the REDUCE") {
  const auto r = run(fork_graph(), pruning_cfg(), fixture::jet_backend(), {.workers = 2});
  REQUIRE(r.ok());
  REQUIRE(r.reductions.size() == 1);
  const auto& red = r.reductions[0];
  REQUIRE(red.input_path_ids.size() == 2);
  CHECK(red.input_path_ids[0] != red.input_path_ids[1]);
  CHECK(r.outputs.size() == 1);
  CHECK(r.tokens_created == 2);
  CHECK(r.tokens_merged == 1);
  CHECK(r.tokens_stopped == 1);
  CHECK(count(r.log, "p1", EventKind::Finished) == 1);
  CHECK(count(r.log, "p2", EventKind::Finished) == 1);
}

TEST_CASE("property: tokens are conserved") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 12; ++round) {
    FlowGraph g;
    switch (rng() % 3) {
      case 0: g = loop_graph(static_cast<double>(rng() % 4)); break;
      case 1: g = fork_graph(); break;
      default: g = load_flow_file(oracle::source_path("flows/fork_orderings.flow")).graph; break;
    }
    const auto r = run(g, pruning_cfg(), fixture::jet_backend(), {.workers = 1 + static_cast<int>(rng() % 3)});
    REQUIRE(r.ok());
    CHECK(r.tokens_created == r.tokens_stopped + r.tokens_merged);
    CHECK(r.outputs.size() == r.tokens_stopped);
  }
}

TEST_CASE("runs are deterministic and independent of the worker count") {
  const auto g = fork_graph();
  const auto one = run(g, pruning_cfg(), fixture::jet_backend(), {.workers = 1});
  const auto many = run(g, pruning_cfg(), fixture::jet_backend(), {.workers = 4});
  const auto again = run(g, pruning_cfg(), fixture::jet_backend(), {.workers = 4});
  REQUIRE(one.ok());
  REQUIRE(many.ok());
  REQUIRE(one.outputs.size() == many.outputs.size());
  for (std::size_t i = 0; i < one.outputs.size(); ++i) {
    CHECK(one.outputs[i].task == many.outputs[i].task);
    CHECK(one.outputs[i].output.selected.version == many.outputs[i].output.selected.version);
    CHECK(one.outputs[i].output.mm.space == many.outputs[i].output.mm.space);
    CHECK(many.outputs[i].output.mm.space == again.outputs[i].output.mm.space);
  }
  CHECK(log_multiset(one.log) == log_multiset(many.log));
  CHECK(log_multiset(many.log) == log_multiset(again.log));
}

TEST_CASE("a runaway loop is cut by max_hops") {
  FlowBuilder b;
  b.task("gen", TaskKind::ModelGen)
      .task("join", TaskKind::Join)
      .branch("B", PredicateSpec{"always_true", {}})
      .task("stop", TaskKind::Stop)
      .chain({"gen", "join", "B"})
      .edge("B", "join", 0)
      .edge("B", "stop", 1);
  const auto r = run(b.graph(), {}, fixture::jet_backend(), {.workers = 1, .max_hops = 50});
  REQUIRE_FALSE(r.ok());
  CHECK(r.error->find("max_hops") != std::string::npos);
  CHECK(r.outputs.empty());
  CHECK(r.log.size() > 0);
}

TEST_CASE("a missing required parameter fails before any task runs") {
  ConfigStore cfg;
  cfg.set("Pruning::tolerate_acc_loss", 0.02);
  try {
    run(loop_graph(0), cfg, fixture::jet_backend());
    FAIL("expected FlowError");
  } catch (const FlowError& e) {
    CHECK(mentions(e.diagnostics(), "prune", "pruning_rate_thresh"));
  }
  // Task params seeded as instance keys satisfy the requirement.
  auto g = loop_graph(0);
  for (auto& t : g.tasks)
    if (t.name == "prune") t.params["pruning_rate_thresh"] = 0.05;
  CHECK(check_required_parameters(g, cfg).empty());
}

TEST_CASE("an invalid graph is rejected with diagnostics") {
  FlowBuilder b;
  b.task("gen", TaskKind::ModelGen).edge("gen", "ghost");
  CHECK_THROWS_AS(run(b.graph(), {}, fixture::jet_backend()), FlowError);
}

TEST_CASE("flow graph json round trip") {
  auto g = fork_graph();
  g.entry = "gen";
  g.tasks[2].params["tolerate_acc_loss"] = 0.5;
  g.tasks[3].params["label"] = std::string("x");
  CHECK(flowgraph_from_json(nlohmann::json::parse(to_json(g).dump())) == g);
  const auto lg = loop_graph(3);
  CHECK(flowgraph_from_json(to_json(lg)) == lg);
  CHECK_THROWS_AS(flowgraph_from_json(nlohmann::json::parse(R"({"tasks": 3})")), std::invalid_argument);
}

TEST_CASE("flow file parsing errors") {
  const std::filesystem::path base = oracle::source_path("flows");
  CHECK_THROWS_AS(parse_flow_file("{", base), ParseError);
  CHECK_THROWS_AS(parse_flow_file(R"({"schema_version": 2, "benchmark": "x", "tasks": [], "edges": []})", base),
                  ParseError);
  CHECK_THROWS_AS(
      parse_flow_file(R"({"schema_version": 1, "benchmark": "x", "tasks": [{"name":"a","kind":"NOPE"}], "edges": []})",
                      base),
      ParseError);
}
