#include "flowforge/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "flowforge/dse.hpp"
#include "flowforge/flowfile.hpp"
#include "flowforge/flowgraph.hpp"
#include "flowforge/pareto.hpp"

#ifndef FLOWFORGE_VERSION
#define FLOWFORGE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace flowforge {

namespace {

// Raised for bad option values discovered after CLI11 has parsed.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream o(path, std::ios::binary);
  if (!o) throw std::runtime_error("cannot write " + path.string());
  o << content;
  if (!o) throw std::runtime_error("failed writing " + path.string());
}

std::vector<double> parse_numbers(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0') throw UsageError(std::string("invalid number '") + item + "' in " + what);
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what);
  return out;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("FLOWFORGE_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw UsageError("FLOWFORGE_SEED must be a non-negative integer");
    return v;
  }
  return 0;
}

struct Loaded {
  FlowFile flow;
  std::string flow_text;
  std::string benchmark_text;
  Benchmark bench;
};

Loaded load(const std::string& path) {
  Loaded l;
  l.flow_text = read_text_file(path);
  l.flow = parse_flow_file(l.flow_text, fs::path(path).parent_path());
  l.benchmark_text = read_text_file(l.flow.benchmark_path);
  try {
    l.bench = parse_benchmark(nlohmann::json::parse(l.benchmark_text));
  } catch (const std::exception& e) {
    throw ParseError("benchmark " + l.flow.benchmark_path.string() + ": " + e.what());
  }
  return l;
}

nlohmann::json manifest(const std::string& command, const Loaded& l, std::uint64_t seed, const std::string& started,
                        const std::vector<std::string>& outputs, nlohmann::json config) {
  return {{"tool", "flowforge"},
          {"version", tool_version()},
          {"command", command},
          {"flow_sha256", sha256_hex(l.flow_text)},
          {"benchmark_sha256", sha256_hex(l.benchmark_text)},
          {"benchmark", l.bench.name},
          {"seed", seed},
          {"started_at", started},
          {"finished_at", utc_now()},
          {"config", std::move(config)},
          {"outputs", outputs}};
}

void apply_common_dse_options(DseConfig& cfg, const std::string& weights, const std::string& limits,
                              const std::string& bounds) {
  if (!weights.empty()) {
    auto w = parse_numbers(weights, "--weights");
    if (w.size() != 4) throw UsageError("--weights takes four numbers");
    std::copy(w.begin(), w.end(), cfg.weights.begin());
    try {
      check_weights(cfg.weights);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (!limits.empty()) {
    auto v = parse_numbers(limits, "--limits");
    if (v.size() != 3) throw UsageError("--limits takes u_max,t_max,acc_loss_max");
    cfg.limits = {v[0], v[1], v[2]};
  }
  if (!bounds.empty()) {
    auto v = parse_numbers(bounds, "--bounds");
    if (v.size() == 2) v = {v[0], v[1], v[0], v[1], v[0], v[1]};
    if (v.size() != 6) throw UsageError("--bounds takes lo,hi or six numbers");
    for (std::size_t i = 0; i < 3; ++i) cfg.bounds.range[i] = {v[2 * i], v[2 * i + 1]};
    try {
      cfg.bounds.check();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
}

nlohmann::json dse_config_json(const DseConfig& c) {
  nlohmann::json bounds = nlohmann::json::array();
  for (const auto& r : c.bounds.range) bounds.push_back({r.lo, r.hi});
  return {{"budget", c.budget},
          {"initial_design", c.initial_design},
          {"weights", c.weights},
          {"limits",
           {{"u_max", c.limits.u_max},
            {"t_max", std::isfinite(c.limits.t_max) ? nlohmann::json(c.limits.t_max) : nlohmann::json("inf")},
            {"acc_loss_max", c.limits.acc_loss_max}}},
          {"stall_limit", c.stall_limit},
          {"seed", c.seed},
          {"bounds", bounds},
          {"pool_size", c.pool_size},
          {"xi", c.xi}};
}

std::string describe_candidate(const Candidate& c) {
  return "ordering=" + to_string(c.ordering) + " alpha_p=" + num(c.theta.alpha_p) + " alpha_s=" +
         num(c.theta.alpha_s) + " alpha_q=" + num(c.theta.alpha_q) + " accuracy=" + num(c.metrics.accuracy) +
         " dsp=" + std::to_string(c.metrics.dsp_used) + " lut=" + std::to_string(c.metrics.lut_used) +
         " score=" + num(c.score);
}

std::string summary_text(const FlowResult& r, const Loaded& l) {
  std::ostringstream s;
  s << "benchmark: " << l.bench.name << "\n";
  s << "outputs: " << r.outputs.size() << "\n";
  for (const auto& o : r.outputs) {
    const auto& sel = o.output.selected;
    s << "\nstop " << o.task << " (path " << o.path_id << ")\n";
    s << "  selected: " << to_string(sel.stage) << " v" << sel.version << " from " << sel.producer << "\n";
    if (const ModelEntry* net = o.output.mm.space.latest(Stage::Network)) {
      s << "  pruning_rate: " << num(net->network().pruning_rate) << "\n";
      s << "  scale_factor: " << num(net->network().scale_factor) << "\n";
    }
    if (sel.stage == Stage::Kernel) {
      const auto& k = sel.kernel();
      s << "  device: " << k.device << "\n";
      for (const auto& vl : k.virtual_layers)
        s << "  precision " << vl.id << ": weights=" << to_string(vl.precisions.weights)
          << " biases=" << to_string(vl.precisions.biases) << " results=" << to_string(vl.precisions.results)
          << "\n";
    }
    if (sel.metrics) {
      const auto& m = *sel.metrics;
      s << "  accuracy: " << num(m.accuracy) << "\n";
      s << "  accuracy_loss: " << num(m.accuracy_loss) << "\n";
      s << "  latency_ns: " << num(m.latency_ns) << "\n";
      s << "  initiation_interval_ns: " << num(m.initiation_interval_ns) << "\n";
      s << "  dsp: " << m.dsp_used << " (" << num(m.dsp_util) << ")\n";
      s << "  lut: " << m.lut_used << " (" << num(m.lut_util) << ")\n";
      s << "  ff: " << m.ff_used << " (" << num(m.ff_util) << ")\n";
      s << "  bram: " << m.bram_used << " (" << num(m.bram_util) << ")\n";
    }
  }
  for (const auto& red : r.reductions) {
    s << "\nreduce " << red.task << ": inputs";
    for (auto id : red.input_path_ids) s << " " << id;
    s << "\n";
  }
  return s.str();
}

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
  const Loaded l = load(path);
  auto diags = validate(l.flow.graph);
  auto required = check_required_parameters(l.flow.graph, l.flow.effective_cfg());
  diags.insert(diags.end(), required.begin(), required.end());
  try {
    SyntheticBackend backend(l.bench);
    if (auto part = l.flow.effective_cfg().resolve("", "HLS4ML", "FPGA_part_number"))
      if (const auto* s = std::get_if<std::string>(&*part)) backend.device(*s);
  } catch (const std::exception& e) {
    diags.push_back({"", e.what()});
  }
  for (const auto& d : diags) err << "error: " << to_string(d) << "\n";
  if (!diags.empty()) return kExitValidation;
  out << path << ": ok (" << l.flow.graph.tasks.size() << " tasks, " << l.flow.graph.edges.size() << " edges)\n";
  return kExitOk;
}

int cmd_run(const std::string& path, std::uint64_t seed, int workers, int max_hops, const fs::path& dir,
            std::ostream& out, std::ostream& err) {
  const std::string started = utc_now();
  const Loaded l = load(path);
  SyntheticBackend backend(l.bench);
  RunOptions opts;
  opts.workers = workers;
  opts.max_hops = max_hops;
  FlowResult r;
  try {
    r = run(l.flow.graph, l.flow.effective_cfg(), backend, opts);
  } catch (const FlowError& e) {
    for (const auto& d : e.diagnostics()) err << "error: " << to_string(d) << "\n";
    if (e.diagnostics().empty()) err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  write_file(dir / "result.json", to_json(r).dump(2) + "\n");
  if (!r.ok()) {
    err << "error: " << *r.error << "\n";
    return kExitRuntime;
  }
  nlohmann::json mms = nlohmann::json::array();
  for (const auto& o : r.outputs) mms.push_back(to_json(o.output.mm));
  write_file(dir / "metamodel.json", mms.dump(2) + "\n");
  const std::string summary = summary_text(r, l);
  write_file(dir / "summary.txt", summary);
  write_file(dir / "manifest.json",
             manifest("run", l, seed, started, {"result.json", "metamodel.json", "summary.txt"},
                      {{"workers", workers}, {"max_hops", max_hops}})
                     .dump(2) +
                 "\n");
  out << summary;
  return kExitOk;
}

struct DseArgs {
  std::string orderings = "SPQ";
  int budget = 22;
  int initial = 5;
  int stall = 5;
  int pool = 2048;
  int workers = 0;
  std::string weights, limits, bounds, select = "score";
};

SelectPolicy parse_select(const std::string& s) {
  if (s == "score") return SelectPolicy::Score;
  if (s == "accuracy") return SelectPolicy::BestAccuracy;
  if (s == "dsp") return SelectPolicy::BestDsp;
  if (s == "lut") return SelectPolicy::BestLut;
  throw UsageError("--select must be score, accuracy, dsp or lut");
}

int cmd_dse(const std::string& path, const DseArgs& a, std::uint64_t seed, const fs::path& dir, std::ostream& out,
            std::ostream& err) {
  const std::string started = utc_now();
  std::vector<Ordering> orderings;
  try {
    orderings = parse_orderings(a.orderings);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  DseConfig cfg;
  cfg.budget = a.budget;
  cfg.initial_design = std::min(a.initial, a.budget > 0 ? a.budget : a.initial);
  cfg.stall_limit = a.stall;
  cfg.pool_size = a.pool;
  cfg.workers = a.workers;
  cfg.seed = seed;
  cfg.select = parse_select(a.select);
  apply_common_dse_options(cfg, a.weights, a.limits, a.bounds);
  try {
    cfg.check();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Loaded l = load(path);
  SyntheticBackend backend(l.bench);
  FlowTemplate tmpl;
  tmpl.cfg = l.flow.effective_cfg();
  const DseResult res = run_dse(tmpl, orderings, cfg, backend);
  write_file(dir / "history.jsonl", history_jsonl(res.merged));
  write_file(dir / "pareto.csv", pareto_csv(res.pareto));
  nlohmann::json conf = dse_config_json(cfg);
  conf["orderings"] = a.orderings;
  nlohmann::json errors = nlohmann::json::object();
  for (const auto& run : res.runs)
    if (run.error) errors[to_string(run.ordering)] = *run.error;
  conf["ordering_errors"] = errors;
  write_file(dir / "manifest.json",
             manifest("dse", l, seed, started, {"history.jsonl", "pareto.csv"}, conf).dump(2) + "\n");
  for (const auto& run : res.runs) {
    out << "ordering " << to_string(run.ordering) << ": " << run.history.size() << " evaluations";
    if (run.error) out << " (aborted: " << *run.error << ")";
    out << "\n";
  }
  if (res.best) out << "best: " << describe_candidate(*res.best) << "\n";
  else out << "best: none (no feasible candidate)\n";
  bool all_failed = std::all_of(res.runs.begin(), res.runs.end(), [](const OrderingRun& r) { return r.error; });
  if (all_failed) {
    err << "error: every ordering failed\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_sweep(const std::string& path, const std::string& method, const std::string& grid_text, int samples,
              const std::string& ordering_text, const DseArgs& a, std::uint64_t seed, const fs::path& dir,
              std::ostream& out) {
  const std::string started = utc_now();
  if (method != "grid" && method != "sgs") throw UsageError("--method must be grid or sgs");
  Ordering ordering;
  try {
    ordering = parse_ordering(ordering_text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  DseConfig cfg;
  cfg.seed = seed;
  apply_common_dse_options(cfg, a.weights, a.limits, a.bounds);
  GridSpec grid;
  grid.bounds = cfg.bounds;
  auto counts = parse_numbers(grid_text, "--grid");
  if (counts.size() == 1) counts = {counts[0], counts[0], counts[0]};
  if (counts.size() != 3) throw UsageError("--grid takes one or three counts");
  for (std::size_t i = 0; i < 3; ++i) {
    if (counts[i] < 1 || counts[i] != static_cast<int>(counts[i])) throw UsageError("grid counts must be positive integers");
    grid.counts[i] = static_cast<int>(counts[i]);
  }
  const std::size_t size = static_cast<std::size_t>(grid.counts[0]) * grid.counts[1] * grid.counts[2];
  if (method == "sgs" && (samples < 1 || static_cast<std::size_t>(samples) > size))
    throw UsageError("--samples must lie between 1 and the grid size " + std::to_string(size));

  const Loaded l = load(path);
  SyntheticBackend backend(l.bench);
  FlowTemplate tmpl;
  tmpl.cfg = l.flow.effective_cfg();
  const auto hist = method == "grid" ? grid_search(tmpl, ordering, grid, cfg, backend)
                                     : stochastic_grid_search(tmpl, ordering, grid, samples, seed, cfg, backend);
  const auto front = pareto_candidates(hist);
  write_file(dir / "history.jsonl", history_jsonl(hist));
  write_file(dir / "pareto.csv", pareto_csv(front));
  nlohmann::json conf = dse_config_json(cfg);
  conf["method"] = method;
  conf["grid"] = grid.counts;
  conf["samples"] = samples;
  conf["ordering"] = ordering_text;
  write_file(dir / "manifest.json",
             manifest("sweep", l, seed, started, {"history.jsonl", "pareto.csv"}, conf).dump(2) + "\n");
  out << method << ": " << hist.size() << " evaluations, " << front.size() << " on the Pareto front\n";
  if (auto best = select_best(front, SelectPolicy::Score)) out << "best: " << describe_candidate(*best) << "\n";
  return kExitOk;
}

int cmd_report(const std::string& path, const std::string& objectives_text, const fs::path& dir, std::ostream& out,
               std::ostream& err) {
  std::vector<Objective> objectives;
  try {
    objectives = parse_objectives(objectives_text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::vector<Candidate> hist;
  try {
    hist = parse_history_jsonl(read_text_file(path));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  if (hist.empty()) err << "warning: history is empty\n";

  std::vector<Direction> dirs;
  for (const auto& o : objectives) dirs.push_back(o.direction);
  std::vector<ObjectivePoint> pts;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (!hist[i].feasible) continue;
    std::vector<double> v;
    for (const auto& o : objectives) v.push_back(*metric_value(hist[i].metrics, o.metric));
    pts.push_back({v, dirs, i});
  }
  auto front = frontier(pts);
  const bool max_first = objectives.front().direction == Direction::Max;
  std::stable_sort(front.begin(), front.end(), [&](const ObjectivePoint& a, const ObjectivePoint& b) {
    return max_first ? a.values[0] > b.values[0] : a.values[0] < b.values[0];
  });

  std::vector<Candidate> rows;
  for (const auto& p : front) rows.push_back(hist[p.payload]);
  write_file(dir / "pareto.csv", pareto_csv(rows));

  std::string ftsv = "index\tordering";
  for (const auto& o : objectives) ftsv += "\t" + o.metric;
  ftsv += "\n";
  for (const auto& p : front) {
    ftsv += std::to_string(hist[p.payload].index) + "\t" + to_string(hist[p.payload].ordering);
    for (double v : p.values) ftsv += "\t" + num(v);
    ftsv += "\n";
  }
  write_file(dir / "frontier.tsv", ftsv);

  std::string itsv = "iteration\tordering\tscore\tincumbent_score\n";
  double inc = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hist.size(); ++i) {
    inc = std::max(inc, hist[i].score);
    itsv += std::to_string(i) + "\t" + to_string(hist[i].ordering) + "\t" + num(hist[i].score) + "\t" + num(inc) + "\n";
  }
  write_file(dir / "incumbent.tsv", itsv);
  out << hist.size() << " candidates, " << front.size() << " on the frontier\n";
  return kExitOk;
}

int cmd_registry(std::ostream& out) {
  const Registry& r = Registry::builtin();
  auto line = [&](const char* label, const std::vector<std::string>& names) {
    out << label << ":";
    for (const auto& n : names) out << " " << n;
    out << "\n";
  };
  line("predicates", r.predicate_names());
  line("actions", r.action_names());
  line("reducers", r.reducer_names());
  std::vector<std::string> kinds;
  for (auto k : all_task_kinds()) kinds.emplace_back(to_string(k));
  line("task kinds", kinds);
  return kExitOk;
}

}  // namespace

std::string tool_version() { return FLOWFORGE_VERSION; }

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Design-flow orchestration and design-space exploration", "flowforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  std::string flow_path, history_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  int workers = 0, max_hops = 1000, samples = 22;
  std::string method = "grid", grid = "7,7,7", ordering = "Q", objectives = "accuracy:max,dsp:min";
  DseArgs dse;

  auto* v = app.add_subcommand("validate", "Check a flow file");
  v->add_option("flow", flow_path, "Flow file")->required();

  auto* r = app.add_subcommand("run", "Execute a flow file");
  r->add_option("flow", flow_path, "Flow file")->required();
  r->add_option("--seed", seed, "Seed recorded in the manifest (default: FLOWFORGE_SEED or 0)");
  r->add_option("--workers", workers, "Worker threads (0: hardware parallelism)")->check(CLI::NonNegativeNumber);
  r->add_option("--max-hops", max_hops, "Loop guard per token")->check(CLI::PositiveNumber);
  r->add_option("--out", out_dir, "Output directory");

  auto add_scoring = [&](CLI::App* c) {
    c->add_option("--weights", dse.weights, "w1,w2,w3,w4 for accuracy, DSP, LUT, latency");
    c->add_option("--limits", dse.limits, "u_max,t_max,acc_loss_max");
    c->add_option("--bounds", dse.bounds, "Tolerance bounds: lo,hi or six numbers");
    c->add_option("--seed", seed, "Seed (default: FLOWFORGE_SEED or 0)");
    c->add_option("--out", out_dir, "Output directory");
  };
  auto* d = app.add_subcommand("dse", "Bayesian optimization over tolerances and orderings");
  d->add_option("template", flow_path, "Flow template file")->required();
  d->add_option("--orderings", dse.orderings, "Comma-separated orderings over S, P, Q");
  d->add_option("--budget", dse.budget, "Evaluations per ordering");
  d->add_option("--initial", dse.initial, "Initial design size");
  d->add_option("--stall", dse.stall, "Stop after this many iterations without a new incumbent");
  d->add_option("--pool", dse.pool, "Acquisition pool size");
  d->add_option("--workers", dse.workers, "Concurrent orderings (0: hardware parallelism)");
  d->add_option("--select", dse.select, "score, accuracy, dsp or lut");
  add_scoring(d);

  auto* s = app.add_subcommand("sweep", "Grid or stochastic grid search");
  s->add_option("template", flow_path, "Flow template file")->required();
  s->add_option("--method", method, "grid or sgs");
  s->add_option("--grid", grid, "Points per tolerance: n or np,ns,nq");
  s->add_option("--samples", samples, "Samples for sgs");
  s->add_option("--ordering", ordering, "Ordering over S, P, Q");
  add_scoring(s);

  auto* rep = app.add_subcommand("report", "Frontier and incumbent tables from a history");
  rep->add_option("history", history_path, "History JSON-lines file")->required();
  rep->add_option("--objectives", objectives, "metric:min|max list");
  rep->add_option("--out", out_dir, "Output directory");

  auto* reg = app.add_subcommand("registry", "Registered predicates, actions and reducers");
  reg->add_subcommand("list", "List registry names")->required();
  reg->require_subcommand(1);

  std::vector<std::string> argv_store{"flowforge"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << tool_version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (v->parsed()) return cmd_validate(flow_path, out, err);
    if (r->parsed()) return cmd_run(flow_path, resolve_seed(seed), workers, max_hops, out_dir, out, err);
    if (d->parsed()) return cmd_dse(flow_path, dse, resolve_seed(seed), out_dir, out, err);
    if (s->parsed())
      return cmd_sweep(flow_path, method, grid, samples, ordering, dse, resolve_seed(seed), out_dir, out);
    if (rep->parsed()) return cmd_report(history_path, objectives, out_dir, out, err);
    if (reg->parsed()) return cmd_registry(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FlowError& e) {
    for (const auto& diag : e.diagnostics()) err << "error: " << to_string(diag) << "\n";
    if (e.diagnostics().empty()) err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace flowforge
