#include "flowforge/flowgraph.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include "flowforge/otasks.hpp"

namespace flowforge {

namespace {

struct KindInfo {
  TaskKind kind;
  const char* spelling;
  const char* type;
};

constexpr KindInfo kKinds[] = {
    {TaskKind::Join, "JOIN", "Join"},
    {TaskKind::Branch, "BRANCH", "Branch"},
    {TaskKind::Fork, "FORK", "Fork"},
    {TaskKind::Reduce, "REDUCE", "Reduce"},
    {TaskKind::Stop, "STOP", "Stop"},
    {TaskKind::Pruning, "O_PRUNING", "Pruning"},
    {TaskKind::Scaling, "O_SCALING", "Scaling"},
    {TaskKind::Quantization, "O_QUANTIZATION", "Quantization"},
    {TaskKind::ModelGen, "LAMBDA_MODEL_GEN", "KerasModelGen"},
    {TaskKind::HlsMockA, "LAMBDA_HLS_MOCK_A", "VivadoHLS"},
    {TaskKind::HlsMockB, "LAMBDA_HLS_MOCK_B", "IntelHLS"},
};

const KindInfo& info(TaskKind k) {
  for (const auto& i : kKinds)
    if (i.kind == k) return i;
  throw std::logic_error("unhandled task kind");
}

bool is_otask(TaskKind k) {
  return k == TaskKind::Pruning || k == TaskKind::Scaling || k == TaskKind::Quantization;
}

// Inbound/outbound edge count rules; -1 means "at least one".
struct Multiplicity {
  int in;
  int out;
};

Multiplicity multiplicity(TaskKind k) {
  switch (k) {
    case TaskKind::Join: return {-1, 1};
    case TaskKind::Branch: return {1, 2};
    case TaskKind::Fork: return {1, -1};
    case TaskKind::Reduce: return {-1, 1};
    case TaskKind::Stop: return {1, 0};
    case TaskKind::ModelGen: return {0, 1};
    default: return {1, 1};
  }
}

std::string describe(int n) { return n < 0 ? "at least 1" : std::to_string(n); }

std::string edge_locus(const Edge& e) { return e.from + " -> " + e.to; }

}  // namespace

std::string_view to_string(TaskKind kind) { return info(kind).spelling; }

std::optional<TaskKind> parse_task_kind(std::string_view text) {
  for (const auto& i : kKinds)
    if (text == i.spelling) return i.kind;
  return std::nullopt;
}

std::string_view task_type_name(TaskKind kind) { return info(kind).type; }

std::vector<TaskKind> all_task_kinds() {
  std::vector<TaskKind> out;
  for (const auto& i : kKinds) out.push_back(i.kind);
  return out;
}

const TaskDecl* FlowGraph::find(std::string_view name) const {
  for (const auto& t : tasks)
    if (t.name == name) return &t;
  return nullptr;
}

const TaskDecl* FlowGraph::entry_task() const {
  if (!entry.empty()) return find(entry);
  for (const auto& t : tasks)
    if (std::none_of(edges.begin(), edges.end(), [&](const Edge& e) { return e.to == t.name; })) return &t;
  return nullptr;
}

std::string to_string(const Diagnostic& d) { return d.locus.empty() ? d.message : d.locus + ": " + d.message; }

std::vector<Diagnostic> validate(const FlowGraph& g, const Registry& registry) {
  std::vector<Diagnostic> out;
  std::set<std::string, std::less<>> names;
  for (const auto& t : g.tasks) {
    if (t.name.empty()) out.push_back({"", "task with an empty instance name"});
    else if (!names.insert(t.name).second) out.push_back({t.name, "duplicate instance name"});
    else if (!parse_scoped_key(instance_key(t.name, "x")))
      out.push_back({t.name, "instance name may only use letters, digits, '_', '-' and '.'"});
  }

  std::map<std::string, std::vector<const Edge*>, std::less<>> in, outs;
  for (const auto& e : g.edges) {
    bool ok = true;
    if (!g.find(e.from)) out.push_back({edge_locus(e), "dangling edge: unknown source '" + e.from + "'"}), ok = false;
    if (!g.find(e.to)) out.push_back({edge_locus(e), "dangling edge: unknown target '" + e.to + "'"}), ok = false;
    if (e.port < 0) out.push_back({edge_locus(e), "negative port"}), ok = false;
    if (ok) {
      outs[e.from].push_back(&e);
      in[e.to].push_back(&e);
    }
  }

  bool has_source = false;
  for (const auto& t : g.tasks)
    if (in[t.name].empty()) has_source = true;
  if (!has_source) out.push_back({"", "missing source: every task has an inbound edge"});
  if (!g.entry.empty() && !g.find(g.entry)) out.push_back({g.entry, "entry task does not exist"});

  for (const auto& t : g.tasks) {
    const auto m = multiplicity(t.kind);
    const int n_in = static_cast<int>(in[t.name].size());
    const int n_out = static_cast<int>(outs[t.name].size());
    const std::string kind(to_string(t.kind));
    if (m.in < 0 ? n_in < 1 : n_in != m.in)
      out.push_back({t.name, "multiplicity violation: " + kind + " takes " + describe(m.in) + " inbound edge(s), has " +
                                 std::to_string(n_in)});
    if (m.out < 0 ? n_out < 1 : n_out != m.out)
      out.push_back({t.name, "multiplicity violation: " + kind + " takes " + describe(m.out) +
                                 " outbound edge(s), has " + std::to_string(n_out)});
    std::vector<int> ports;
    for (const Edge* e : outs[t.name]) ports.push_back(e->port);
    std::sort(ports.begin(), ports.end());
    std::vector<int> expected(ports.size());
    for (std::size_t i = 0; i < expected.size(); ++i)
      expected[i] = t.kind == TaskKind::Branch || t.kind == TaskKind::Fork ? static_cast<int>(i) : 0;
    if (ports != expected && (t.kind == TaskKind::Branch || t.kind == TaskKind::Fork || !ports.empty()))
      out.push_back({t.name, t.kind == TaskKind::Branch || t.kind == TaskKind::Fork
                                 ? "outbound ports must be distinct and numbered from 0"
                                 : "outbound edge must use port 0"});

    if (t.kind == TaskKind::Branch) {
      if (!t.predicate) out.push_back({t.name, "BRANCH needs a predicate"});
      else if (!registry.predicate(t.predicate->name))
        out.push_back({t.name, "unknown predicate '" + t.predicate->name + "'"});
      if (t.action && !registry.action(t.action->name))
        out.push_back({t.name, "unknown action '" + t.action->name + "'"});
    } else if (t.predicate || t.action) {
      out.push_back({t.name, "only BRANCH tasks take a predicate or action"});
    }
    if (t.kind == TaskKind::Reduce) {
      if (!t.reduce) out.push_back({t.name, "REDUCE needs a reduce block"});
      else if (!registry.reducer(t.reduce->name)) out.push_back({t.name, "unknown reducer '" + t.reduce->name + "'"});
      else if (t.reduce->objectives.empty()) out.push_back({t.name, "REDUCE objectives must not be empty"});
      if (t.reduce)
        for (const auto& o : t.reduce->objectives)
          if (!metric_value(Metrics{}, o.metric)) out.push_back({t.name, "unknown metric '" + o.metric + "'"});
    } else if (t.reduce) {
      out.push_back({t.name, "only REDUCE tasks take a reduce block"});
    }
  }

  // Every cycle must pass through a BRANCH: with BRANCH nodes removed the
  // graph has to be acyclic.
  std::map<std::string, int, std::less<>> state;  // 0 new, 1 on stack, 2 done
  std::set<std::string> reported;
  std::function<void(const std::string&, std::vector<std::string>&)> dfs = [&](const std::string& v,
                                                                             std::vector<std::string>& stack) {
    state[v] = 1;
    stack.push_back(v);
    for (const Edge* e : outs[v]) {
      const TaskDecl* t = g.find(e->to);
      if (!t || t->kind == TaskKind::Branch) continue;
      if (state[e->to] == 1) {
        auto it = std::find(stack.begin(), stack.end(), e->to);
        std::string cycle;
        for (; it != stack.end(); ++it) cycle += *it + " -> ";
        cycle += e->to;
        if (reported.insert(e->to).second)
          out.push_back({e->to, "non-terminating cycle without a BRANCH: " + cycle});
      } else if (state[e->to] == 0) {
        dfs(e->to, stack);
      }
    }
    stack.pop_back();
    state[v] = 2;
  };
  for (const auto& t : g.tasks) {
    if (t.kind == TaskKind::Branch || state[t.name] != 0) continue;
    std::vector<std::string> stack;
    dfs(t.name, stack);
  }
  return out;
}

ConfigStore seeded_config(const FlowGraph& g, const ConfigStore& cfg) {
  ConfigStore out;
  for (const auto& t : g.tasks)
    for (const auto& [p, v] : t.params) out.set(instance_key(t.name, p), v);
  for (const auto& [k, v] : cfg.entries()) out.set(k, v);
  return out;
}

std::vector<Diagnostic> check_required_parameters(const FlowGraph& g, const ConfigStore& cfg_in) {
  const ConfigStore cfg = seeded_config(g, cfg_in);
  std::vector<Diagnostic> out;
  for (const auto& t : g.tasks) {
    if (!is_otask(t.kind)) continue;
    std::vector<std::string> required{"tolerate_acc_loss"};
    if (t.kind == TaskKind::Pruning) required.push_back("pruning_rate_thresh");
    for (const auto& p : required) {
      auto v = cfg.resolve(t.name, task_type_name(t.kind), p);
      if (!v) out.push_back({t.name, "missing required parameter '" + p + "'"});
      else if (!std::holds_alternative<double>(*v)) out.push_back({t.name, "parameter '" + p + "' must be a number"});
    }
  }
  return out;
}

// --- scheduler ---------------------------------------------------------------

namespace {

struct Job {
  const TaskDecl* task;
  std::vector<Token> inputs;  // several only for REDUCE
};

struct Outcome {
  std::vector<std::pair<std::string, Token>> emits;
  std::optional<StopOutput> stop;
  std::optional<ReductionRecord> reduction;
  std::vector<LogRecord> records;
  std::optional<std::string> error;
  int fork_fanout = 0;
  std::size_t merged = 0;
};

class Scheduler {
 public:
  Scheduler(const FlowGraph& g, const EvaluationBackend& backend, const Registry& registry, int max_hops)
      : g_(g), backend_(backend), registry_(registry), max_hops_(max_hops) {
    for (const auto& e : g.edges) outs_[e.from].push_back(&e);
    for (auto& [k, v] : outs_)
      std::sort(v.begin(), v.end(), [](const Edge* a, const Edge* b) { return a->port < b->port; });
  }

  FlowResult run(MetaModel initial, int workers) {
    result_.tokens_created = 1;
    {
      std::lock_guard lock(mu_);
      deliver(g_.entry_task()->name, Token{std::move(initial), 0, 0, {}, {}});
    }
    if (workers <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int i = 0; i < workers; ++i) pool.emplace_back([this] { work(); });
      for (auto& t : pool) t.join();
    }
    if (!result_.error) {
      for (const auto& [key, group] : pending_) {
        const int fanout = group.front().lineage.back().fanout;
        result_.error = "REDUCE '" + key.first + "' starved: " + std::to_string(group.size()) + " of " +
                        std::to_string(fanout) + " lineage-matched tokens arrived";
        result_.log.append(key.first, EventKind::Error, *result_.error);
        break;
      }
    }
    auto by_route = [](const auto& a, const auto& b) { return std::tie(a.task, a.route) < std::tie(b.task, b.route); };
    std::stable_sort(result_.outputs.begin(), result_.outputs.end(), by_route);
    std::stable_sort(result_.reductions.begin(), result_.reductions.end(), by_route);
    return std::move(result_);
  }

 private:
  // Caller holds mu_.
  void deliver(const std::string& target, Token t) {
    const TaskDecl* task = g_.find(target);
    if (task->kind == TaskKind::Reduce && !t.lineage.empty()) {
      const auto key = std::make_pair(target, t.lineage.back().activation);
      auto& group = pending_[key];
      group.push_back(std::move(t));
      if (static_cast<int>(group.size()) == group.front().lineage.back().fanout) {
        Job job{task, std::move(group)};
        pending_.erase(key);
        queue_.push_back(std::move(job));
      }
      return;
    }
    std::vector<Token> inputs;
    inputs.push_back(std::move(t));
    queue_.push_back(Job{task, std::move(inputs)});
  }

  void work() {
    std::unique_lock lock(mu_);
    for (;;) {
      cv_.wait(lock, [&] { return failed_ || !queue_.empty() || active_ == 0; });
      if (failed_ || queue_.empty()) break;
      Job job = std::move(queue_.front());
      queue_.pop_front();
      ++active_;
      lock.unlock();
      Outcome o = execute(job);
      lock.lock();
      --active_;
      for (auto& r : o.records) result_.log.append_record(std::move(r));
      if (o.error) {
        if (!failed_) result_.error = *o.error;
        failed_ = true;
      } else {
        result_.tokens_created += o.fork_fanout > 0 ? o.fork_fanout - 1 : 0;
        result_.tokens_merged += o.merged;
        if (o.stop) {
          ++result_.tokens_stopped;
          result_.outputs.push_back(std::move(*o.stop));
        }
        if (o.reduction) result_.reductions.push_back(std::move(*o.reduction));
        for (auto& [target, tok] : o.emits) deliver(target, std::move(tok));
      }
      cv_.notify_all();
    }
    cv_.notify_all();
  }

  const Edge& single_out(const TaskDecl& t) const { return *outs_.at(t.name).front(); }

  Outcome execute(Job& job) {
    Outcome o;
    const TaskDecl& t = *job.task;
    Token* tok = &job.inputs.front();
    std::size_t mark = tok->mm.log.size();
    try {
      if (t.kind == TaskKind::Reduce) {
        std::sort(job.inputs.begin(), job.inputs.end(), [](const Token& a, const Token& b) {
          return a.lineage.empty() || b.lineage.empty() ? false : a.lineage.back().branch < b.lineage.back().branch;
        });
        std::vector<MetaModel> mms;
        ReductionRecord rec{t.name, {}, {}, {}};
        int hops = 0;
        for (const auto& in : job.inputs) {
          mms.push_back(in.mm);
          rec.input_path_ids.push_back(in.path_id);
          hops = std::max(hops, in.hop_count);
        }
        Token merged;
        merged.mm = reduce_apply(mms, *t.reduce, registry_);
        merged.hop_count = hops;
        merged.lineage = job.inputs.front().lineage;
        merged.route = job.inputs.front().route;
        if (!merged.lineage.empty()) {
          merged.lineage.pop_back();
          merged.route.pop_back();
        }
        merged.path_id = next_path_++;
        rec.route = merged.route;
        rec.inputs = std::move(mms);
        o.merged = job.inputs.size() - 1;
        o.reduction = std::move(rec);
        job.inputs.resize(1);
        job.inputs.front() = std::move(merged);
        tok = &job.inputs.front();
        mark = tok->mm.log.size();
      }
      if (++tok->hop_count > max_hops_)
        throw FlowError("runaway loop: token exceeded max_hops=" + std::to_string(max_hops_) + " at '" + t.name +
                        "'");
      tok->mm.log.append(t.name, EventKind::Started);
      std::string detail;
      int port = 0;
      switch (t.kind) {
        case TaskKind::Join:
        case TaskKind::Reduce:
        case TaskKind::Fork:
        case TaskKind::Stop: break;
        case TaskKind::Branch:
          port = branch_decide(tok->mm, *t.predicate, t.action ? &*t.action : nullptr, t.name, registry_);
          detail = "port=" + std::to_string(port);
          break;
        case TaskKind::Pruning: detail = run_pruning_task(tok->mm, t.name, backend_); break;
        case TaskKind::Scaling: detail = run_scaling_task(tok->mm, t.name, backend_); break;
        case TaskKind::Quantization: detail = run_quantization_task(tok->mm, t.name, backend_); break;
        case TaskKind::ModelGen: detail = run_model_gen_task(tok->mm, t.name, backend_); break;
        case TaskKind::HlsMockA: detail = run_hls_mock_task(tok->mm, t.name, Vendor::A, backend_); break;
        case TaskKind::HlsMockB: detail = run_hls_mock_task(tok->mm, t.name, Vendor::B, backend_); break;
      }
      if (t.kind == TaskKind::Fork) detail = "fanout=" + std::to_string(outs_.at(t.name).size());
      tok->mm.log.append(t.name, EventKind::Finished, std::move(detail));
      const auto& recs = tok->mm.log.records();
      o.records.assign(recs.begin() + static_cast<std::ptrdiff_t>(mark), recs.end());

      if (t.kind == TaskKind::Stop) {
        o.stop = StopOutput{t.name, tok->path_id, tok->route, stop_extract(tok->mm)};
      } else if (t.kind == TaskKind::Fork) {
        const auto& edges = outs_.at(t.name);
        const int fanout = static_cast<int>(edges.size());
        const std::int64_t activation = next_activation_++;
        for (int i = 0; i < fanout; ++i) {
          Token child = i + 1 == fanout ? std::move(*tok) : *tok;
          child.lineage.push_back({activation, i, fanout});
          child.route.push_back(i);
          child.path_id = next_path_++;
          o.emits.emplace_back(edges[static_cast<std::size_t>(i)]->to, std::move(child));
        }
        o.fork_fanout = fanout;
      } else if (t.kind == TaskKind::Branch) {
        for (const Edge* e : outs_.at(t.name))
          if (e->port == port) o.emits.emplace_back(e->to, std::move(*tok));
      } else {
        o.emits.emplace_back(single_out(t).to, std::move(*tok));
      }
    } catch (const std::exception& e) {
      o.error = "task '" + t.name + "' failed: " + e.what();
      o.emits.clear();
      o.stop.reset();
      o.reduction.reset();
      o.records.clear();
      const auto& recs = tok->mm.log.records();
      if (mark <= recs.size()) o.records.assign(recs.begin() + static_cast<std::ptrdiff_t>(mark), recs.end());
      o.records.push_back(LogRecord{o.records.empty() ? 0 : o.records.back().timestamp_ns, t.name, EventKind::Error,
                                    *o.error});
    }
    return o;
  }

  const FlowGraph& g_;
  const EvaluationBackend& backend_;
  const Registry& registry_;
  const int max_hops_;
  std::map<std::string, std::vector<const Edge*>, std::less<>> outs_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Job> queue_;
  int active_ = 0;
  bool failed_ = false;
  std::map<std::pair<std::string, std::int64_t>, std::vector<Token>> pending_;
  FlowResult result_;
  std::atomic<std::int64_t> next_path_{1};
  std::atomic<std::int64_t> next_activation_{1};
};

}  // namespace

FlowResult run(const FlowGraph& graph, const ConfigStore& cfg, const EvaluationBackend& backend,
               const RunOptions& options) {
  const Registry& registry = options.registry ? *options.registry : Registry::builtin();
  if (auto diags = validate(graph, registry); !diags.empty()) {
    const std::string what = "flow graph is invalid: " + to_string(diags.front());
    throw FlowError(what, std::move(diags));
  }
  if (auto diags = check_required_parameters(graph, cfg); !diags.empty()) {
    const std::string what = "flow configuration is incomplete: " + to_string(diags.front());
    throw FlowError(what, std::move(diags));
  }
  if (options.max_hops < 1) throw FlowError("max_hops must be positive");
  int workers = options.workers;
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  MetaModel mm;
  mm.cfg = seeded_config(graph, cfg);
  Scheduler s(graph, backend, registry, options.max_hops);
  return s.run(std::move(mm), workers);
}

// --- builder -----------------------------------------------------------------

FlowBuilder& FlowBuilder::task(std::string name, TaskKind kind, std::map<std::string, ConfigValue, std::less<>> params) {
  TaskDecl t;
  t.name = std::move(name);
  t.kind = kind;
  t.params = std::move(params);
  graph_.tasks.push_back(std::move(t));
  return *this;
}

FlowBuilder& FlowBuilder::branch(std::string name, PredicateSpec predicate, std::optional<ActionSpec> action) {
  task(std::move(name), TaskKind::Branch);
  graph_.tasks.back().predicate = std::move(predicate);
  graph_.tasks.back().action = std::move(action);
  return *this;
}

FlowBuilder& FlowBuilder::reduce(std::string name, ReduceSpec spec) {
  task(std::move(name), TaskKind::Reduce);
  graph_.tasks.back().reduce = std::move(spec);
  return *this;
}

FlowBuilder& FlowBuilder::edge(std::string from, std::string to, int port) {
  graph_.edges.push_back(Edge{std::move(from), port, std::move(to)});
  return *this;
}

FlowBuilder& FlowBuilder::chain(std::initializer_list<std::string_view> names) {
  const std::string_view* prev = nullptr;
  for (const auto& n : names) {
    if (prev) edge(std::string(*prev), std::string(n));
    prev = &n;
  }
  return *this;
}

FlowBuilder& FlowBuilder::entry(std::string name) {
  graph_.entry = std::move(name);
  return *this;
}

// --- JSON --------------------------------------------------------------------

namespace {

nlohmann::json params_json(const NumericParams& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

NumericParams params_from(const nlohmann::json& j) {
  NumericParams p;
  if (j.is_null()) return p;
  if (!j.is_object()) throw std::invalid_argument("params must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) throw std::invalid_argument("parameter '" + k + "' must be numeric");
    p[k] = v.get<double>();
  }
  return p;
}

std::string objectives_text(const std::vector<Objective>& os) {
  std::string s;
  for (const auto& o : os) {
    if (!s.empty()) s += ",";
    s += o.metric + (o.direction == Direction::Max ? ":max" : ":min");
  }
  return s;
}

}  // namespace

nlohmann::json to_json(const FlowGraph& g) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : g.tasks) {
    nlohmann::json tj{{"name", t.name}, {"kind", std::string(to_string(t.kind))}};
    if (!t.params.empty()) {
      nlohmann::json p = nlohmann::json::object();
      for (const auto& [k, v] : t.params) p[k] = config_value_to_json(v);
      tj["params"] = p;
    }
    if (t.predicate) tj["predicate"] = {{"name", t.predicate->name}, {"params", params_json(t.predicate->params)}};
    if (t.action) tj["action"] = {{"name", t.action->name}, {"params", params_json(t.action->params)}};
    if (t.reduce)
      tj["reduce"] = {{"name", t.reduce->name},
                      {"objectives", objectives_text(t.reduce->objectives)},
                      {"params", params_json(t.reduce->params)}};
    tasks.push_back(std::move(tj));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges) edges.push_back({{"from", e.from}, {"port", e.port}, {"to", e.to}});
  nlohmann::json j{{"tasks", tasks}, {"edges", edges}};
  if (!g.entry.empty()) j["entry"] = g.entry;
  return j;
}

FlowGraph flowgraph_from_json(const nlohmann::json& j) {
  try {
    FlowGraph g;
    g.entry = j.value("entry", std::string{});
    for (const auto& tj : j.at("tasks")) {
      TaskDecl t;
      t.name = tj.at("name").get<std::string>();
      const auto kind = tj.at("kind").get<std::string>();
      auto k = parse_task_kind(kind);
      if (!k) throw std::invalid_argument("task '" + t.name + "' has unknown kind '" + kind + "'");
      t.kind = *k;
      if (tj.contains("params"))
        for (const auto& [pk, pv] : tj.at("params").items()) t.params[pk] = config_value_from_json(pv);
      if (tj.contains("predicate")) {
        const auto& pj = tj.at("predicate");
        t.predicate = PredicateSpec{pj.at("name").get<std::string>(), params_from(pj.value("params", nlohmann::json{}))};
      }
      if (tj.contains("action")) {
        const auto& aj = tj.at("action");
        t.action = ActionSpec{aj.at("name").get<std::string>(), params_from(aj.value("params", nlohmann::json{}))};
      }
      if (tj.contains("reduce")) {
        const auto& rj = tj.at("reduce");
        ReduceSpec r;
        r.name = rj.at("name").get<std::string>();
        const auto& oj = rj.at("objectives");
        if (oj.is_string()) {
          r.objectives = parse_objectives(oj.get<std::string>());
        } else {
          for (const auto& o : oj) {
            auto parsed = parse_objectives(o.get<std::string>());
            r.objectives.insert(r.objectives.end(), parsed.begin(), parsed.end());
          }
        }
        r.params = params_from(rj.value("params", nlohmann::json{}));
        t.reduce = std::move(r);
      }
      g.tasks.push_back(std::move(t));
    }
    for (const auto& ej : j.at("edges"))
      g.edges.push_back(Edge{ej.at("from").get<std::string>(), ej.value("port", 0), ej.at("to").get<std::string>()});
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed flow graph: ") + e.what());
  }
}

nlohmann::json to_json(const FlowResult& r) {
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& o : r.outputs)
    outputs.push_back({{"stop_task", o.task},
                       {"path_id", o.path_id},
                       {"route", o.route},
                       {"selected", to_json(o.output.selected)},
                       {"metamodel", to_json(o.output.mm)}});
  nlohmann::json reductions = nlohmann::json::array();
  for (const auto& red : r.reductions)
    reductions.push_back({{"task", red.task}, {"route", red.route}, {"input_path_ids", red.input_path_ids}});
  return {{"ok", r.ok()},
          {"error", r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr)},
          {"outputs", outputs},
          {"reductions", reductions},
          {"tokens", {{"created", r.tokens_created}, {"stopped", r.tokens_stopped}, {"merged", r.tokens_merged}}},
          {"log", to_json(r.log)}};
}

}  // namespace flowforge
