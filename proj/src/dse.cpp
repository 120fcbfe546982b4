#include "flowforge/dse.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "flowforge/pareto.hpp"

namespace flowforge {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double radical_inverse(std::uint64_t i, int base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
    i /= static_cast<std::uint64_t>(base);
  }
  return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Ordering parse_ordering(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty ordering");
  Ordering o;
  for (char c : text) {
    OTaskKind k;
    if (c == 'S') k = OTaskKind::S;
    else if (c == 'P') k = OTaskKind::P;
    else if (c == 'Q') k = OTaskKind::Q;
    else throw std::invalid_argument(std::string("invalid ordering token '") + c + "' in '" + std::string(text) + "'");
    if (std::find(o.begin(), o.end(), k) != o.end())
      throw std::invalid_argument("ordering '" + std::string(text) + "' repeats a task");
    o.push_back(k);
  }
  return o;
}

std::vector<Ordering> parse_orderings(std::string_view text) {
  std::vector<Ordering> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(parse_ordering(text.substr(pos, end - pos)));
    pos = end + 1;
  }
  return out;
}

std::string to_string(const Ordering& o) {
  std::string s;
  for (auto k : o) s += k == OTaskKind::S ? 'S' : k == OTaskKind::P ? 'P' : 'Q';
  return s;
}

double& Theta::operator[](std::size_t i) {
  switch (i) {
    case 0: return alpha_p;
    case 1: return alpha_s;
    case 2: return alpha_q;
  }
  throw std::out_of_range("theta has three components");
}

double Theta::operator[](std::size_t i) const { return const_cast<Theta&>(*this)[i]; }

void ThetaBounds::check() const {
  for (const auto& r : range)
    if (!(r.lo >= 0.0 && r.lo <= r.hi && std::isfinite(r.hi)))
      throw std::invalid_argument("tolerance bounds must satisfy 0 <= lo <= hi");
}

Theta ThetaBounds::from_unit(std::span<const double> u) const {
  if (u.size() != 3) throw std::invalid_argument("theta needs three unit coordinates");
  Theta t;
  for (std::size_t i = 0; i < 3; ++i) t[i] = range[i].lo + (range[i].hi - range[i].lo) * std::clamp(u[i], 0.0, 1.0);
  return t;
}

std::vector<double> ThetaBounds::to_unit(const Theta& t) const {
  std::vector<double> u(3);
  for (std::size_t i = 0; i < 3; ++i)
    u[i] = range[i].hi > range[i].lo ? (t[i] - range[i].lo) / (range[i].hi - range[i].lo) : 0.5;
  return u;
}

void DseConfig::check() const {
  if (initial_design < 1) throw std::invalid_argument("initial design size must be at least 1");
  if (budget < initial_design) throw std::invalid_argument("budget must be at least the initial design size");
  if (stall_limit < 1) throw std::invalid_argument("stall limit must be at least 1");
  if (pool_size < 1) throw std::invalid_argument("pool size must be at least 1");
  if (!(xi >= 0.0)) throw std::invalid_argument("xi must be non-negative");
  check_weights(weights);
  bounds.check();
}

std::vector<double> normalize(std::span<const double> values, Range* range) {
  if (values.empty()) throw std::invalid_argument("cannot normalize an empty observation set");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const Range r{*lo, *hi};
  if (range) *range = r;
  std::vector<double> out;
  for (double v : values) out.push_back(normalize_value(v, r));
  return out;
}

double normalize_value(double v, const Range& r) { return r.max > r.min ? (v - r.min) / (r.max - r.min) : 0.5; }

void check_weights(const Weights& w) {
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw std::invalid_argument("score weights must be non-negative");
    sum += x;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("score weights must not all be zero");
}

double score(const NormalizedMetrics& m, const Weights& w, bool feasible) {
  check_weights(w);
  if (!feasible) return kInfeasibleScore;
  return w[0] * (1.0 - m.acc_loss) - w[1] * m.dsp - w[2] * m.lut - w[3] * m.latency;
}

bool is_feasible(const Metrics& m, const Limits& l) {
  return m.max_utilization() <= l.u_max && m.latency_ns <= l.t_max && m.accuracy_loss <= l.acc_loss_max;
}

void rescore(std::span<Candidate> history, const Weights& w, const Limits& limits) {
  if (history.empty()) return;
  std::vector<double> loss, dsp, lut, lat;
  for (const auto& c : history) {
    loss.push_back(c.metrics.accuracy_loss);
    dsp.push_back(static_cast<double>(c.metrics.dsp_used));
    lut.push_back(static_cast<double>(c.metrics.lut_used));
    lat.push_back(c.metrics.latency_ns);
  }
  const auto nl = normalize(loss), nd = normalize(dsp), nu = normalize(lut), nt = normalize(lat);
  for (std::size_t i = 0; i < history.size(); ++i) {
    history[i].feasible = is_feasible(history[i].metrics, limits);
    history[i].score = score({nl[i], nd[i], nu[i], nt[i]}, w, history[i].feasible);
  }
}

std::optional<std::size_t> incumbent(std::span<const Candidate> history) {
  if (history.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i].score > history[best].score) best = i;
  return best;
}

std::vector<std::vector<double>> shifted_halton(int dim, int count, std::uint64_t seed, int skip) {
  if (dim < 1 || dim > static_cast<int>(std::size(kPrimes))) throw std::invalid_argument("unsupported dimension");
  std::mt19937_64 rng(mix(seed));
  std::vector<double> shift(static_cast<std::size_t>(dim));
  for (auto& s : shift) s = unit(rng);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < count; ++i) {
    std::vector<double> p(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) {
      double v = radical_inverse(static_cast<std::uint64_t>(i + skip + 1), kPrimes[d]) + shift[static_cast<std::size_t>(d)];
      p[static_cast<std::size_t>(d)] = v - std::floor(v);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

std::vector<double> propose(const GpModel& gp, double best, double xi, int pool_size, std::uint64_t seed) {
  const int dim = static_cast<int>(gp.inputs().cols());
  const auto pool = shifted_halton(dim, pool_size, seed);
  std::size_t arg = 0;
  double best_ei = -1.0;
  Eigen::VectorXd x(dim);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (int d = 0; d < dim; ++d) x(d) = pool[i][static_cast<std::size_t>(d)];
    const auto [mu, var] = gp.predict(x);
    const double ei = expected_improvement(mu, std::sqrt(var), best, xi);
    if (ei > best_ei) {
      best_ei = ei;
      arg = i;
    }
  }
  return pool[arg];
}

std::vector<std::vector<double>> bo_maximize(int dim, const BoOptions& o,
                                             const std::function<void(const std::vector<double>&)>& evaluate,
                                             const std::function<std::vector<double>()>& scores) {
  if (o.initial_design < 1 || o.budget < o.initial_design)
    throw std::invalid_argument("budget must be at least the initial design size, which must be at least 1");
  std::vector<std::vector<double>> xs;
  const std::uint64_t design_seed = mix(o.seed ^ 0x5eedULL);
  for (auto& x : shifted_halton(dim, o.initial_design, design_seed)) {
    evaluate(x);
    xs.push_back(std::move(x));
  }

  auto argmax = [](const std::vector<double>& s) {
    return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
  };
  std::size_t last = argmax(scores());
  int stall = 0;
  for (int iter = 0; static_cast<int>(xs.size()) < o.budget; ++iter) {
    std::vector<double> s = scores();
    if (s.size() != xs.size()) throw std::logic_error("score callback returned the wrong number of scores");
    std::vector<double> x;
    if (xs.size() < 2) {
      x = shifted_halton(dim, 1, design_seed, static_cast<int>(xs.size()))[0];
    } else {
      double worst = std::numeric_limits<double>::infinity();
      for (double v : s)
        if (v > kInfeasibleScore / 2) worst = std::min(worst, v);
      const double clip = std::isfinite(worst) ? worst - 1.0 : -1.0;
      Eigen::VectorXd y(static_cast<Eigen::Index>(s.size()));
      for (std::size_t i = 0; i < s.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = s[i] > kInfeasibleScore / 2 ? s[i] : clip;
      y.array() -= y.mean();
      Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), dim);
      for (std::size_t i = 0; i < xs.size(); ++i)
        for (int d = 0; d < dim; ++d) X(static_cast<Eigen::Index>(i), d) = xs[i][static_cast<std::size_t>(d)];
      const std::uint64_t iter_seed = mix(o.seed + 0x1000ULL * static_cast<std::uint64_t>(iter + 1));
      const GpModel gp = GpModel::fit(X, y, iter_seed);
      x = propose(gp, y.maxCoeff(), o.xi, o.pool_size, iter_seed ^ 0xa11ceULL);
    }
    evaluate(x);
    xs.push_back(std::move(x));

    const std::size_t inc = argmax(scores());
    stall = inc == last ? stall + 1 : 0;
    last = inc;
    if (stall >= o.stall_limit) break;
  }
  return xs;
}

FlowGraph instantiate(const Ordering& ordering) {
  FlowBuilder b;
  b.task("gen", TaskKind::ModelGen);
  std::vector<std::string> chain{"gen"};
  for (auto k : ordering) {
    switch (k) {
      case OTaskKind::S: b.task("scale", TaskKind::Scaling), chain.push_back("scale"); break;
      case OTaskKind::P: b.task("prune", TaskKind::Pruning), chain.push_back("prune"); break;
      case OTaskKind::Q: b.task("quantize", TaskKind::Quantization), chain.push_back("quantize"); break;
    }
  }
  b.branch("vendor", PredicateSpec{"vendor_a", {}});
  chain.push_back("vendor");
  for (std::size_t i = 1; i < chain.size(); ++i) b.edge(chain[i - 1], chain[i]);
  b.task("hls_a", TaskKind::HlsMockA).task("hls_b", TaskKind::HlsMockB);
  b.task("stop_a", TaskKind::Stop).task("stop_b", TaskKind::Stop);
  b.edge("vendor", "hls_a", 0).edge("vendor", "hls_b", 1);
  b.edge("hls_a", "stop_a").edge("hls_b", "stop_b");
  b.entry("gen");
  return b.graph();
}

Metrics evaluate_theta(const FlowTemplate& tmpl, const Ordering& ordering, const Theta& theta,
                       const EvaluationBackend& backend) {
  ConfigStore cfg = tmpl.cfg;
  cfg.set(type_key("Pruning", "tolerate_acc_loss"), theta.alpha_p);
  cfg.set(type_key("Scaling", "tolerate_acc_loss"), theta.alpha_s);
  cfg.set(type_key("Quantization", "tolerate_acc_loss"), theta.alpha_q);
  if (!cfg.resolve("prune", "Pruning", "pruning_rate_thresh"))
    cfg.set(type_key("Pruning", "pruning_rate_thresh"), tmpl.default_pruning_rate_thresh);
  RunOptions opts;
  opts.workers = 1;
  const FlowResult r = run(instantiate(ordering), cfg, backend, opts);
  if (!r.ok()) throw std::runtime_error(*r.error);
  if (r.outputs.size() != 1 || !r.outputs.front().output.selected.metrics)
    throw std::runtime_error("evaluation flow produced no measured design");
  return *r.outputs.front().output.selected.metrics;
}

std::vector<Candidate> pareto_candidates(std::span<const Candidate> history) {
  const std::vector<Direction> dirs{Direction::Max, Direction::Min, Direction::Min, Direction::Min};
  std::vector<ObjectivePoint> pts;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& c = history[i];
    if (!c.feasible) continue;
    pts.push_back({{c.metrics.accuracy, static_cast<double>(c.metrics.dsp_used),
                    static_cast<double>(c.metrics.lut_used), c.metrics.latency_ns},
                   dirs,
                   i});
  }
  std::vector<Candidate> out;
  for (const auto& p : frontier(pts)) out.push_back(history[p.payload]);
  return out;
}

std::optional<Candidate> select_best(std::span<const Candidate> pareto, SelectPolicy policy) {
  if (pareto.empty()) return std::nullopt;
  auto key = [&](const Candidate& c) {
    switch (policy) {
      case SelectPolicy::Score: return c.score;
      case SelectPolicy::BestAccuracy: return c.metrics.accuracy;
      case SelectPolicy::BestDsp: return -static_cast<double>(c.metrics.dsp_used);
      case SelectPolicy::BestLut: return -static_cast<double>(c.metrics.lut_used);
    }
    return c.score;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < pareto.size(); ++i)
    if (key(pareto[i]) > key(pareto[best])) best = i;
  return pareto[best];
}

namespace {

Candidate timed_evaluation(const FlowTemplate& tmpl, const Ordering& ordering, const Theta& theta, int index,
                           const EvaluationBackend& backend) {
  const auto t0 = std::chrono::steady_clock::now();
  Candidate c;
  c.index = index;
  c.ordering = ordering;
  c.theta = theta;
  c.metrics = evaluate_theta(tmpl, ordering, theta, backend);
  c.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

OrderingRun run_ordering(const FlowTemplate& tmpl, const Ordering& ordering, const DseConfig& cfg,
                         const EvaluationBackend& backend) {
  OrderingRun run;
  run.ordering = ordering;
  BoOptions o;
  o.budget = cfg.budget;
  o.initial_design = cfg.initial_design;
  o.stall_limit = cfg.stall_limit;
  o.pool_size = cfg.pool_size;
  o.xi = cfg.xi;
  o.seed = mix(cfg.seed ^ fnv1a(to_string(ordering)));
  auto evaluate = [&](const std::vector<double>& u) {
    run.history.push_back(
        timed_evaluation(tmpl, ordering, cfg.bounds.from_unit(u), static_cast<int>(run.history.size()), backend));
  };
  auto scores = [&] {
    rescore(run.history, cfg.weights, cfg.limits);
    std::vector<double> s;
    for (const auto& c : run.history) s.push_back(c.score);
    return s;
  };
  try {
    bo_maximize(3, o, evaluate, scores);
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  rescore(run.history, cfg.weights, cfg.limits);
  return run;
}

}  // namespace

DseResult run_dse(const FlowTemplate& tmpl, const std::vector<Ordering>& orderings, const DseConfig& cfg,
                  const EvaluationBackend& backend) {
  if (orderings.empty()) throw std::invalid_argument("at least one ordering is required");
  cfg.check();
  for (const auto& o : orderings) parse_ordering(to_string(o));
  // Surface template problems once instead of once per ordering.
  if (auto diags = validate(instantiate(orderings.front())); !diags.empty())
    throw FlowError("evaluation flow is invalid: " + to_string(diags.front()), diags);

  DseResult res;
  res.runs.resize(orderings.size());
  int workers = cfg.workers > 0 ? cfg.workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min<int>(workers, static_cast<int>(orderings.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < orderings.size(); ++i) res.runs[i] = run_ordering(tmpl, orderings[i], cfg, backend);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < orderings.size();) res.runs[i] = run_ordering(tmpl, orderings[i], cfg, backend);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& r : res.runs) res.merged.insert(res.merged.end(), r.history.begin(), r.history.end());
  rescore(res.merged, cfg.weights, cfg.limits);
  res.pareto = pareto_candidates(res.merged);
  res.best = select_best(res.pareto, cfg.select);
  return res;
}

std::vector<Theta> grid_points(const GridSpec& grid) {
  grid.bounds.check();
  std::array<std::vector<double>, 3> axes;
  for (std::size_t d = 0; d < 3; ++d) {
    const int n = grid.counts[d];
    if (n < 1) throw std::invalid_argument("grid counts must be at least 1");
    const auto& r = grid.bounds.range[d];
    for (int i = 0; i < n; ++i)
      axes[d].push_back(n == 1 ? 0.5 * (r.lo + r.hi) : r.lo + (r.hi - r.lo) * (static_cast<double>(i) / (n - 1)));
  }
  std::vector<Theta> pts;
  for (double p : axes[0])
    for (double s : axes[1])
      for (double q : axes[2]) pts.push_back({p, s, q});
  return pts;
}

std::vector<Candidate> grid_search(const FlowTemplate& tmpl, const Ordering& ordering, const GridSpec& grid,
                                   const DseConfig& cfg, const EvaluationBackend& backend) {
  const auto pts = grid_points(grid);
  if (pts.empty()) throw std::invalid_argument("empty grid");
  std::vector<Candidate> hist;
  for (const auto& t : pts) hist.push_back(timed_evaluation(tmpl, ordering, t, static_cast<int>(hist.size()), backend));
  rescore(hist, cfg.weights, cfg.limits);
  return hist;
}

std::vector<Candidate> stochastic_grid_search(const FlowTemplate& tmpl, const Ordering& ordering,
                                              const GridSpec& grid, int sample_count, std::uint64_t seed,
                                              const DseConfig& cfg, const EvaluationBackend& backend) {
  const auto pts = grid_points(grid);
  if (sample_count < 1 || static_cast<std::size_t>(sample_count) > pts.size())
    throw std::invalid_argument("sample count must lie between 1 and the grid size " + std::to_string(pts.size()));
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(mix(seed ^ 0x565ULL));
  for (std::size_t i = 0; i < static_cast<std::size_t>(sample_count); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<Candidate> hist;
  for (int i = 0; i < sample_count; ++i)
    hist.push_back(timed_evaluation(tmpl, ordering, pts[idx[static_cast<std::size_t>(i)]], i, backend));
  rescore(hist, cfg.weights, cfg.limits);
  return hist;
}

double accuracy_dsp_hypervolume(std::span<const Candidate> history, std::span<const double> reference) {
  const std::vector<Direction> dirs{Direction::Max, Direction::Min};
  std::vector<ObjectivePoint> pts;
  for (std::size_t i = 0; i < history.size(); ++i)
    if (history[i].feasible)
      pts.push_back({{history[i].metrics.accuracy, static_cast<double>(history[i].metrics.dsp_used)}, dirs, i});
  const auto front = frontier(pts);
  return hypervolume_2d(front, reference);
}

nlohmann::json to_json(const Candidate& c, bool with_wall_time) {
  nlohmann::json j{{"index", c.index},
                   {"ordering", to_string(c.ordering)},
                   {"theta", {{"alpha_p", c.theta.alpha_p}, {"alpha_s", c.theta.alpha_s}, {"alpha_q", c.theta.alpha_q}}},
                   {"metrics", c.metrics},
                   {"feasible", c.feasible},
                   {"score", c.score}};
  if (with_wall_time) j["wall_time_s"] = c.wall_time_s;
  return j;
}

Candidate candidate_from_json(const nlohmann::json& j) {
  Candidate c;
  c.index = j.at("index").get<int>();
  c.ordering = parse_ordering(j.at("ordering").get<std::string>());
  const auto& t = j.at("theta");
  c.theta = {t.at("alpha_p").get<double>(), t.at("alpha_s").get<double>(), t.at("alpha_q").get<double>()};
  c.metrics = j.at("metrics").get<Metrics>();
  c.feasible = j.at("feasible").get<bool>();
  c.score = j.at("score").get<double>();
  c.wall_time_s = j.value("wall_time_s", 0.0);
  return c;
}

std::string history_jsonl(std::span<const Candidate> history, bool with_wall_time) {
  std::string out;
  for (const auto& c : history) out += to_json(c, with_wall_time).dump() + "\n";
  return out;
}

std::vector<Candidate> parse_history_jsonl(std::string_view text) {
  std::vector<Candidate> out;
  std::istringstream in{std::string(text)};
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(candidate_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("history line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string pareto_csv(std::span<const Candidate> rows) {
  std::string out(kParetoCsvHeader);
  out += "\n";
  for (const auto& c : rows) {
    out += to_string(c.ordering) + "," + num(c.theta.alpha_p) + "," + num(c.theta.alpha_s) + "," +
           num(c.theta.alpha_q) + "," + num(c.metrics.accuracy) + "," + num(c.metrics.latency_ns) + "," +
           std::to_string(c.metrics.dsp_used) + "," + std::to_string(c.metrics.lut_used) + "," +
           std::to_string(c.metrics.ff_used) + "," + std::to_string(c.metrics.bram_used) + "," + num(c.score) + "\n";
  }
  return out;
}

}  // namespace flowforge
