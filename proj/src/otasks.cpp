#include "flowforge/otasks.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace flowforge {

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string num(double v) { return fmt("%.17g", v); }

double loss_against(double start, double acc) { return std::max(0.0, start - acc); }

void require_tolerance(double alpha, std::string_view what) {
  if (!(alpha >= 0.0)) throw std::invalid_argument(std::string(what) + " tolerance must be non-negative");
}

double required_number(const MetaModel& mm, std::string_view instance, std::string_view type,
                       std::string_view param) {
  auto v = mm.cfg.resolve_number(instance, type, param);
  if (!v)
    throw std::invalid_argument("missing required parameter '" + std::string(param) + "' for '" +
                                std::string(instance) + "'");
  return *v;
}

// Type-scoped lookup that falls back to the shared HLS4ML scope.
std::optional<ConfigValue> resolve_hls(const MetaModel& mm, std::string_view instance, std::string_view type,
                                       std::string_view param) {
  if (auto v = mm.cfg.resolve(instance, type, param)) return v;
  return mm.cfg.resolve("", kHlsCommonType, param);
}

const ModelEntry& latest_network(const MetaModel& mm, std::string_view instance) {
  const ModelEntry* e = mm.space.latest(Stage::Network);
  if (!e) throw std::runtime_error("'" + std::string(instance) + "' needs a network in the model space");
  return *e;
}

int vl_of_compute(const NetworkDescriptor& net, const VirtualLayer& vl, const Layer** out) {
  for (const auto& id : vl.member_layer_ids)
    if (const Layer* l = net.find_layer(id); l && is_compute(l->kind)) {
      *out = l;
      return 1;
    }
  return 0;
}

bool at_floor(const Fixed& f) { return f.total_bits <= f.integer_bits + 1; }

}  // namespace

PruneResult auto_prune(const NetworkDescriptor& net, double alpha, double beta, const EvaluationBackend& backend,
                       const std::optional<KernelDescriptor>& kernel) {
  require_tolerance(alpha, "pruning");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("pruning rate threshold must lie in (0,1)");
  PruneResult res;
  NetworkDescriptor probe = net;
  auto eval = [&](double rate) {
    probe.pruning_rate = rate;
    return backend.evaluate(probe, kernel).accuracy;
  };
  const double acc0 = eval(0.0);
  res.trace.push_back({0.0, acc0, 0.0, true});
  res.accuracy = acc0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > beta) {
    const double mid = 0.5 * (lo + hi);
    const double acc = eval(mid);
    const double loss = loss_against(acc0, acc);
    const bool ok = loss <= alpha;
    res.trace.push_back({mid, acc, loss, ok});
    if (ok) {
      lo = mid;
      res.accuracy = acc;
    } else {
      hi = mid;
    }
  }
  res.rate = lo;
  return res;
}

ScaleResult auto_scale(const NetworkDescriptor& net, double alpha, int max_trials, const EvaluationBackend& backend,
                       const std::optional<KernelDescriptor>& kernel, double step) {
  require_tolerance(alpha, "scaling");
  if (max_trials < 1) throw std::invalid_argument("scaling needs at least one trial");
  if (!(step > 0.0 && step < 1.0)) throw std::invalid_argument("scaling step must lie in (0,1)");
  ScaleResult res;
  NetworkDescriptor probe = net;
  auto eval = [&](double factor) {
    probe.scale_factor = factor;
    return backend.evaluate(probe, kernel).accuracy;
  };
  const double acc0 = eval(1.0);
  res.trace.push_back({1.0, acc0, 0.0, true});
  res.accuracy = acc0;
  double factor = 1.0;
  for (int trial = 2; trial <= max_trials; ++trial) {
    factor *= step;
    const double acc = eval(factor);
    const double loss = loss_against(acc0, acc);
    const bool ok = loss <= alpha;
    res.trace.push_back({factor, acc, loss, ok});
    if (!ok) break;
    res.factor = factor;
    res.accuracy = acc;
  }
  return res;
}

KernelDescriptor lossless_reduce(const NetworkDescriptor& net, const KernelDescriptor& kernel) {
  KernelDescriptor out = kernel;
  for (auto& vl : out.virtual_layers) {
    const Layer* layer = nullptr;
    if (!vl_of_compute(net, vl, &layer))
      throw std::invalid_argument("virtual layer '" + vl.id + "' has no compute layer in the network");
    if (!layer->weight_stats) continue;
    auto apply = [](Fixed& f, double max_abs) {
      if (!(max_abs > 0.0)) return;
      const int want = lossless_integer_bits(max_abs);
      if (want <= f.integer_bits) {
        const int total = std::max(f.total_bits - (f.integer_bits - want), want + 1);
        f.total_bits = std::min(f.total_bits, total);
        f.integer_bits = want;
      } else {
        f.integer_bits = std::min(want, f.total_bits - 1);
      }
    };
    apply(vl.precisions.weights, layer->weight_stats->max_abs_weight);
    apply(vl.precisions.biases, layer->weight_stats->max_abs_bias);
  }
  return out;
}

QhsResult qhs(const NetworkDescriptor& net, const KernelDescriptor& kernel, double alpha,
              const EvaluationBackend& backend) {
  require_tolerance(alpha, "quantization");
  if (auto problems = check_kernel(kernel, net); !problems.empty())
    throw std::invalid_argument("kernel does not match network: " + problems.front());
  QhsResult res;
  auto eval = [&](const KernelDescriptor& k) {
    ++res.evaluations;
    return backend.evaluate(net, k).accuracy;
  };
  const double acc0 = eval(kernel);

  KernelDescriptor current = lossless_reduce(net, kernel);
  double acc = eval(current);
  if (loss_against(acc0, acc) > alpha) {
    // Keep the map the caller supplied; it satisfies the tolerance trivially.
    current = kernel;
    acc = acc0;
    res.lossless_applied = false;
  }

  const std::size_t n = current.virtual_layers.size();
  std::vector<PrecisionRef> refs;
  for (std::size_t i = 0; i < n; ++i)
    for (auto k : kPrecisionKinds) refs.push_back({i, k});
  std::vector<char> reducible(refs.size());
  for (std::size_t r = 0; r < refs.size(); ++r)
    reducible[r] = current.virtual_layers[refs[r].layer].reducible[refs[r].kind];
  auto fixed_of = [&](KernelDescriptor& k, const PrecisionRef& r) -> Fixed& {
    return k.virtual_layers[r.layer].precisions[r.kind];
  };

  for (;;) {
    std::vector<std::size_t> active;
    for (std::size_t r = 0; r < refs.size(); ++r)
      if (reducible[r] && !at_floor(fixed_of(current, refs[r]))) active.push_back(r);
    if (active.empty()) break;

    KernelDescriptor trial = current;
    for (auto r : active) --fixed_of(trial, refs[r]).total_bits;
    if (const double a = eval(trial); loss_against(acc0, a) <= alpha) {
      current = std::move(trial);
      acc = a;
      continue;
    }

    // Sensitivity probes from the last accepted map, in deterministic order.
    std::optional<std::pair<KernelDescriptor, double>> first_survivor;
    bool blocked_any = false;
    for (auto r : active) {
      KernelDescriptor lone = current;
      --fixed_of(lone, refs[r]).total_bits;
      const double a = eval(lone);
      if (loss_against(acc0, a) > alpha) {
        reducible[r] = 0;
        res.blocked.push_back(refs[r]);
        blocked_any = true;
      } else if (!first_survivor) {
        first_survivor.emplace(std::move(lone), a);
      }
    }
    if (!first_survivor) break;
    if (!blocked_any) {
      // Every lone step is fine but not all together: take one step so the
      // loop always makes progress.
      current = std::move(first_survivor->first);
      acc = first_survivor->second;
    }
  }

  for (std::size_t r = 0; r < refs.size(); ++r)
    if (at_floor(fixed_of(current, refs[r]))) res.at_floor.push_back(refs[r]);
  res.kernel = std::move(current);
  res.accuracy = acc;
  res.loss = loss_against(acc0, acc);
  return res;
}

// --- pipe-task adapters ------------------------------------------------------

KernelDescriptor working_kernel(const MetaModel& mm, std::int64_t net_version, std::string_view instance,
                                std::string_view task_type, const EvaluationBackend& backend, bool carry_over) {
  const ModelEntry* src = mm.space.find(net_version);
  if (!src || src->stage != Stage::Network) throw std::invalid_argument("no network at the requested version");
  const NetworkDescriptor& net = src->network();

  Fixed precision = backend.default_precision();
  if (auto v = resolve_hls(mm, instance, task_type, "default_precision")) {
    if (const auto* s = std::get_if<std::string>(&*v)) precision = parse_fixed(*s);
    else throw std::invalid_argument("default_precision must be a string such as ap_fixed<18,8>");
  }
  KernelDescriptor k;
  k.source_network_version = net_version;
  k.virtual_layers = build_virtual_layers(net, precision);
  k.device = backend.default_device().name;
  k.clock_period_ns = backend.default_clock_period_ns();

  const ModelEntry* prev = carry_over ? mm.space.latest(Stage::Kernel) : nullptr;
  if (prev) {
    const KernelDescriptor& pk = prev->kernel();
    for (auto& vl : k.virtual_layers)
      for (const auto& old : pk.virtual_layers)
        if (old.id == vl.id) {
          vl.precisions = old.precisions;
          vl.reducible = old.reducible;
        }
    if (!pk.device.empty()) k.device = pk.device;
    k.clock_period_ns = pk.clock_period_ns;
  }
  if (auto v = resolve_hls(mm, instance, task_type, "FPGA_part_number")) {
    if (const auto* s = std::get_if<std::string>(&*v)) k.device = backend.device(*s).name;
    else throw std::invalid_argument("FPGA_part_number must be a string");
  }
  if (auto v = resolve_hls(mm, instance, task_type, "clock_period")) {
    const auto* d = std::get_if<double>(&*v);
    if (!d || !(*d > 0.0)) throw std::invalid_argument("clock_period must be a positive number");
    k.clock_period_ns = *d;
  }
  return k;
}

std::string run_pruning_task(MetaModel& mm, std::string_view instance, const EvaluationBackend& backend) {
  const double alpha = required_number(mm, instance, kPruningType, "tolerate_acc_loss");
  const double beta = required_number(mm, instance, kPruningType, "pruning_rate_thresh");
  const ModelEntry& src = latest_network(mm, instance);
  const NetworkDescriptor net = src.network();
  const bool has_kernel = mm.space.latest(Stage::Kernel) != nullptr;
  std::optional<KernelDescriptor> kernel;
  if (has_kernel) kernel = working_kernel(mm, src.version, instance, kPruningType, backend, true);

  const PruneResult r = auto_prune(net, alpha, beta, backend, kernel);
  NetworkDescriptor out = net;
  out.pruning_rate = r.rate;
  Metrics m = backend.evaluate(out, kernel);
  mm.space.put(Stage::Network, out, m, std::string(instance));
  return "pruning_rate=" + num(r.rate) + " accuracy=" + num(m.accuracy) + " alpha=" + num(alpha) +
         " evaluations=" + std::to_string(r.trace.size());
}

std::string run_scaling_task(MetaModel& mm, std::string_view instance, const EvaluationBackend& backend) {
  const double alpha = required_number(mm, instance, kScalingType, "tolerate_acc_loss");
  const int max_trials =
      static_cast<int>(mm.cfg.resolve_number(instance, kScalingType, "max_trials_num").value_or(10.0));
  const double step = mm.cfg.resolve_number(instance, kScalingType, "default_scale_factor").value_or(0.5);
  const bool automatic = mm.cfg.resolve_bool(instance, kScalingType, "scale_auto").value_or(true);
  const ModelEntry& src = latest_network(mm, instance);
  const NetworkDescriptor net = src.network();
  std::optional<KernelDescriptor> kernel;
  if (mm.space.latest(Stage::Kernel)) kernel = working_kernel(mm, src.version, instance, kScalingType, backend, true);

  NetworkDescriptor out = net;
  std::size_t evaluations = 1;
  if (automatic) {
    const ScaleResult r = auto_scale(net, alpha, max_trials, backend, kernel, step);
    out.scale_factor = r.factor;
    evaluations = r.trace.size();
  } else {
    if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("default_scale_factor must lie in (0,1]");
    out.scale_factor = step;
  }
  Metrics m = backend.evaluate(out, kernel);
  mm.space.put(Stage::Network, out, m, std::string(instance));
  return "scale_factor=" + num(out.scale_factor) + " accuracy=" + num(m.accuracy) + " alpha=" + num(alpha) +
         " evaluations=" + std::to_string(evaluations);
}

std::string run_quantization_task(MetaModel& mm, std::string_view instance, const EvaluationBackend& backend) {
  const double alpha = required_number(mm, instance, kQuantizationType, "tolerate_acc_loss");
  const ModelEntry& src = latest_network(mm, instance);
  const NetworkDescriptor net = src.network();
  const KernelDescriptor start = working_kernel(mm, src.version, instance, kQuantizationType, backend, false);
  QhsResult r = qhs(net, start, alpha, backend);
  Metrics m = backend.evaluate(net, r.kernel);
  std::string map;
  for (const auto& vl : r.kernel.virtual_layers) {
    map += " " + vl.id + "=";
    for (auto kind : kPrecisionKinds) {
      if (kind != PrecisionKind::Weights) map += "/";
      map += to_string(vl.precisions[kind]);
    }
  }
  mm.space.put(Stage::Kernel, std::move(r.kernel), m, std::string(instance));
  return "accuracy=" + num(m.accuracy) + " alpha=" + num(alpha) + " evaluations=" +
         std::to_string(r.evaluations) + " blocked=" + std::to_string(r.blocked.size()) + map;
}

std::string run_model_gen_task(MetaModel& mm, std::string_view instance, const EvaluationBackend& backend) {
  const NetworkDescriptor& net = backend.reference_network();
  Metrics m = backend.evaluate(net, std::nullopt);
  mm.space.put(Stage::Network, net, m, std::string(instance));
  std::string detail = "network=" + net.name + " accuracy=" + num(m.accuracy);
  for (const char* ignored : {"train_epochs", "IOType"})
    if (mm.cfg.resolve(instance, kModelGenType, ignored)) detail += std::string(" ignored=") + ignored;
  return detail;
}

std::string run_hls_mock_task(MetaModel& mm, std::string_view instance, Vendor vendor,
                              const EvaluationBackend& backend) {
  const std::string_view type = vendor == Vendor::A ? kHlsAType : kHlsBType;
  const ModelEntry& src = latest_network(mm, instance);
  KernelDescriptor k = working_kernel(mm, src.version, instance, type, backend, true);

  // Without an explicit part the first matching-vendor device stands in.
  const bool explicit_part = resolve_hls(mm, instance, type, "FPGA_part_number").has_value();
  if (backend.device(k.device).vendor != vendor) {
    if (explicit_part)
      throw std::runtime_error("device '" + k.device + "' is not a vendor " + (vendor == Vendor::A ? "A" : "B") +
                               " part");
    bool found = false;
    for (const auto& name : backend.device_names())
      if (backend.device(name).vendor == vendor) {
        k.device = name;
        found = true;
        break;
      }
    if (!found) throw std::runtime_error("the backend has no device for this vendor");
  }
  Metrics m = backend.evaluate(src.network(), k);
  const std::string device = k.device;
  mm.space.put(Stage::Kernel, std::move(k), m, std::string(instance));
  return "device=" + device + " dsp=" + std::to_string(m.dsp_used) + " lut=" + std::to_string(m.lut_used) +
         " max_util=" + num(m.max_utilization());
}

}  // namespace flowforge
