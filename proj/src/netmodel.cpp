#include "flowforge/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace flowforge {

namespace {

constexpr std::pair<LayerKind, std::string_view> kLayerKindNames[] = {
    {LayerKind::Dense, "dense"},           {LayerKind::Conv2d, "conv2d"},
    {LayerKind::Pool, "pool"},             {LayerKind::BatchNorm, "batchnorm"},
    {LayerKind::Activation, "activation"}, {LayerKind::Flatten, "flatten"},
    {LayerKind::Recurrent, "recurrent"},
};

std::int64_t product(const std::vector<std::int64_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::int64_t{1}, std::multiplies<>());
}

std::int64_t ceil_count(double v) {
  // Guard against 12.000000000001 style round-off inflating a count.
  return static_cast<std::int64_t>(std::ceil(v - 1e-9));
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kLayerKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<LayerKind> parse_layer_kind(std::string_view text) {
  for (const auto& [k, name] : kLayerKindNames)
    if (name == text) return k;
  return std::nullopt;
}

bool is_compute(LayerKind kind) {
  return kind == LayerKind::Dense || kind == LayerKind::Conv2d || kind == LayerKind::Recurrent;
}

const Layer* NetworkDescriptor::find_layer(std::string_view id) const {
  for (const auto& l : layers)
    if (l.id == id) return &l;
  return nullptr;
}

std::vector<std::string> check_network(const NetworkDescriptor& net) {
  std::vector<std::string> problems;
  if (net.layers.empty()) problems.push_back("network has no layers");
  if (!(net.base_accuracy >= 0.0 && net.base_accuracy <= 1.0))
    problems.push_back("base_accuracy outside [0,1]");
  if (!(net.pruning_rate >= 0.0 && net.pruning_rate < 1.0))
    problems.push_back("pruning_rate outside [0,1)");
  if (!(net.scale_factor > 0.0 && net.scale_factor <= 1.0))
    problems.push_back("scale_factor outside (0,1]");

  bool any_compute = false;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    const std::string where = "layer '" + l.id + "': ";
    if (l.id.empty()) problems.push_back("layer " + std::to_string(i) + " has an empty id");
    for (std::size_t j = 0; j < i; ++j)
      if (net.layers[j].id == l.id) problems.push_back(where + "duplicate id");
    if (l.input_dims.empty() || l.output_dims.empty()) problems.push_back(where + "missing dims");
    for (auto d : l.input_dims)
      if (d <= 0) problems.push_back(where + "non-positive input dim");
    for (auto d : l.output_dims)
      if (d <= 0) problems.push_back(where + "non-positive output dim");
    if (l.mult_count < 0) problems.push_back(where + "negative mult_count");
    if (is_compute(l.kind)) {
      any_compute = true;
      if (!l.weight_stats) problems.push_back(where + "compute layer without weight_stats");
      else if (!(l.weight_stats->max_abs_weight >= 0.0 && l.weight_stats->max_abs_bias >= 0.0))
        problems.push_back(where + "negative weight statistics");
    }
    if (i + 1 < net.layers.size() && l.output_dims != net.layers[i + 1].input_dims)
      problems.push_back(where + "output dims differ from the next layer's input dims");
  }
  if (!net.layers.empty() && !any_compute) problems.push_back("network has no compute layer");
  return problems;
}

void require_valid(const NetworkDescriptor& net) {
  auto problems = check_network(net);
  if (!problems.empty()) throw std::invalid_argument("invalid network '" + net.name + "': " + problems.front());
}

bool is_valid(Fixed f) {
  return f.total_bits >= 2 && f.total_bits <= 32 && f.integer_bits >= 1 && f.integer_bits <= f.total_bits;
}

Fixed parse_fixed(std::string_view text) {
  std::string s(text);
  auto lt = s.find('<');
  if (lt != std::string::npos) {
    auto gt = s.find('>', lt);
    if (gt == std::string::npos || s.substr(0, lt) != "ap_fixed")
      throw std::invalid_argument("malformed fixed-point format: " + s);
    s = s.substr(lt + 1, gt - lt - 1);
  }
  auto comma = s.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("malformed fixed-point format: " + std::string(text));
  Fixed f;
  try {
    f.total_bits = std::stoi(s.substr(0, comma));
    f.integer_bits = std::stoi(s.substr(comma + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("malformed fixed-point format: " + std::string(text));
  }
  if (!is_valid(f)) throw std::invalid_argument("fixed-point format out of range: " + std::string(text));
  return f;
}

std::string to_string(Fixed f) {
  return "ap_fixed<" + std::to_string(f.total_bits) + "," + std::to_string(f.integer_bits) + ">";
}

std::string_view to_string(PrecisionKind kind) {
  switch (kind) {
    case PrecisionKind::Weights: return "weights";
    case PrecisionKind::Biases: return "biases";
    case PrecisionKind::Results: return "results";
  }
  return "unknown";
}

Fixed& PrecisionSet::operator[](PrecisionKind kind) {
  switch (kind) {
    case PrecisionKind::Weights: return weights;
    case PrecisionKind::Biases: return biases;
    case PrecisionKind::Results: break;
  }
  return results;
}

const Fixed& PrecisionSet::operator[](PrecisionKind kind) const {
  return const_cast<PrecisionSet&>(*this)[kind];
}

bool& ReducibleFlags::operator[](PrecisionKind kind) {
  switch (kind) {
    case PrecisionKind::Weights: return weights;
    case PrecisionKind::Biases: return biases;
    case PrecisionKind::Results: break;
  }
  return results;
}

bool ReducibleFlags::operator[](PrecisionKind kind) const {
  return const_cast<ReducibleFlags&>(*this)[kind];
}

std::vector<std::string> check_kernel(const KernelDescriptor& kernel, const NetworkDescriptor& net) {
  std::vector<std::string> problems;
  std::map<std::string, int, std::less<>> seen;
  for (const auto& vl : kernel.virtual_layers) {
    int compute = 0;
    for (const auto& id : vl.member_layer_ids) {
      const Layer* l = net.find_layer(id);
      if (!l) {
        problems.push_back("virtual layer '" + vl.id + "' references unknown layer '" + id + "'");
        continue;
      }
      if (++seen[id] > 1) problems.push_back("layer '" + id + "' belongs to several virtual layers");
      if (is_compute(l->kind)) ++compute;
    }
    if (compute != 1) problems.push_back("virtual layer '" + vl.id + "' must hold exactly one compute layer");
    for (auto k : kPrecisionKinds)
      if (!is_valid(vl.precisions[k]))
        problems.push_back("virtual layer '" + vl.id + "' has an invalid " + std::string(to_string(k)) +
                           " precision");
  }
  for (const auto& l : net.layers)
    if (is_compute(l.kind) && !seen.count(l.id))
      problems.push_back("compute layer '" + l.id + "' is not covered by the kernel");
  if (!(kernel.clock_period_ns > 0.0)) problems.push_back("clock period must be positive");
  return problems;
}

double Metrics::max_utilization() const { return std::max({dsp_util, lut_util, ff_util, bram_util}); }

std::optional<double> metric_value(const Metrics& m, std::string_view name) {
  if (name == "accuracy") return m.accuracy;
  if (name == "accuracy_loss" || name == "acc_loss") return m.accuracy_loss;
  if (name == "latency_ns" || name == "latency") return m.latency_ns;
  if (name == "initiation_interval_ns" || name == "ii") return m.initiation_interval_ns;
  if (name == "dsp" || name == "dsp_used") return static_cast<double>(m.dsp_used);
  if (name == "lut" || name == "lut_used") return static_cast<double>(m.lut_used);
  if (name == "ff" || name == "ff_used") return static_cast<double>(m.ff_used);
  if (name == "bram" || name == "bram_used") return static_cast<double>(m.bram_used);
  if (name == "dsp_util") return m.dsp_util;
  if (name == "lut_util") return m.lut_util;
  if (name == "ff_util") return m.ff_util;
  if (name == "bram_util") return m.bram_util;
  if (name == "max_util") return m.max_utilization();
  return std::nullopt;
}

std::vector<std::string> metric_names() {
  return {"accuracy", "accuracy_loss", "latency_ns", "initiation_interval_ns", "dsp",      "lut",
          "ff",       "bram",          "dsp_util",   "lut_util",               "ff_util", "bram_util",
          "max_util"};
}

std::vector<VirtualLayer> build_virtual_layers(const NetworkDescriptor& net, Fixed default_precision) {
  std::vector<VirtualLayer> out;
  std::vector<std::string> prefix;
  for (const auto& l : net.layers) {
    if (is_compute(l.kind)) {
      VirtualLayer vl;
      vl.id = l.id;
      vl.member_layer_ids = std::move(prefix);
      prefix.clear();
      vl.member_layer_ids.push_back(l.id);
      vl.precisions = {default_precision, default_precision, default_precision};
      out.push_back(std::move(vl));
    } else if (out.empty()) {
      prefix.push_back(l.id);
    } else {
      out.back().member_layer_ids.push_back(l.id);
    }
  }
  return out;
}

int lossless_integer_bits(double max_abs_value) {
  if (!(max_abs_value > 0.0) || !std::isfinite(max_abs_value))
    throw std::invalid_argument("lossless_integer_bits needs a positive finite value");
  int exponent = 0;
  std::frexp(max_abs_value, &exponent);  // value in [2^(e-1), 2^e)
  return std::max(1, exponent + 1);
}

// --- benchmark files -------------------------------------------------------

namespace {

Vendor parse_vendor(const std::string& s) {
  if (s == "A") return Vendor::A;
  if (s == "B") return Vendor::B;
  throw std::invalid_argument("vendor must be \"A\" or \"B\", got \"" + s + "\"");
}

}  // namespace

void to_json(nlohmann::json& j, const Fixed& f) { j = nlohmann::json{{"total_bits", f.total_bits}, {"integer_bits", f.integer_bits}}; }

void from_json(const nlohmann::json& j, Fixed& f) {
  if (j.is_string()) {
    f = parse_fixed(j.get<std::string>());
    return;
  }
  f.total_bits = j.at("total_bits").get<int>();
  f.integer_bits = j.at("integer_bits").get<int>();
}

void to_json(nlohmann::json& j, const Layer& l) {
  j = nlohmann::json{{"id", l.id},
                     {"kind", std::string(to_string(l.kind))},
                     {"input_dims", l.input_dims},
                     {"output_dims", l.output_dims},
                     {"mult_count", l.mult_count}};
  if (l.weight_stats)
    j["weight_stats"] = {{"max_abs_weight", l.weight_stats->max_abs_weight},
                         {"max_abs_bias", l.weight_stats->max_abs_bias}};
}

void from_json(const nlohmann::json& j, Layer& l) {
  l.id = j.at("id").get<std::string>();
  auto kind = parse_layer_kind(j.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown layer kind: " + j.at("kind").get<std::string>());
  l.kind = *kind;
  l.input_dims = j.at("input_dims").get<std::vector<std::int64_t>>();
  l.output_dims = j.at("output_dims").get<std::vector<std::int64_t>>();
  l.mult_count = j.value("mult_count", std::int64_t{0});
  l.weight_stats.reset();
  if (j.contains("weight_stats")) {
    const auto& w = j.at("weight_stats");
    l.weight_stats = WeightStats{w.at("max_abs_weight").get<double>(), w.at("max_abs_bias").get<double>()};
  }
}

void to_json(nlohmann::json& j, const NetworkDescriptor& n) {
  j = nlohmann::json{{"name", n.name},
                     {"layers", n.layers},
                     {"base_accuracy", n.base_accuracy},
                     {"pruning_rate", n.pruning_rate},
                     {"scale_factor", n.scale_factor}};
}

void from_json(const nlohmann::json& j, NetworkDescriptor& n) {
  n.name = j.value("name", std::string{});
  n.layers = j.at("layers").get<std::vector<Layer>>();
  n.base_accuracy = j.at("base_accuracy").get<double>();
  n.pruning_rate = j.value("pruning_rate", 0.0);
  n.scale_factor = j.value("scale_factor", 1.0);
}

void to_json(nlohmann::json& j, const VirtualLayer& vl) {
  j = nlohmann::json{{"id", vl.id},
                     {"members", vl.member_layer_ids},
                     {"weights", vl.precisions.weights},
                     {"biases", vl.precisions.biases},
                     {"results", vl.precisions.results},
                     {"reducible",
                      {{"weights", vl.reducible.weights},
                       {"biases", vl.reducible.biases},
                       {"results", vl.reducible.results}}}};
}

void from_json(const nlohmann::json& j, VirtualLayer& vl) {
  vl.id = j.at("id").get<std::string>();
  vl.member_layer_ids = j.at("members").get<std::vector<std::string>>();
  vl.precisions.weights = j.at("weights").get<Fixed>();
  vl.precisions.biases = j.at("biases").get<Fixed>();
  vl.precisions.results = j.at("results").get<Fixed>();
  vl.reducible = {};
  if (j.contains("reducible")) {
    const auto& r = j.at("reducible");
    vl.reducible.weights = r.value("weights", true);
    vl.reducible.biases = r.value("biases", true);
    vl.reducible.results = r.value("results", true);
  }
}

void to_json(nlohmann::json& j, const KernelDescriptor& k) {
  j = nlohmann::json{{"source_network_version", k.source_network_version},
                     {"virtual_layers", k.virtual_layers},
                     {"device", k.device},
                     {"clock_period_ns", k.clock_period_ns}};
}

void from_json(const nlohmann::json& j, KernelDescriptor& k) {
  k.source_network_version = j.at("source_network_version").get<std::int64_t>();
  k.virtual_layers = j.at("virtual_layers").get<std::vector<VirtualLayer>>();
  k.device = j.at("device").get<std::string>();
  k.clock_period_ns = j.at("clock_period_ns").get<double>();
}

void to_json(nlohmann::json& j, const Metrics& m) {
  j = nlohmann::json{{"accuracy", m.accuracy},   {"accuracy_loss", m.accuracy_loss},
                     {"latency_ns", m.latency_ns}, {"initiation_interval_ns", m.initiation_interval_ns},
                     {"dsp_used", m.dsp_used},   {"lut_used", m.lut_used},
                     {"ff_used", m.ff_used},     {"bram_used", m.bram_used},
                     {"dsp_util", m.dsp_util},   {"lut_util", m.lut_util},
                     {"ff_util", m.ff_util},     {"bram_util", m.bram_util}};
}

void from_json(const nlohmann::json& j, Metrics& m) {
  m.accuracy = j.at("accuracy").get<double>();
  m.accuracy_loss = j.at("accuracy_loss").get<double>();
  m.latency_ns = j.at("latency_ns").get<double>();
  m.initiation_interval_ns = j.at("initiation_interval_ns").get<double>();
  m.dsp_used = j.at("dsp_used").get<std::int64_t>();
  m.lut_used = j.at("lut_used").get<std::int64_t>();
  m.ff_used = j.at("ff_used").get<std::int64_t>();
  m.bram_used = j.at("bram_used").get<std::int64_t>();
  m.dsp_util = j.at("dsp_util").get<double>();
  m.lut_util = j.at("lut_util").get<double>();
  m.ff_util = j.at("ff_util").get<double>();
  m.bram_util = j.at("bram_util").get<double>();
}

void to_json(nlohmann::json& j, const DeviceProfile& d) {
  j = nlohmann::json{{"name", d.name},
                     {"dsp", d.dsp_capacity},
                     {"lut", d.lut_capacity},
                     {"ff", d.ff_capacity},
                     {"bram", d.bram_capacity},
                     {"vendor", d.vendor == Vendor::A ? "A" : "B"}};
}

void from_json(const nlohmann::json& j, DeviceProfile& d) {
  d.name = j.at("name").get<std::string>();
  d.dsp_capacity = j.at("dsp").get<std::int64_t>();
  d.lut_capacity = j.at("lut").get<std::int64_t>();
  d.ff_capacity = j.at("ff").get<std::int64_t>();
  d.bram_capacity = j.at("bram").get<std::int64_t>();
  d.vendor = parse_vendor(j.value("vendor", std::string("A")));
}

Benchmark parse_benchmark(const nlohmann::json& doc) {
  Benchmark b;
  b.name = doc.at("name").get<std::string>();
  b.seed = doc.value("seed", std::uint64_t{0});
  b.default_precision = doc.contains("default_precision") ? doc.at("default_precision").get<Fixed>() : Fixed{18, 8};
  b.input_bits = doc.value("input_bits", 16);

  const auto& c = doc.value("constants", nlohmann::json::object());
  b.sigma = c.value("sigma", 0.0);
  b.s_min = c.value("s_min", 0.5);
  b.lut_per_mult = c.value("lut_per_mult", 0.5);
  b.dsp_threshold_bits = c.value("dsp_threshold_bits", 9);
  b.ff_per_bit = c.value("ff_per_bit", 1.0);
  b.bram_block_bits = c.value("bram_block_bits", std::int64_t{0});
  b.clock_period_ns = c.value("clock_period_ns", 5.0);
  b.ii_factor = c.value("ii_factor", 1.0);

  b.network.name = b.name;
  b.network.base_accuracy = doc.at("base_accuracy").get<double>();
  for (const auto& lj : doc.at("layers")) {
    Layer layer = lj.get<Layer>();
    if (is_compute(layer.kind)) {
      LayerConstants lc;
      lc.kappa = lj.value("kappa", 0.0);
      lc.redundancy = lj.value("redundancy", 0.0);
      lc.lambda = lj.value("lambda", 0.0);
      lc.pipeline_depth = lj.value("depth", 1);
      if (lj.contains("free_bits")) {
        const auto& fb = lj.at("free_bits");
        lc.free_bits.weights.total_bits = fb.value("weights", 2);
        lc.free_bits.biases.total_bits = fb.value("biases", 2);
        lc.free_bits.results.total_bits = fb.value("results", 2);
      }
      b.constants[layer.id] = lc;
    } else {
      b.depths[layer.id] = lj.value("depth", 0);
    }
    b.network.layers.push_back(std::move(layer));
  }
  require_valid(b.network);

  for (const auto& dj : doc.at("devices")) {
    DeviceProfile d = dj.get<DeviceProfile>();
    b.devices.push_back(std::move(d));
  }
  if (b.devices.empty()) throw std::invalid_argument("benchmark declares no devices");
  b.default_device = doc.value("default_device", b.devices.front().name);
  if (!is_valid(b.default_precision)) throw std::invalid_argument("invalid default precision");
  return b;
}

Benchmark load_benchmark(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open benchmark file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("cannot parse benchmark file " + path + ": " + e.what());
  }
  return parse_benchmark(doc);
}

nlohmann::json benchmark_to_json(const Benchmark& b) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : b.network.layers) {
    nlohmann::json lj = l;
    if (auto it = b.constants.find(l.id); it != b.constants.end()) {
      const auto& lc = it->second;
      lj["kappa"] = lc.kappa;
      lj["redundancy"] = lc.redundancy;
      lj["lambda"] = lc.lambda;
      lj["depth"] = lc.pipeline_depth;
      lj["free_bits"] = {{"weights", lc.free_bits.weights.total_bits},
                         {"biases", lc.free_bits.biases.total_bits},
                         {"results", lc.free_bits.results.total_bits}};
    } else if (auto d = b.depths.find(l.id); d != b.depths.end()) {
      lj["depth"] = d->second;
    }
    layers.push_back(std::move(lj));
  }
  return {{"name", b.name},
          {"seed", b.seed},
          {"base_accuracy", b.network.base_accuracy},
          {"default_precision", b.default_precision},
          {"input_bits", b.input_bits},
          {"constants",
           {{"sigma", b.sigma},
            {"s_min", b.s_min},
            {"lut_per_mult", b.lut_per_mult},
            {"dsp_threshold_bits", b.dsp_threshold_bits},
            {"ff_per_bit", b.ff_per_bit},
            {"bram_block_bits", b.bram_block_bits},
            {"clock_period_ns", b.clock_period_ns},
            {"ii_factor", b.ii_factor}}},
          {"layers", layers},
          {"devices", b.devices},
          {"default_device", b.default_device}};
}

// --- synthetic backend -------------------------------------------------------

SyntheticBackend::SyntheticBackend(Benchmark bench) : bench_(std::move(bench)) {
  require_valid(bench_.network);
  for (const auto& d : bench_.devices)
    if (d.dsp_capacity <= 0 || d.lut_capacity <= 0 || d.ff_capacity <= 0 || d.bram_capacity <= 0)
      throw std::invalid_argument("device '" + d.name + "' has a non-positive capacity");
  device(bench_.default_device);
  for (const auto& l : bench_.network.layers)
    if (is_compute(l.kind) && !bench_.constants.count(l.id))
      throw std::invalid_argument("no cost-model constants for layer '" + l.id + "'");
  reference_accuracy_ = accuracy_of(bench_.network, default_kernel(bench_.network));
}

const DeviceProfile& SyntheticBackend::default_device() const { return device(bench_.default_device); }

const DeviceProfile& SyntheticBackend::device(std::string_view name) const {
  for (const auto& d : bench_.devices)
    if (d.name == name) return d;
  throw std::invalid_argument("unknown device profile: " + std::string(name));
}

std::vector<std::string> SyntheticBackend::device_names() const {
  std::vector<std::string> names;
  for (const auto& d : bench_.devices) names.push_back(d.name);
  return names;
}

KernelDescriptor SyntheticBackend::default_kernel(const NetworkDescriptor& net) const {
  KernelDescriptor k;
  k.virtual_layers = build_virtual_layers(net, bench_.default_precision);
  k.device = bench_.default_device;
  k.clock_period_ns = bench_.clock_period_ns;
  return k;
}

double SyntheticBackend::accuracy_of(const NetworkDescriptor& net, const KernelDescriptor& kernel) const {
  double acc = net.base_accuracy;
  for (const auto& l : net.layers) {
    if (!is_compute(l.kind)) continue;
    const auto& lc = bench_.constants.find(l.id)->second;
    acc -= lc.kappa * std::max(0.0, net.pruning_rate - lc.redundancy);
  }
  acc -= bench_.sigma * std::max(0.0, bench_.s_min - net.scale_factor);
  for (const auto& vl : kernel.virtual_layers) {
    const std::string* compute_id = nullptr;
    for (const auto& id : vl.member_layer_ids)
      if (const Layer* l = net.find_layer(id); l && is_compute(l->kind)) compute_id = &id;
    const auto& lc = bench_.constants.find(*compute_id)->second;
    for (auto kind : kPrecisionKinds) {
      int deficit = lc.free_bits[kind].total_bits - vl.precisions[kind].total_bits;
      acc -= lc.lambda * std::max(0, deficit);
    }
  }
  return std::clamp(acc, 0.0, 1.0);
}

Metrics SyntheticBackend::evaluate(const NetworkDescriptor& net,
                                   const std::optional<KernelDescriptor>& kernel_in) const {
  require_valid(net);
  const KernelDescriptor kernel = kernel_in ? *kernel_in : default_kernel(net);
  if (auto problems = check_kernel(kernel, net); !problems.empty())
    throw std::invalid_argument("kernel does not match network: " + problems.front());
  for (const auto& l : net.layers)
    if (is_compute(l.kind) && !bench_.constants.count(l.id))
      throw std::invalid_argument("no cost-model constants for layer '" + l.id + "'");
  const DeviceProfile& dev = kernel.device.empty() ? default_device() : device(kernel.device);
  if (dev.dsp_capacity <= 0 || dev.lut_capacity <= 0 || dev.ff_capacity <= 0 || dev.bram_capacity <= 0)
    throw std::invalid_argument("device '" + dev.name + "' has zero capacity");

  Metrics m;
  m.accuracy = accuracy_of(net, kernel);
  m.accuracy_loss = std::max(0.0, reference_accuracy_ - m.accuracy);

  const double p = net.pruning_rate;
  const double s = net.scale_factor;
  int input_bits = bench_.input_bits;
  double depth_total = 0.0;
  for (const auto& vl : kernel.virtual_layers) {
    for (const auto& id : vl.member_layer_ids) {
      const Layer* l = net.find_layer(id);
      if (is_compute(l->kind)) {
        const auto& lc = bench_.constants.find(id)->second;
        depth_total += lc.pipeline_depth;
        const double width_scale = l->kind == LayerKind::Recurrent ? s : s * s;
        const std::int64_t mults = ceil_count(static_cast<double>(l->mult_count) * (1.0 - p) * width_scale);
        const int w = vl.precisions.weights.total_bits;
        const bool on_dsp = dev.vendor == Vendor::A && w > bench_.dsp_threshold_bits;
        if (on_dsp) {
          // Hard multiplier plus operand glue equal to the widest fabric multiplier,
          // so LUT cost never rises as the weight width drops past the threshold.
          m.dsp_used += mults;
          m.lut_used += ceil_count(bench_.lut_per_mult * bench_.dsp_threshold_bits * input_bits *
                                   static_cast<double>(mults));
        } else {
          m.lut_used += ceil_count(bench_.lut_per_mult * w * input_bits * static_cast<double>(mults));
        }
        const int r = vl.precisions.results.total_bits;
        const std::int64_t outputs = ceil_count(static_cast<double>(product(l->output_dims)) * s);
        m.ff_used += ceil_count(bench_.ff_per_bit * r * static_cast<double>(outputs));
        if (bench_.bram_block_bits > 0)
          m.bram_used += ceil_count(static_cast<double>(mults) * w / static_cast<double>(bench_.bram_block_bits));
      } else if (auto d = bench_.depths.find(id); d != bench_.depths.end()) {
        depth_total += d->second;
      }
    }
    input_bits = vl.precisions.results.total_bits;
  }

  m.latency_ns = depth_total * kernel.clock_period_ns;
  m.initiation_interval_ns = kernel.clock_period_ns * bench_.ii_factor;
  m.dsp_util = static_cast<double>(m.dsp_used) / static_cast<double>(dev.dsp_capacity);
  m.lut_util = static_cast<double>(m.lut_used) / static_cast<double>(dev.lut_capacity);
  m.ff_util = static_cast<double>(m.ff_used) / static_cast<double>(dev.ff_capacity);
  m.bram_util = static_cast<double>(m.bram_used) / static_cast<double>(dev.bram_capacity);
  return m;
}

}  // namespace flowforge
