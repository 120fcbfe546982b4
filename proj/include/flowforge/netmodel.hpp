#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace flowforge {

enum class LayerKind { Dense, Conv2d, Pool, BatchNorm, Activation, Flatten, Recurrent };

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view text);

/// Dense, conv2d and recurrent layers carry weights and multipliers.
bool is_compute(LayerKind kind);

struct WeightStats {
  double max_abs_weight = 0.0;
  double max_abs_bias = 0.0;

  bool operator==(const WeightStats&) const = default;
};

struct Layer {
  std::string id;
  LayerKind kind = LayerKind::Dense;
  std::vector<std::int64_t> input_dims;
  std::vector<std::int64_t> output_dims;
  std::optional<WeightStats> weight_stats;
  // Multiplications at scale 1 and pruning 0.
  std::int64_t mult_count = 0;

  bool operator==(const Layer&) const = default;
};

struct NetworkDescriptor {
  std::string name;
  std::vector<Layer> layers;
  double base_accuracy = 0.0;
  double pruning_rate = 0.0;
  double scale_factor = 1.0;

  bool operator==(const NetworkDescriptor&) const = default;

  const Layer* find_layer(std::string_view id) const;
};

/// Every structural problem with the descriptor; empty when valid.
std::vector<std::string> check_network(const NetworkDescriptor& net);
/// Throws std::invalid_argument carrying the first problem found.
void require_valid(const NetworkDescriptor& net);

/// Signed fixed-point format; integer bits include the sign bit.
struct Fixed {
  int total_bits = 18;
  int integer_bits = 8;

  bool operator==(const Fixed&) const = default;
};

bool is_valid(Fixed f);
/// Accepts "ap_fixed<T,I>" or "T,I".
Fixed parse_fixed(std::string_view text);
std::string to_string(Fixed f);

enum class PrecisionKind { Weights = 0, Biases = 1, Results = 2 };
inline constexpr PrecisionKind kPrecisionKinds[] = {PrecisionKind::Weights, PrecisionKind::Biases,
                                                    PrecisionKind::Results};
std::string_view to_string(PrecisionKind kind);

struct PrecisionSet {
  Fixed weights;
  Fixed biases;
  Fixed results;

  Fixed& operator[](PrecisionKind kind);
  const Fixed& operator[](PrecisionKind kind) const;
  bool operator==(const PrecisionSet&) const = default;
};

struct ReducibleFlags {
  bool weights = true;
  bool biases = true;
  bool results = true;

  bool& operator[](PrecisionKind kind);
  bool operator[](PrecisionKind kind) const;
  bool operator==(const ReducibleFlags&) const = default;
};

// A compute layer grouped with the non-compute layers that follow it; the
// group shares one set of precisions.
struct VirtualLayer {
  std::string id;
  std::vector<std::string> member_layer_ids;
  PrecisionSet precisions;
  ReducibleFlags reducible;

  bool operator==(const VirtualLayer&) const = default;
};

struct KernelDescriptor {
  std::int64_t source_network_version = 0;
  std::vector<VirtualLayer> virtual_layers;
  std::string device;
  double clock_period_ns = 5.0;

  bool operator==(const KernelDescriptor&) const = default;
};

/// Problems with the kernel relative to the network it claims to implement.
std::vector<std::string> check_kernel(const KernelDescriptor& kernel, const NetworkDescriptor& net);

struct Metrics {
  double accuracy = 0.0;
  double accuracy_loss = 0.0;
  double latency_ns = 0.0;
  double initiation_interval_ns = 0.0;
  std::int64_t dsp_used = 0;
  std::int64_t lut_used = 0;
  std::int64_t ff_used = 0;
  std::int64_t bram_used = 0;
  double dsp_util = 0.0;
  double lut_util = 0.0;
  double ff_util = 0.0;
  double bram_util = 0.0;

  bool operator==(const Metrics&) const = default;

  double max_utilization() const;
};

/// Looks up a metric by its report name ("accuracy", "dsp", "lut_util", ...).
std::optional<double> metric_value(const Metrics& m, std::string_view name);
std::vector<std::string> metric_names();

enum class Vendor { A, B };

struct DeviceProfile {
  std::string name;
  std::int64_t dsp_capacity = 0;
  std::int64_t lut_capacity = 0;
  std::int64_t ff_capacity = 0;
  std::int64_t bram_capacity = 0;
  Vendor vendor = Vendor::A;

  bool operator==(const DeviceProfile&) const = default;
};

/// Groups each compute layer with its trailing non-compute layers. A leading
/// non-compute prefix joins the first virtual layer.
std::vector<VirtualLayer> build_virtual_layers(const NetworkDescriptor& net, Fixed default_precision);

/// Smallest I >= 1 such that |v| < 2^(I-1): magnitude bits plus the sign.
int lossless_integer_bits(double max_abs_value);

/// The evaluation point standing in for training plus HLS synthesis. Real
/// tool adapters implement the same interface.
class EvaluationBackend {
 public:
  virtual ~EvaluationBackend() = default;

  virtual const NetworkDescriptor& reference_network() const = 0;
  virtual Fixed default_precision() const = 0;
  virtual double default_clock_period_ns() const = 0;
  virtual const DeviceProfile& default_device() const = 0;
  /// Throws std::invalid_argument for unknown names.
  virtual const DeviceProfile& device(std::string_view name) const = 0;
  virtual std::vector<std::string> device_names() const = 0;

  /// Without a kernel the default precision applies uniformly on the
  /// default device.
  virtual Metrics evaluate(const NetworkDescriptor& net,
                           const std::optional<KernelDescriptor>& kernel) const = 0;
};

// Per compute layer constants of the synthetic cost model.
struct LayerConstants {
  double kappa = 0.0;       // accuracy slope past the redundancy knee
  double redundancy = 0.0;  // pruning rate tolerated for free
  double lambda = 0.0;      // accuracy per bit below a free-bits floor
  PrecisionSet free_bits{{2, 1}, {2, 1}, {2, 1}};  // only total_bits is used
  int pipeline_depth = 1;
};

struct Benchmark {
  std::string name;
  std::uint64_t seed = 0;
  NetworkDescriptor network;
  std::map<std::string, LayerConstants, std::less<>> constants;  // by compute layer id
  std::map<std::string, int, std::less<>> depths;                // non-compute layers
  Fixed default_precision{18, 8};
  int input_bits = 16;
  double sigma = 0.0;
  double s_min = 0.5;
  double lut_per_mult = 0.5;
  int dsp_threshold_bits = 9;
  double ff_per_bit = 1.0;
  std::int64_t bram_block_bits = 0;
  double clock_period_ns = 5.0;
  double ii_factor = 1.0;
  std::vector<DeviceProfile> devices;
  std::string default_device;
};

Benchmark parse_benchmark(const nlohmann::json& doc);
Benchmark load_benchmark(const std::string& path);
nlohmann::json benchmark_to_json(const Benchmark& bench);

/// Deterministic piecewise-linear accuracy and resource model.
class SyntheticBackend final : public EvaluationBackend {
 public:
  explicit SyntheticBackend(Benchmark bench);

  const NetworkDescriptor& reference_network() const override { return bench_.network; }
  Fixed default_precision() const override { return bench_.default_precision; }
  double default_clock_period_ns() const override { return bench_.clock_period_ns; }
  const DeviceProfile& default_device() const override;
  const DeviceProfile& device(std::string_view name) const override;
  std::vector<std::string> device_names() const override;

  Metrics evaluate(const NetworkDescriptor& net,
                   const std::optional<KernelDescriptor>& kernel) const override;

  /// Accuracy of the unmodified network at default precision.
  double reference_accuracy() const { return reference_accuracy_; }
  const Benchmark& benchmark() const { return bench_; }

 private:
  double accuracy_of(const NetworkDescriptor& net, const KernelDescriptor& kernel) const;
  KernelDescriptor default_kernel(const NetworkDescriptor& net) const;

  Benchmark bench_;
  double reference_accuracy_ = 0.0;
};

void to_json(nlohmann::json& j, const Fixed& f);
void from_json(const nlohmann::json& j, Fixed& f);
void to_json(nlohmann::json& j, const Layer& layer);
void from_json(const nlohmann::json& j, Layer& layer);
void to_json(nlohmann::json& j, const NetworkDescriptor& net);
void from_json(const nlohmann::json& j, NetworkDescriptor& net);
void to_json(nlohmann::json& j, const VirtualLayer& vl);
void from_json(const nlohmann::json& j, VirtualLayer& vl);
void to_json(nlohmann::json& j, const KernelDescriptor& k);
void from_json(const nlohmann::json& j, KernelDescriptor& k);
void to_json(nlohmann::json& j, const Metrics& m);
void from_json(const nlohmann::json& j, Metrics& m);
void to_json(nlohmann::json& j, const DeviceProfile& d);
void from_json(const nlohmann::json& j, DeviceProfile& d);

}  // namespace flowforge
