#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flowforge/metamodel.hpp"
#include "flowforge/netmodel.hpp"

namespace flowforge {

struct Probe {
  double value = 0.0;  // pruning rate or scale factor
  double accuracy = 0.0;
  double loss = 0.0;  // against the search's own starting accuracy
  bool feasible = false;
};

struct PruneResult {
  double rate = 0.0;
  double accuracy = 0.0;
  std::vector<Probe> trace;  // first probe is rate 0
};

struct ScaleResult {
  double factor = 1.0;
  double accuracy = 0.0;
  std::vector<Probe> trace;  // first probe is factor 1
};

struct PrecisionRef {
  std::size_t layer = 0;  // index into the kernel's virtual layers
  PrecisionKind kind = PrecisionKind::Weights;
  bool operator==(const PrecisionRef&) const = default;
};

struct QhsResult {
  KernelDescriptor kernel;
  double accuracy = 0.0;
  double loss = 0.0;
  int evaluations = 0;
  std::vector<PrecisionRef> blocked;   // a lone further bit violated the tolerance
  std::vector<PrecisionRef> at_floor;  // total_bits reached integer_bits + 1
  bool lossless_applied = true;
};

/// Binary search for the largest pruning rate whose loss stays within
/// alpha. `kernel` fixes the precisions used for every probe.
PruneResult auto_prune(const NetworkDescriptor& net, double alpha, double beta, const EvaluationBackend& backend,
                       const std::optional<KernelDescriptor>& kernel = std::nullopt);

/// Probes factors 1, step, step^2, ... until the loss exceeds alpha or the
/// trial budget runs out.
ScaleResult auto_scale(const NetworkDescriptor& net, double alpha, int max_trials, const EvaluationBackend& backend,
                       const std::optional<KernelDescriptor>& kernel = std::nullopt, double step = 0.5);

/// The precision map after lossless integer-bit reduction. Results keep
/// their integer bits; fraction bits are preserved.
KernelDescriptor lossless_reduce(const NetworkDescriptor& net, const KernelDescriptor& kernel);

/// Mixed-precision bit-width search. Loss is measured against the accuracy
/// of `kernel` as given.
QhsResult qhs(const NetworkDescriptor& net, const KernelDescriptor& kernel, double alpha,
              const EvaluationBackend& backend);

// --- pipe-task adapters ------------------------------------------------------
// Each reads its parameters from the CFG, appends exactly one model entry and
// returns the detail for the scheduler's finished record.

/// A kernel for `net_version`: precisions of the newest kernel are carried
/// over by virtual-layer id, otherwise defaults from the CFG and backend.
KernelDescriptor working_kernel(const MetaModel& mm, std::int64_t net_version, std::string_view instance,
                                std::string_view task_type, const EvaluationBackend& backend, bool carry_over);

std::string run_pruning_task(MetaModel& mm, std::string_view instance, const EvaluationBackend& backend);
std::string run_scaling_task(MetaModel& mm, std::string_view instance, const EvaluationBackend& backend);
std::string run_quantization_task(MetaModel& mm, std::string_view instance, const EvaluationBackend& backend);
std::string run_model_gen_task(MetaModel& mm, std::string_view instance, const EvaluationBackend& backend);
/// Mock synthesis; rejects devices of the other vendor.
std::string run_hls_mock_task(MetaModel& mm, std::string_view instance, Vendor vendor,
                              const EvaluationBackend& backend);

inline constexpr std::string_view kPruningType = "Pruning";
inline constexpr std::string_view kScalingType = "Scaling";
inline constexpr std::string_view kQuantizationType = "Quantization";
inline constexpr std::string_view kModelGenType = "KerasModelGen";
inline constexpr std::string_view kHlsAType = "VivadoHLS";
inline constexpr std::string_view kHlsBType = "IntelHLS";
inline constexpr std::string_view kHlsCommonType = "HLS4ML";

}  // namespace flowforge
