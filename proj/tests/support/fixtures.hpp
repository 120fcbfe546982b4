#pragma once

#include <string>

#include "flowforge/netmodel.hpp"
#include "support/oracles.hpp"

namespace fixture {

inline const flowforge::Benchmark& bench(const std::string& name) {
  static const flowforge::Benchmark jet = flowforge::load_benchmark(oracle::source_path("benchmarks/jetdnn-synth.json"));
  static const flowforge::Benchmark vgg = flowforge::load_benchmark(oracle::source_path("benchmarks/vgg7-synth.json"));
  static const flowforge::Benchmark lstm = flowforge::load_benchmark(oracle::source_path("benchmarks/lstm-synth.json"));
  if (name == "vgg7") return vgg;
  if (name == "lstm") return lstm;
  return jet;
}

inline const flowforge::SyntheticBackend& jet_backend() {
  static const flowforge::SyntheticBackend b(bench("jet"));
  return b;
}

}  // namespace fixture
