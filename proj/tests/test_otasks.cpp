#include <doctest.h>

#include <cmath>
#include <random>

#include "flowforge/otasks.hpp"
#include "support/fixtures.hpp"

using namespace flowforge;

namespace {

// Accuracy is a step function of one knob: 1 while the knob is on the good
// side of the edge, 0 otherwise.
class StepBackend final : public EvaluationBackend {
 public:
  StepBackend(const SyntheticBackend& inner, double prune_edge, double scale_edge)
      : inner_(inner), prune_edge_(prune_edge), scale_edge_(scale_edge) {}
  const NetworkDescriptor& reference_network() const override { return inner_.reference_network(); }
  Fixed default_precision() const override { return inner_.default_precision(); }
  double default_clock_period_ns() const override { return inner_.default_clock_period_ns(); }
  const DeviceProfile& default_device() const override { return inner_.default_device(); }
  const DeviceProfile& device(std::string_view n) const override { return inner_.device(n); }
  std::vector<std::string> device_names() const override { return inner_.device_names(); }
  Metrics evaluate(const NetworkDescriptor& net, const std::optional<KernelDescriptor>&) const override {
    ++calls;
    Metrics m;
    m.accuracy = net.pruning_rate <= prune_edge_ && net.scale_factor >= scale_edge_ ? 1.0 : 0.0;
    return m;
  }
  mutable int calls = 0;

 private:
  const SyntheticBackend& inner_;
  double prune_edge_, scale_edge_;
};

nlohmann::json one_layer_doc(int fw, int fb, int fr, double max_w, double max_b, double lambda) {
  std::mt19937_64 rng(0);
  auto doc = oracle::random_dense_benchmark(rng, 1);
  auto& l = doc["layers"][0];
  l["free_bits"] = {{"weights", fw}, {"biases", fb}, {"results", fr}};
  l["weight_stats"] = {{"max_abs_weight", max_w}, {"max_abs_bias", max_b}};
  l["lambda"] = lambda;
  return doc;
}

KernelDescriptor start_kernel(const NetworkDescriptor& net, Fixed f = {18, 8}) {
  KernelDescriptor k;
  k.virtual_layers = build_virtual_layers(net, f);
  return k;
}

std::map<std::string, oracle::BitTotals> totals_of(const KernelDescriptor& k) {
  std::map<std::string, oracle::BitTotals> out;
  for (const auto& vl : k.virtual_layers)
    out[vl.id] = {vl.precisions.weights.total_bits, vl.precisions.biases.total_bits, vl.precisions.results.total_bits};
  return out;
}

}  // namespace

TEST_CASE("auto_prune probes by bisection") {
  const StepBackend b(fixture::jet_backend(), 0.70, 0.0);
  const auto r = auto_prune(b.reference_network(), 0.0, 0.125, b);
  std::vector<double> probes;
  for (const auto& p : r.trace) probes.push_back(p.value);
  CHECK(probes == std::vector<double>{0.0, 0.5, 0.75, 0.625});
  CHECK(r.rate == 0.625);
  CHECK(std::abs(r.rate - 0.70) < 0.125);
  CHECK(r.trace[2].feasible == false);
}

TEST_CASE("auto_prune evaluation count for beta = 1/32") {
  const auto& b = fixture::jet_backend();
  const auto r = auto_prune(b.reference_network(), 0.02, 1.0 / 32, b);
  CHECK(r.trace.size() <= 6);
}

TEST_CASE("auto_prune with a generous tolerance reaches the top of the range") {
  const auto& b = fixture::jet_backend();
  const auto r = auto_prune(b.reference_network(), 1.0, 0.01, b);
  CHECK(r.rate >= 1.0 - 0.01);
  CHECK(r.rate < 1.0);
}

TEST_CASE("property: auto_prune bound and optimality against a dense sweep") {
  const auto& b = fixture::jet_backend();
  const oracle::AccuracyModel model(oracle::load_json("benchmarks/jetdnn-synth.json"));
  for (double alpha : {0.0, 0.005, 0.01, 0.02, 0.05, 0.1}) {
    for (int k = 1; k <= 10; ++k) {
      const double beta = std::ldexp(1.0, -k);
      const auto r = auto_prune(b.reference_network(), alpha, beta, b);
      CHECK(r.trace.size() <= static_cast<std::size_t>(1 + k));
      const double sweep = model.best_rate(alpha, beta / 4);
      CHECK(r.rate >= sweep - beta);
      CHECK(r.rate <= sweep + beta / 4);
      for (const auto& p : r.trace)
        if (p.feasible) CHECK(p.loss <= alpha);
    }
  }
}

TEST_CASE("auto_prune preconditions") {
  const auto& b = fixture::jet_backend();
  CHECK_THROWS_AS(auto_prune(b.reference_network(), -0.1, 0.1, b), std::invalid_argument);
  CHECK_THROWS_AS(auto_prune(b.reference_network(), 0.1, 0.0, b), std::invalid_argument);
  CHECK_THROWS_AS(auto_prune(b.reference_network(), 0.1, 1.0, b), std::invalid_argument);
}

TEST_CASE("auto_scale halves until the loss exceeds the tolerance") {
  const StepBackend b(fixture::jet_backend(), 1.0, 0.25);
  const auto r = auto_scale(b.reference_network(), 0.0, 10, b);
  std::vector<double> probes;
  for (const auto& p : r.trace) probes.push_back(p.value);
  CHECK(probes == std::vector<double>{1.0, 0.5, 0.25, 0.125});
  CHECK(r.factor == 0.25);

  const StepBackend lossy(fixture::jet_backend(), 1.0, 0.9);
  const auto z = auto_scale(lossy.reference_network(), 0.0, 10, lossy);
  CHECK(z.factor == 1.0);
  CHECK(z.trace.size() == 2);

  const auto one = auto_scale(b.reference_network(), 0.0, 1, b);
  CHECK(one.factor == 1.0);
  CHECK(one.trace.size() == 1);
  CHECK_THROWS_AS(auto_scale(b.reference_network(), 0.0, 0, b), std::invalid_argument);
}

TEST_CASE("property: auto_scale returns the smallest factor of the feasible schedule prefix") {
  const auto& b = fixture::jet_backend();
  const oracle::AccuracyModel model(oracle::load_json("benchmarks/jetdnn-synth.json"));
  for (double alpha : {0.0, 0.01, 0.03, 0.06, 0.2, 1.0})
    for (int trials = 1; trials <= 8; ++trials)
      for (double step : {0.5, 0.7}) {
        const auto r = auto_scale(b.reference_network(), alpha, trials, b, std::nullopt, step);
        const double a0 = model(0.0, 1.0, {});
        double expect = 1.0;
        double f = 1.0;
        for (int t = 2; t <= trials; ++t) {
          f *= step;
          if (a0 - model(0.0, f, {}) > alpha) break;
          expect = f;
        }
        CHECK(r.factor == doctest::Approx(expect));
      }
}

TEST_CASE("lossless reduction trims integer bits and keeps fraction bits") {
  const auto doc = one_layer_doc(8, 6, 10, 1.7, 0.5, 0.001);
  const SyntheticBackend b(parse_benchmark(doc));
  const auto k = lossless_reduce(b.reference_network(), start_kernel(b.reference_network()));
  const auto& p = k.virtual_layers[0].precisions;
  CHECK(p.weights == Fixed{12, 2});
  CHECK(p.biases == Fixed{11, 1});
  CHECK(p.results == Fixed{18, 8});
}

TEST_CASE("qhs converges to the free-bit floors") {
  const auto doc = one_layer_doc(8, 6, 10, 1.7, 0.5, 0.002);
  const SyntheticBackend b(parse_benchmark(doc));
  const auto& net = b.reference_network();
  const auto r = qhs(net, start_kernel(net), 0.001, b);
  const auto& p = r.kernel.virtual_layers[0].precisions;
  CHECK(p.weights.total_bits == 8);
  CHECK(p.biases.total_bits == 6);
  CHECK(p.results.total_bits == 10);
  CHECK(r.loss == 0.0);
  CHECK(r.blocked.size() == 3);
}

TEST_CASE("qhs with zero tolerance stops at the lossless map") {
  // Floors sit exactly at the lossless-reduced widths.
  const auto doc = one_layer_doc(12, 11, 18, 1.7, 0.5, 0.002);
  const SyntheticBackend b(parse_benchmark(doc));
  const auto& net = b.reference_network();
  const auto start = start_kernel(net);
  const auto r = qhs(net, start, 0.0, b);
  CHECK(r.kernel == lossless_reduce(net, start));
  CHECK(r.lossless_applied);
  CHECK(r.blocked.size() == 3);
}

TEST_CASE("qhs on two identical virtual layers is symmetric") {
  std::mt19937_64 rng(1);
  auto doc = oracle::random_dense_benchmark(rng, 2);
  for (int i : {0, 2}) {
    doc["layers"][i]["free_bits"] = {{"weights", 7}, {"biases", 5}, {"results", 9}};
    doc["layers"][i]["weight_stats"] = {{"max_abs_weight", 0.9}, {"max_abs_bias", 0.3}};
    doc["layers"][i]["lambda"] = 0.003;
  }
  const SyntheticBackend b(parse_benchmark(doc));
  const auto& net = b.reference_network();
  const auto r = qhs(net, start_kernel(net), 0.002, b);
  CHECK(r.kernel.virtual_layers[0].precisions == r.kernel.virtual_layers[1].precisions);
}

TEST_CASE("property: qhs satisfies the tolerance and is locally minimal") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 0.03);
  for (int round = 0; round < 50; ++round) {
    const int layers = 1 + static_cast<int>(rng() % 4);
    const auto doc = oracle::random_dense_benchmark(rng, layers);
    const SyntheticBackend b(parse_benchmark(doc));
    const oracle::AccuracyModel model(doc);
    const auto& net = b.reference_network();
    const auto start = start_kernel(net);
    const double alpha = round % 5 == 0 ? 0.0 : u(rng);
    const auto r = qhs(net, start, alpha, b);

    const double a0 = model(0.0, 1.0, totals_of(start));
    CHECK(a0 - model(0.0, 1.0, totals_of(r.kernel)) <= alpha + 1e-12);
    for (std::size_t i = 0; i < r.kernel.virtual_layers.size(); ++i)
      for (auto kind : kPrecisionKinds) {
        const Fixed& f = r.kernel.virtual_layers[i].precisions[kind];
        CHECK(f.total_bits <= start.virtual_layers[i].precisions[kind].total_bits);
        CHECK(f.total_bits >= f.integer_bits + 1);
        if (f.total_bits == f.integer_bits + 1) continue;
        KernelDescriptor lone = r.kernel;
        --lone.virtual_layers[i].precisions[kind].total_bits;
        CHECK(a0 - model(0.0, 1.0, totals_of(lone)) > alpha);
      }
  }
}

TEST_CASE("qhs preconditions") {
  const auto& b = fixture::jet_backend();
  const auto& net = b.reference_network();
  CHECK_THROWS_AS(qhs(net, start_kernel(net), -0.1, b), std::invalid_argument);
  auto k = start_kernel(net);
  k.virtual_layers.pop_back();
  CHECK_THROWS_AS(qhs(net, k, 0.01, b), std::invalid_argument);
}

TEST_CASE("pipe-task adapters write one entry each") {
  const auto& b = fixture::jet_backend();
  MetaModel mm;
  mm.cfg.set("Pruning::tolerate_acc_loss", 0.02);
  mm.cfg.set("Pruning::pruning_rate_thresh", 0.02);
  mm.cfg.set("Scaling::tolerate_acc_loss", 0.02);
  mm.cfg.set("Quantization::tolerate_acc_loss", 0.01);
  mm.cfg.set("train_epochs", 15.0);

  run_model_gen_task(mm, "gen", b);
  CHECK(mm.space.entries().size() == 1);
  const auto detail = run_pruning_task(mm, "prune", b);
  CHECK(mm.space.entries().size() == 2);
  CHECK(detail.rfind("pruning_rate=", 0) == 0);
  const double rate = mm.space.latest(Stage::Network)->network().pruning_rate;
  CHECK(rate == auto_prune(b.reference_network(), 0.02, 0.02, b).rate);

  run_scaling_task(mm, "scale", b);
  CHECK(mm.space.entries().size() == 3);
  CHECK(mm.space.latest(Stage::Network)->network().pruning_rate == rate);

  run_quantization_task(mm, "quant", b);
  CHECK(mm.space.entries().size() == 4);
  CHECK(mm.space.latest(Stage::Kernel)->producer == "quant");

  run_hls_mock_task(mm, "hls", Vendor::A, b);
  CHECK(mm.space.entries().size() == 5);
  CHECK(mm.space.latest(Stage::Kernel)->metrics);
  CHECK(mm.space.latest(Stage::Kernel)->kernel().virtual_layers ==
        mm.space.find(4)->kernel().virtual_layers);
}

TEST_CASE("adapters report missing parameters and vendor mismatches") {
  const auto& b = fixture::jet_backend();
  MetaModel mm;
  run_model_gen_task(mm, "gen", b);
  CHECK_THROWS_AS(run_pruning_task(mm, "prune", b), std::invalid_argument);

  MetaModel explicit_part = mm;
  explicit_part.cfg.set("HLS4ML::FPGA_part_number", std::string("a10-1150"));
  CHECK_THROWS(run_hls_mock_task(explicit_part, "hls", Vendor::A, b));

  MetaModel implicit = mm;
  run_hls_mock_task(implicit, "hls", Vendor::B, b);
  CHECK(b.device(implicit.space.latest(Stage::Kernel)->kernel().device).vendor == Vendor::B);
}

TEST_CASE("instance parameters override type parameters in the adapters") {
  const auto& b = fixture::jet_backend();
  MetaModel mm;
  mm.cfg.set("Pruning::tolerate_acc_loss", 0.0);
  mm.cfg.set("prune@tolerate_acc_loss", 0.05);
  mm.cfg.set("Pruning::pruning_rate_thresh", 0.01);
  run_model_gen_task(mm, "gen", b);
  run_pruning_task(mm, "prune", b);
  CHECK(mm.space.latest(Stage::Network)->network().pruning_rate ==
        auto_prune(b.reference_network(), 0.05, 0.01, b).rate);
}
