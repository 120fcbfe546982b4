#include <doctest.h>

#include <algorithm>
#include <random>

#include "flowforge/ktasks.hpp"
#include "support/fixtures.hpp"

using namespace flowforge;

namespace {

KernelDescriptor kernel_of(const NetworkDescriptor& net) {
  KernelDescriptor k;
  k.source_network_version = 1;
  k.virtual_layers = build_virtual_layers(net, Fixed{18, 8});
  k.device = "xcvu9p";
  return k;
}

Metrics metrics(double acc, std::int64_t dsp, std::int64_t lut = 0) {
  Metrics m;
  m.accuracy = acc;
  m.dsp_used = dsp;
  m.lut_used = lut;
  return m;
}

MetaModel with_kernels(const std::vector<Metrics>& ms, const std::string& tag = "hls") {
  const auto& net = fixture::bench("jet").network;
  MetaModel mm;
  mm.space.put(Stage::Network, net, std::nullopt, "gen");
  for (const auto& m : ms) mm.space.put(Stage::Kernel, kernel_of(net), m, tag);
  return mm;
}

std::vector<std::pair<double, std::int64_t>> acc_dsp(const MetaModel& mm) {
  std::vector<std::pair<double, std::int64_t>> out;
  for (const auto* e : reduce_candidates(mm)) out.emplace_back(e->metrics->accuracy, e->metrics->dsp_used);
  std::sort(out.begin(), out.end());
  return out;
}

const ReduceSpec kAccDsp{"pareto", parse_objectives("accuracy:max,dsp:min"), {}};

}  // namespace

TEST_CASE("objective lists parse") {
  auto o = parse_objectives("accuracy:max,dsp:min");
  REQUIRE(o.size() == 2);
  CHECK(o[0] == Objective{"accuracy", Direction::Max});
  CHECK(o[1] == Objective{"dsp", Direction::Min});
  CHECK_THROWS_AS(parse_objectives("power:min"), std::invalid_argument);
  CHECK_THROWS_AS(parse_objectives("accuracy:up"), std::invalid_argument);
  CHECK_THROWS_AS(parse_objectives("accuracy"), std::invalid_argument);
  CHECK_THROWS_AS(parse_objectives(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_objectives("accuracy:max,"), std::invalid_argument);
}

TEST_CASE("registry lists the built-ins") {
  const auto& r = Registry::builtin();
  for (const char* p : {"overmapped", "acc_loss_exceeds", "always_true", "always_false", "loop_count", "vendor_a"})
    CHECK(r.predicate(p));
  CHECK(r.action("relax_tolerances"));
  CHECK(r.reducer("pareto"));
  CHECK(r.reducer("best_score"));
  CHECK_FALSE(r.predicate("nope"));
  CHECK(r.reducer_names() == std::vector<std::string>{"best_score", "pareto"});
}

TEST_CASE("overmapped design loops back and relaxes the quantization tolerance") {
  Metrics m = metrics(0.7, 10);
  m.lut_util = 1.44;
  MetaModel mm = with_kernels({m});
  mm.cfg.set("Quantization::tolerate_acc_loss", 0.01);
  const auto space_before = mm.space;
  const ActionSpec relax{"relax_tolerances", {{"delta", 0.01}}};
  CHECK(branch_decide(mm, {"overmapped", {{"u_max", 1.0}}}, &relax, "B") == 0);
  CHECK(mm.cfg.resolve_number("", "Quantization", "tolerate_acc_loss") == doctest::Approx(0.02));
  CHECK(mm.space == space_before);
  REQUIRE(mm.log.size() == 1);
  CHECK(mm.log.records()[0].kind == EventKind::Branched);
  CHECK(mm.log.records()[0].task == "B");
}

TEST_CASE("feasible design exits without touching the configuration") {
  Metrics m = metrics(0.7, 10);
  m.lut_util = 1.0;
  m.dsp_util = 0.5;
  MetaModel mm = with_kernels({m});
  mm.cfg.set("Quantization::tolerate_acc_loss", 0.01);
  const auto cfg_before = mm.cfg;
  const ActionSpec relax{"relax_tolerances", {}};
  CHECK(branch_decide(mm, {"overmapped", {{"u_max", 1.0}}}, &relax, "B") == 1);
  CHECK(mm.cfg == cfg_before);
  CHECK(mm.log.size() == 1);
}

TEST_CASE("simple predicates") {
  MetaModel mm;
  CHECK(branch_decide(mm, {"always_false", {}}, nullptr, "B") == 1);
  CHECK(branch_decide(mm, {"always_true", {}}, nullptr, "B") == 0);
  CHECK_THROWS_AS(branch_decide(mm, {"nope", {}}, nullptr, "B"), std::invalid_argument);
  const ActionSpec bad{"nope", {}};
  CHECK_THROWS_AS(branch_decide(mm, {"always_true", {}}, &bad, "B"), std::invalid_argument);
  // No metrics anywhere.
  CHECK_THROWS_AS(branch_decide(mm, {"overmapped", {}}, nullptr, "B"), std::runtime_error);

  Metrics m = metrics(0.7, 1);
  m.accuracy_loss = 0.03;
  MetaModel lossy = with_kernels({m});
  CHECK(branch_decide(lossy, {"acc_loss_exceeds", {{"max", 0.02}}}, nullptr, "B") == 0);
  CHECK(branch_decide(lossy, {"acc_loss_exceeds", {{"max", 0.03}}}, nullptr, "B") == 1);

  MetaModel v;
  CHECK(branch_decide(v, {"vendor_a", {}}, nullptr, "vendor") == 0);
  v.cfg.set("vendor@target_vendor", std::string("B"));
  CHECK(branch_decide(v, {"vendor_a", {}}, nullptr, "vendor") == 1);
}

TEST_CASE("loop_count holds for the declared number of passes") {
  MetaModel mm;
  std::vector<int> ports;
  for (int i = 0; i < 4; ++i) ports.push_back(branch_decide(mm, {"loop_count", {{"times", 2}}}, nullptr, "B"));
  CHECK(ports == std::vector<int>{0, 0, 1, 1});
  // Another instance has its own count.
  CHECK(branch_decide(mm, {"loop_count", {{"times", 2}}}, nullptr, "C") == 0);
}

TEST_CASE("property: relaxation is monotone and capped") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 0.05);
  for (int round = 0; round < 100; ++round) {
    MetaModel mm;
    const double start = u(rng);
    const double cap = start + 4 * u(rng);
    mm.cfg.set("Pruning::tolerate_acc_loss", start);
    mm.cfg.set("Scaling::tolerate_acc_loss", start);
    mm.cfg.set("P@tolerate_acc_loss", 0.5);
    const double delta = u(rng);
    const ActionSpec relax{"relax_tolerances", {{"delta", delta}, {"cap_p", cap}, {"cap", 1.0}}};
    double prev = start;
    for (int i = 0; i < 20; ++i) {
      branch_decide(mm, {"always_true", {}}, &relax, "B");
      const double now = *mm.cfg.resolve_number("", "Pruning", "tolerate_acc_loss");
      CHECK(now >= prev);
      CHECK(now <= cap);
      prev = now;
    }
    if (start + 20 * delta >= cap) CHECK(prev == doctest::Approx(cap));
    else CHECK(prev == doctest::Approx(start + 20 * delta));
    // Only the type-scoped tolerances are edited.
    CHECK(mm.cfg.resolve_number("P", "", "tolerate_acc_loss") == 0.5);
    CHECK_FALSE(mm.cfg.find("Quantization::tolerate_acc_loss"));
  }
  MetaModel mm;
  mm.cfg.set("Quantization::tolerate_acc_loss", 0.2);
  const ActionSpec low_cap{"relax_tolerances", {{"cap_q", 0.1}}};
  CHECK_THROWS_AS(branch_decide(mm, {"always_true", {}}, &low_cap, "B"), std::invalid_argument);
}

TEST_CASE("pareto reduce keeps the non-dominated candidates") {
  const std::vector<MetaModel> inputs{with_kernels({metrics(.761, 70), metrics(.721, 47)}),
                                      with_kernels({metrics(.709, 12), metrics(.700, 60)})};
  const MetaModel out = reduce_apply(inputs, kAccDsp);
  CHECK(acc_dsp(out) == std::vector<std::pair<double, std::int64_t>>{{.709, 12}, {.721, 47}, {.761, 70}});
  CHECK(out.cfg == inputs[0].cfg);
}

TEST_CASE("single input and identical candidates") {
  const std::vector<MetaModel> one{with_kernels({metrics(.7, 3), metrics(.8, 9)})};
  CHECK(acc_dsp(reduce_apply(one, kAccDsp)) == acc_dsp(one[0]));

  const std::vector<MetaModel> same{with_kernels({metrics(.7, 3), metrics(.7, 3)}), with_kernels({metrics(.7, 3)})};
  CHECK(reduce_candidates(reduce_apply(same, kAccDsp)).size() == 1);
}

TEST_CASE("reduce errors") {
  CHECK_THROWS_AS(reduce_apply({}, kAccDsp), std::invalid_argument);
  const std::vector<MetaModel> unmeasured{MetaModel{}};
  CHECK_THROWS(reduce_apply(unmeasured, kAccDsp));
  const std::vector<MetaModel> ok{with_kernels({metrics(.7, 3)})};
  CHECK_THROWS_AS(reduce_apply(ok, ReduceSpec{"pareto", {}, {}}), std::invalid_argument);
  CHECK_THROWS_AS(reduce_apply(ok, ReduceSpec{"pareto", {{"power", Direction::Min}}, {}}), std::invalid_argument);
  CHECK_THROWS_AS(reduce_apply(ok, ReduceSpec{"nope", kAccDsp.objectives, {}}), std::invalid_argument);
}

TEST_CASE("reduce concatenates logs after the shared prefix") {
  MetaModel a = with_kernels({metrics(.7, 3)});
  a.log.append("gen", EventKind::Finished);
  MetaModel b = a;
  a.log.append("left", EventKind::Finished);
  b.log.append("right", EventKind::Finished);
  const std::vector<MetaModel> in{a, b};
  const MetaModel out = reduce_apply(in, kAccDsp);
  std::vector<std::string> tasks;
  for (const auto& r : out.log.records()) tasks.push_back(r.task);
  CHECK(tasks == std::vector<std::string>{"gen", "left", "right"});
}

TEST_CASE("property: pareto reduce equals the brute-force union front and ignores input order") {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 60; ++round) {
    const std::size_t inputs_n = 1 + rng() % 4;
    std::vector<MetaModel> inputs;
    std::vector<Metrics> all;
    std::size_t total = 0;
    for (std::size_t i = 0; i < inputs_n; ++i) {
      std::vector<Metrics> ms;
      const std::size_t n = 1 + rng() % 50;
      for (std::size_t k = 0; k < n; ++k)
        ms.push_back(metrics(0.5 + 0.01 * static_cast<double>(rng() % 20), static_cast<std::int64_t>(rng() % 15),
                             static_cast<std::int64_t>(rng() % 6)));
      total += n;
      all.insert(all.end(), ms.begin(), ms.end());
      inputs.push_back(with_kernels(ms));
    }
    REQUIRE(total <= 200);
    const ReduceSpec spec{"pareto", parse_objectives("accuracy:max,dsp:min,lut:min"), {}};

    std::vector<Metrics> unique;
    for (const auto& m : all)
      if (std::find(unique.begin(), unique.end(), m) == unique.end()) unique.push_back(m);
    std::vector<ObjectivePoint> pts;
    const std::vector<Direction> dirs{Direction::Max, Direction::Min, Direction::Min};
    for (std::size_t i = 0; i < unique.size(); ++i)
      pts.push_back({{unique[i].accuracy, static_cast<double>(unique[i].dsp_used), static_cast<double>(unique[i].lut_used)},
                     dirs,
                     i});
    std::vector<std::tuple<double, std::int64_t, std::int64_t>> expect;
    for (auto i : oracle::brute_front(pts)) expect.emplace_back(unique[i].accuracy, unique[i].dsp_used, unique[i].lut_used);
    std::sort(expect.begin(), expect.end());

    auto got_of = [](const MetaModel& mm) {
      std::vector<std::tuple<double, std::int64_t, std::int64_t>> got;
      for (const auto* e : reduce_candidates(mm)) got.emplace_back(e->metrics->accuracy, e->metrics->dsp_used, e->metrics->lut_used);
      std::sort(got.begin(), got.end());
      return got;
    };
    CHECK(got_of(reduce_apply(inputs, spec)) == expect);
    std::shuffle(inputs.begin(), inputs.end(), rng);
    CHECK(got_of(reduce_apply(inputs, spec)) == expect);
  }
}

TEST_CASE("best_score picks a single entry by weighted normalized objectives") {
  const std::vector<MetaModel> in{with_kernels({metrics(.76, 70), metrics(.72, 47), metrics(.70, 12)})};
  const ReduceSpec acc_only{"best_score", parse_objectives("accuracy:max,dsp:min"), {{"w0", 1.0}, {"w1", 0.0}}};
  CHECK(acc_dsp(reduce_apply(in, acc_only)) == std::vector<std::pair<double, std::int64_t>>{{.76, 70}});
  const ReduceSpec dsp_only{"best_score", acc_only.objectives, {{"w0", 0.0}, {"w1", 1.0}}};
  CHECK(acc_dsp(reduce_apply(in, dsp_only)) == std::vector<std::pair<double, std::int64_t>>{{.70, 12}});
  // Equal weights: (.76,70) and (.70,12) both score 1, (.72,47) about 0.73. The tie goes to the first.
  const ReduceSpec even{"best_score", acc_only.objectives, {}};
  CHECK(acc_dsp(reduce_apply(in, even)) == std::vector<std::pair<double, std::int64_t>>{{.76, 70}});
}

TEST_CASE("stop extracts the most refined stage") {
  const auto& net = fixture::bench("jet").network;
  MetaModel mm;
  CHECK_THROWS_WITH_AS(stop_extract(mm), doctest::Contains("nothing to extract"), std::runtime_error);
  mm.space.put(Stage::Network, net, std::nullopt, "gen");
  CHECK(stop_extract(mm).selected.version == 1);
  mm.space.put(Stage::Kernel, kernel_of(net), std::nullopt, "hls");
  const auto out = stop_extract(mm);
  CHECK(out.selected.version == 2);
  CHECK(out.selected.stage == Stage::Kernel);
  CHECK(out.mm == mm);
}
