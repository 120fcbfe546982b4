#include <doctest.h>

#include <random>

#include "flowforge/metamodel.hpp"
#include "support/fixtures.hpp"

using namespace flowforge;

namespace {

KernelDescriptor default_kernel(const NetworkDescriptor& net, std::int64_t src) {
  KernelDescriptor k;
  k.source_network_version = src;
  k.virtual_layers = build_virtual_layers(net, Fixed{18, 8});
  k.device = "xcvu9p";
  return k;
}

}  // namespace

TEST_CASE("scoped keys parse into three forms") {
  auto i = parse_scoped_key("P1@x");
  REQUIRE(i);
  CHECK(i->scope == Scope::Instance);
  CHECK(i->qualifier == "P1");
  CHECK(i->param == "x");
  auto t = parse_scoped_key("Pruning::tolerate_acc_loss");
  REQUIRE(t);
  CHECK(t->scope == Scope::TaskType);
  CHECK(t->qualifier == "Pruning");
  auto g = parse_scoped_key("train_epochs");
  REQUIRE(g);
  CHECK(g->scope == Scope::Global);
  CHECK_FALSE(parse_scoped_key(""));
  CHECK_FALSE(parse_scoped_key("@x"));
  CHECK_FALSE(parse_scoped_key("::x"));
  CHECK_FALSE(parse_scoped_key("a@"));
  CHECK_THROWS_AS(ConfigStore{}.set("bad key", 1.0), std::invalid_argument);
}

TEST_CASE("resolution prefers instance over type over global") {
  ConfigStore cfg;
  cfg.set("x", 0.0);
  cfg.set("Pruning::x", 1.0);
  cfg.set("P1@x", 2.0);
  CHECK(cfg.resolve_number("P1", "Pruning", "x") == 2.0);
  CHECK(cfg.resolve_number("P2", "Pruning", "x") == 1.0);
  CHECK(cfg.resolve_number("P2", "Scaling", "x") == 0.0);

  ConfigStore only_global;
  only_global.set("x", 0.0);
  CHECK(only_global.resolve_number("P1", "Pruning", "x") == 0.0);
  CHECK_FALSE(ConfigStore{}.resolve("P1", "Pruning", "x"));
}

TEST_CASE("typed lookups reject the wrong type") {
  ConfigStore cfg;
  cfg.set("name", std::string("xcvu9p"));
  cfg.set("flag", true);
  cfg.set("list", std::vector<double>{1, 2});
  CHECK(cfg.resolve_string("", "", "name") == "xcvu9p");
  CHECK(cfg.resolve_bool("", "", "flag") == true);
  CHECK_THROWS_AS(cfg.resolve_number("", "", "name"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.resolve_string("", "", "list"), std::invalid_argument);
}

TEST_CASE("property: an instance key changes resolution for that instance only") {
  std::mt19937_64 rng(7);
  const std::vector<std::string> instances{"a", "b", "c"};
  const std::vector<std::string> types{"T", "U"};
  for (int round = 0; round < 200; ++round) {
    ConfigStore cfg;
    for (int k = 0; k < 4; ++k) {
      switch (rng() % 3) {
        case 0: cfg.set("p", static_cast<double>(rng() % 100)); break;
        case 1: cfg.set(type_key(types[rng() % 2], "p"), static_cast<double>(rng() % 100)); break;
        default: cfg.set(instance_key(instances[rng() % 3], "p"), static_cast<double>(rng() % 100)); break;
      }
    }
    ConfigStore edited = cfg;
    const std::string& target = instances[rng() % 3];
    edited.set(instance_key(target, "p"), 1000.0 + round);
    for (const auto& inst : instances)
      for (const auto& type : types) {
        if (inst == target) CHECK(edited.resolve_number(inst, type, "p") == 1000.0 + round);
        else CHECK(edited.resolve(inst, type, "p") == cfg.resolve(inst, type, "p"));
      }
  }
}

TEST_CASE("model space versions are monotone and stages coexist") {
  const auto& net = fixture::bench("jet").network;
  MetaModel mm;
  CHECK(mm.space.put(Stage::Network, net, std::nullopt, "KerasModelGen") == 1);
  CHECK(mm.space.put(Stage::Network, net, std::nullopt, "other") == 2);
  Metrics m;
  m.accuracy = 0.7;
  CHECK(mm.space.put(Stage::Kernel, default_kernel(net, 1), m, "HLS-mock") == 3);
  CHECK(mm.space.find(1)->producer == "KerasModelGen");
  CHECK(mm.space.find(2)->producer == "other");
  CHECK(mm.space.latest(Stage::Kernel)->version == 3);
  CHECK(mm.space.latest(Stage::Network)->version == 2);
}

TEST_CASE("latest by stage") {
  const auto& net = fixture::bench("jet").network;
  MetaModel mm;
  CHECK_FALSE(mm.space.latest(Stage::Network));
  mm.space.put(Stage::Network, net, std::nullopt, "a");
  CHECK_FALSE(mm.space.latest(Stage::Kernel));
  mm.space.put(Stage::Kernel, default_kernel(net, 1), std::nullopt, "b");
  mm.space.put(Stage::Network, net, std::nullopt, "c");
  CHECK(mm.space.latest(Stage::Network)->version == 3);
  CHECK(mm.space.latest(Stage::Kernel)->version == 2);
}

TEST_CASE("invalid payloads are rejected") {
  const auto& net = fixture::bench("jet").network;
  MetaModel mm;
  NetworkDescriptor broken = net;
  broken.layers[0].output_dims = {3};
  CHECK_THROWS_AS(mm.space.put(Stage::Network, broken, std::nullopt, "x"), std::invalid_argument);
  CHECK_THROWS_AS(mm.space.put(Stage::Kernel, net, std::nullopt, "x"), std::invalid_argument);
  KernelDescriptor k = default_kernel(net, 0);
  k.virtual_layers[0].precisions.weights = Fixed{4, 6};
  CHECK_THROWS_AS(mm.space.put(Stage::Kernel, k, std::nullopt, "x"), std::invalid_argument);
  CHECK(mm.space.empty());
}

TEST_CASE("clone isolation") {
  const auto& net = fixture::bench("jet").network;
  MetaModel mm;
  mm.cfg.set("x", 1.0);
  mm.log.append("gen", EventKind::Started);
  mm.space.put(Stage::Network, net, std::nullopt, "gen");
  const nlohmann::json before = to_json(mm);

  MetaModel clone = mm;
  for (int i = 0; i < 5; ++i) {
    clone.cfg.set("x", 2.0 + i);
    clone.cfg.set(instance_key("t" + std::to_string(i), "y"), 1.0);
    clone.log.append("t", EventKind::Finished, "d");
    NetworkDescriptor n = net;
    n.pruning_rate = 0.1 * i;
    clone.space.put(Stage::Network, n, std::nullopt, "t");
  }
  CHECK(to_json(mm) == before);
  CHECK(mm.space.latest(Stage::Network)->version == 1);
}

TEST_CASE("log is append-only with clamped timestamps and capped details") {
  ExecutionLog log;
  log.append_record({100, "a", EventKind::Started, ""});
  log.append_record({50, "a", EventKind::Finished, std::string(10000, 'x')});
  REQUIRE(log.size() == 2);
  CHECK(log.records()[1].timestamp_ns >= log.records()[0].timestamp_ns);
  CHECK(log.records()[1].detail.size() == kMaxLogDetail);
}

TEST_CASE("metamodel json round trip is lossless") {
  const auto& net = fixture::bench("jet").network;
  MetaModel mm;
  mm.cfg.set("Pruning::tolerate_acc_loss", 0.1 + 0.2);
  mm.cfg.set("a@flag", false);
  mm.cfg.set("name", std::string("ap_fixed<18,8>"));
  mm.cfg.set("list", std::vector<double>{1.0 / 3.0, 2.5});
  mm.log.append("gen", EventKind::Branched, "port=0");
  NetworkDescriptor n = net;
  n.pruning_rate = 1.0 / 7.0;
  Metrics m;
  m.accuracy = 0.123456789012345678;
  m.lut_util = 1.0 / 3.0;
  m.lut_used = 123;
  mm.space.put(Stage::Network, n, m, "gen");
  mm.space.put(Stage::Kernel, default_kernel(n, 1), m, "hls");
  const auto j = to_json(mm);
  CHECK(j.at("metamodel_version") == 1);
  const MetaModel back = metamodel_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back == mm);
}
