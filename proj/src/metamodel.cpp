#include "flowforge/metamodel.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <stdexcept>

namespace flowforge {

namespace {

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
  });
}

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::optional<ScopedKey> parse_scoped_key(std::string_view key) {
  ScopedKey out;
  if (auto at = key.find('@'); at != std::string_view::npos) {
    out.scope = Scope::Instance;
    out.qualifier = key.substr(0, at);
    out.param = key.substr(at + 1);
  } else if (auto sep = key.find("::"); sep != std::string_view::npos) {
    out.scope = Scope::TaskType;
    out.qualifier = key.substr(0, sep);
    out.param = key.substr(sep + 2);
  } else {
    out.param = key;
  }
  if (out.scope != Scope::Global && !valid_name(out.qualifier)) return std::nullopt;
  if (!valid_name(out.param)) return std::nullopt;
  return out;
}

std::string instance_key(std::string_view instance, std::string_view param) {
  return std::string(instance) + "@" + std::string(param);
}

std::string type_key(std::string_view task_type, std::string_view param) {
  return std::string(task_type) + "::" + std::string(param);
}

void ConfigStore::set(std::string_view key, ConfigValue value) {
  if (!parse_scoped_key(key)) throw std::invalid_argument("malformed configuration key: '" + std::string(key) + "'");
  if (auto it = entries_.find(key); it != entries_.end()) it->second = std::move(value);
  else entries_.emplace(std::string(key), std::move(value));
}

bool ConfigStore::erase(std::string_view key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

const ConfigValue* ConfigStore::find(std::string_view key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::optional<ConfigValue> ConfigStore::resolve(std::string_view instance, std::string_view task_type,
                                                std::string_view param) const {
  if (!instance.empty())
    if (const auto* v = find(instance_key(instance, param))) return *v;
  if (!task_type.empty())
    if (const auto* v = find(type_key(task_type, param))) return *v;
  if (const auto* v = find(param)) return *v;
  return std::nullopt;
}

std::optional<double> ConfigStore::resolve_number(std::string_view instance, std::string_view task_type,
                                                  std::string_view param) const {
  auto v = resolve(instance, task_type, param);
  if (!v) return std::nullopt;
  if (const auto* d = std::get_if<double>(&*v)) return *d;
  if (const auto* b = std::get_if<bool>(&*v)) return *b ? 1.0 : 0.0;
  throw std::invalid_argument("configuration parameter '" + std::string(param) + "' for '" + std::string(instance) +
                              "' is not a number");
}

std::optional<std::string> ConfigStore::resolve_string(std::string_view instance, std::string_view task_type,
                                                       std::string_view param) const {
  auto v = resolve(instance, task_type, param);
  if (!v) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(&*v)) return *s;
  throw std::invalid_argument("configuration parameter '" + std::string(param) + "' for '" + std::string(instance) +
                              "' is not a string");
}

std::optional<bool> ConfigStore::resolve_bool(std::string_view instance, std::string_view task_type,
                                              std::string_view param) const {
  auto v = resolve(instance, task_type, param);
  if (!v) return std::nullopt;
  if (const auto* b = std::get_if<bool>(&*v)) return *b;
  if (const auto* d = std::get_if<double>(&*v)) return *d != 0.0;
  throw std::invalid_argument("configuration parameter '" + std::string(param) + "' for '" + std::string(instance) +
                              "' is not a boolean");
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Started: return "started";
    case EventKind::Finished: return "finished";
    case EventKind::Branched: return "branched";
    case EventKind::Error: return "error";
  }
  return "unknown";
}

void ExecutionLog::append(std::string task, EventKind kind, std::string detail) {
  append_record(LogRecord{now_ns(), std::move(task), kind, std::move(detail)});
}

void ExecutionLog::append_record(LogRecord record) {
  if (record.detail.size() > kMaxLogDetail) record.detail.resize(kMaxLogDetail);
  if (!records_.empty()) record.timestamp_ns = std::max(record.timestamp_ns, records_.back().timestamp_ns);
  records_.push_back(std::move(record));
}

std::string_view to_string(Stage stage) { return stage == Stage::Network ? "network" : "kernel"; }

std::int64_t ModelSpace::put(Stage stage, ModelPayload payload, std::optional<Metrics> metrics,
                             std::string producer) {
  if (stage == Stage::Network) {
    const auto* net = std::get_if<NetworkDescriptor>(&payload);
    if (!net) throw std::invalid_argument("network stage entry must carry a network descriptor");
    require_valid(*net);
  } else {
    const auto* k = std::get_if<KernelDescriptor>(&payload);
    if (!k) throw std::invalid_argument("kernel stage entry must carry a kernel descriptor");
    if (k->virtual_layers.empty()) throw std::invalid_argument("kernel descriptor has no virtual layers");
    for (const auto& vl : k->virtual_layers)
      for (auto kind : kPrecisionKinds)
        if (!is_valid(vl.precisions[kind]))
          throw std::invalid_argument("kernel virtual layer '" + vl.id + "' has an invalid precision");
    // Entries merged from other meta-models may name versions of their origin space.
    if (const ModelEntry* src = find(k->source_network_version); src && src->stage == Stage::Network) {
      if (auto problems = check_kernel(*k, src->network()); !problems.empty())
        throw std::invalid_argument("kernel does not match its source network: " + problems.front());
    }
  }
  if (metrics && !(metrics->accuracy >= 0.0 && metrics->accuracy <= 1.0))
    throw std::invalid_argument("metrics accuracy outside [0,1]");
  const std::int64_t version = entries_.empty() ? 1 : entries_.back().version + 1;
  entries_.push_back(ModelEntry{version, stage, std::move(payload), std::move(metrics), std::move(producer)});
  return version;
}

const ModelEntry* ModelSpace::latest(Stage stage) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
    if (it->stage == stage) return &*it;
  return nullptr;
}

const ModelEntry* ModelSpace::find(std::int64_t version) const {
  for (const auto& e : entries_)
    if (e.version == version) return &e;
  return nullptr;
}

// --- JSON ------------------------------------------------------------------

nlohmann::json config_value_to_json(const ConfigValue& v) {
  return std::visit([](const auto& x) { return nlohmann::json(x); }, v);
}

ConfigValue config_value_from_json(const nlohmann::json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    std::vector<double> xs;
    for (const auto& e : j) {
      if (!e.is_number()) throw std::invalid_argument("configuration lists may only hold numbers");
      xs.push_back(e.get<double>());
    }
    return xs;
  }
  throw std::invalid_argument("unsupported configuration value: " + j.dump());
}

std::string config_value_to_string(const ConfigValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return config_value_to_json(v).dump();
}

nlohmann::json to_json(const ConfigStore& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : cfg.entries()) j[k] = config_value_to_json(v);
  return j;
}

ConfigStore config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("configuration must be a JSON object");
  ConfigStore cfg;
  for (const auto& [k, v] : j.items()) cfg.set(k, config_value_from_json(v));
  return cfg;
}

nlohmann::json to_json(const ExecutionLog& log) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : log.records())
    j.push_back({{"timestamp_ns", r.timestamp_ns},
                 {"task", r.task},
                 {"event", std::string(to_string(r.kind))},
                 {"detail", r.detail}});
  return j;
}

ExecutionLog log_from_json(const nlohmann::json& j) {
  ExecutionLog log;
  for (const auto& rj : j) {
    LogRecord r;
    r.timestamp_ns = rj.at("timestamp_ns").get<std::int64_t>();
    r.task = rj.at("task").get<std::string>();
    const auto ev = rj.at("event").get<std::string>();
    if (ev == "started") r.kind = EventKind::Started;
    else if (ev == "finished") r.kind = EventKind::Finished;
    else if (ev == "branched") r.kind = EventKind::Branched;
    else if (ev == "error") r.kind = EventKind::Error;
    else throw std::invalid_argument("unknown log event: " + ev);
    r.detail = rj.value("detail", std::string{});
    log.append_record(std::move(r));
  }
  return log;
}

nlohmann::json to_json(const ModelEntry& e) {
  nlohmann::json j{{"version", e.version}, {"stage", std::string(to_string(e.stage))}, {"producer", e.producer}};
  if (e.stage == Stage::Network) j["payload"] = e.network();
  else j["payload"] = e.kernel();
  j["metrics"] = e.metrics ? nlohmann::json(*e.metrics) : nlohmann::json(nullptr);
  return j;
}

ModelEntry model_entry_from_json(const nlohmann::json& j) {
  ModelEntry e;
  e.version = j.at("version").get<std::int64_t>();
  const auto stage = j.at("stage").get<std::string>();
  if (stage == "network") {
    e.stage = Stage::Network;
    e.payload = j.at("payload").get<NetworkDescriptor>();
  } else if (stage == "kernel") {
    e.stage = Stage::Kernel;
    e.payload = j.at("payload").get<KernelDescriptor>();
  } else {
    throw std::invalid_argument("unknown model stage: " + stage);
  }
  if (j.contains("metrics") && !j.at("metrics").is_null()) e.metrics = j.at("metrics").get<Metrics>();
  e.producer = j.value("producer", std::string{});
  return e;
}

nlohmann::json to_json(const MetaModel& mm) {
  nlohmann::json space = nlohmann::json::array();
  for (const auto& e : mm.space.entries()) space.push_back(to_json(e));
  return {{"metamodel_version", kMetaModelVersion}, {"cfg", to_json(mm.cfg)}, {"log", to_json(mm.log)},
          {"space", space}};
}

MetaModel metamodel_from_json(const nlohmann::json& j) {
  try {
    if (j.at("metamodel_version").get<int>() != kMetaModelVersion)
      throw std::invalid_argument("unsupported metamodel_version");
    MetaModel mm;
    mm.cfg = config_from_json(j.at("cfg"));
    mm.log = log_from_json(j.at("log"));
    for (const auto& ej : j.at("space")) {
      ModelEntry e = model_entry_from_json(ej);
      if (mm.space.put(e.stage, e.payload, e.metrics, e.producer) != e.version)
        throw std::invalid_argument("model versions must be contiguous from 1");
    }
    return mm;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed metamodel document: ") + e.what());
  }
}

}  // namespace flowforge
