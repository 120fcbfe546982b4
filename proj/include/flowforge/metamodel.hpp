#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "flowforge/netmodel.hpp"

namespace flowforge {

// Configuration values are declarative data only; callable behaviour is
// referenced by registry name (see ktasks.hpp).
using ConfigValue = std::variant<double, bool, std::string, std::vector<double>>;

enum class Scope { Global, TaskType, Instance };

struct ScopedKey {
  Scope scope = Scope::Global;
  std::string qualifier;  // instance or task type name; empty for globals
  std::string param;
};

/// Parses `Instance@param`, `TaskType::param` or `param`.
std::optional<ScopedKey> parse_scoped_key(std::string_view key);
std::string instance_key(std::string_view instance, std::string_view param);
std::string type_key(std::string_view task_type, std::string_view param);

/// Scoped key-value store; lookups prefer instance over type over global.
class ConfigStore {
 public:
  using Map = std::map<std::string, ConfigValue, std::less<>>;

  /// Throws std::invalid_argument when the key matches none of the scope forms.
  void set(std::string_view key, ConfigValue value);
  bool erase(std::string_view key);
  const ConfigValue* find(std::string_view key) const;

  std::optional<ConfigValue> resolve(std::string_view instance, std::string_view task_type,
                                     std::string_view param) const;
  /// Typed lookups throw std::invalid_argument when the resolved value has
  /// the wrong type; absence is returned as nullopt.
  std::optional<double> resolve_number(std::string_view instance, std::string_view task_type,
                                       std::string_view param) const;
  std::optional<std::string> resolve_string(std::string_view instance, std::string_view task_type,
                                            std::string_view param) const;
  std::optional<bool> resolve_bool(std::string_view instance, std::string_view task_type,
                                   std::string_view param) const;

  const Map& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  bool operator==(const ConfigStore&) const = default;

 private:
  Map entries_;
};

enum class EventKind { Started, Finished, Branched, Error };
std::string_view to_string(EventKind kind);

struct LogRecord {
  std::int64_t timestamp_ns = 0;
  std::string task;
  EventKind kind = EventKind::Started;
  std::string detail;

  bool operator==(const LogRecord&) const = default;
};

inline constexpr std::size_t kMaxLogDetail = 4096;

/// Append-only execution trace.
class ExecutionLog {
 public:
  void append(std::string task, EventKind kind, std::string detail = {});
  /// Keeps the record's timestamp, clamped so a task's stamps never go backwards.
  void append_record(LogRecord record);

  const std::vector<LogRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool operator==(const ExecutionLog&) const = default;

 private:
  std::vector<LogRecord> records_;
};

enum class Stage { Network, Kernel };
std::string_view to_string(Stage stage);

using ModelPayload = std::variant<NetworkDescriptor, KernelDescriptor>;

struct ModelEntry {
  std::int64_t version = 0;
  Stage stage = Stage::Network;
  ModelPayload payload;
  std::optional<Metrics> metrics;
  std::string producer;

  bool operator==(const ModelEntry&) const = default;
  const NetworkDescriptor& network() const { return std::get<NetworkDescriptor>(payload); }
  const KernelDescriptor& kernel() const { return std::get<KernelDescriptor>(payload); }
};

/// Versioned store of models at several abstraction stages. Entries are
/// never modified after insertion.
class ModelSpace {
 public:
  /// Validates the payload and returns the new version (previous max + 1).
  std::int64_t put(Stage stage, ModelPayload payload, std::optional<Metrics> metrics, std::string producer);
  const ModelEntry* latest(Stage stage) const;
  const ModelEntry* find(std::int64_t version) const;
  const std::vector<ModelEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  bool operator==(const ModelSpace&) const = default;

 private:
  std::vector<ModelEntry> entries_;
};

/// The blackboard shared by every task of one flow execution. Copies are
/// deep and independent.
struct MetaModel {
  ConfigStore cfg;
  ExecutionLog log;
  ModelSpace space;

  bool operator==(const MetaModel&) const = default;
};

inline constexpr int kMetaModelVersion = 1;

nlohmann::json config_value_to_json(const ConfigValue& v);
ConfigValue config_value_from_json(const nlohmann::json& j);
std::string config_value_to_string(const ConfigValue& v);

nlohmann::json to_json(const ConfigStore& cfg);
ConfigStore config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExecutionLog& log);
ExecutionLog log_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelEntry& entry);
ModelEntry model_entry_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MetaModel& mm);
/// Throws std::invalid_argument on schema mismatch or malformed content.
MetaModel metamodel_from_json(const nlohmann::json& j);

}  // namespace flowforge
