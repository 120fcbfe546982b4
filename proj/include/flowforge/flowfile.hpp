#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "flowforge/flowgraph.hpp"
#include "flowforge/metamodel.hpp"

namespace flowforge {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kFlowSchemaVersion = 1;

/// A `.flow` document: graph, configuration and the benchmark it runs on.
struct FlowFile {
  int schema_version = kFlowSchemaVersion;
  std::string benchmark;  // as written in the file
  std::filesystem::path benchmark_path;  // resolved against the file's directory
  std::optional<std::string> device;     // shorthand for HLS4ML::FPGA_part_number
  FlowGraph graph;
  ConfigStore cfg;

  /// cfg with the device shorthand applied.
  ConfigStore effective_cfg() const;
};

/// Throws ParseError on malformed JSON, bad field values or an
/// unsupported schema version. Graph validity is not checked here.
FlowFile parse_flow_file(std::string_view text, const std::filesystem::path& base_dir);
FlowFile load_flow_file(const std::filesystem::path& path);
nlohmann::json to_json(const FlowFile& f);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace flowforge
