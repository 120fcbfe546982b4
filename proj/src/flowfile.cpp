#include "flowforge/flowfile.hpp"

#include <fstream>
#include <sstream>

namespace flowforge {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ConfigStore FlowFile::effective_cfg() const {
  ConfigStore out = cfg;
  if (device && !out.find(type_key("HLS4ML", "FPGA_part_number"))) out.set(type_key("HLS4ML", "FPGA_part_number"), *device);
  return out;
}

FlowFile parse_flow_file(std::string_view text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("flow file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("flow file must be a JSON object");
  try {
    FlowFile f;
    f.schema_version = j.at("schema_version").get<int>();
    if (f.schema_version != kFlowSchemaVersion)
      throw ParseError("unsupported schema_version " + std::to_string(f.schema_version));
    f.benchmark = j.at("benchmark").get<std::string>();
    const std::filesystem::path b(f.benchmark);
    f.benchmark_path = b.is_absolute() ? b : base_dir / b;
    if (j.contains("device")) f.device = j.at("device").get<std::string>();
    nlohmann::json graph{{"tasks", j.value("tasks", nlohmann::json::array())},
                         {"edges", j.value("edges", nlohmann::json::array())}};
    if (j.contains("entry")) graph["entry"] = j.at("entry");
    f.graph = flowgraph_from_json(graph);
    if (j.contains("cfg")) f.cfg = config_from_json(j.at("cfg"));
    return f;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("malformed flow file: ") + e.what());
  }
}

FlowFile load_flow_file(const std::filesystem::path& path) {
  return parse_flow_file(read_text_file(path), path.parent_path());
}

nlohmann::json to_json(const FlowFile& f) {
  nlohmann::json j = to_json(f.graph);
  j["schema_version"] = f.schema_version;
  j["benchmark"] = f.benchmark;
  if (f.device) j["device"] = *f.device;
  j["cfg"] = to_json(f.cfg);
  return j;
}

}  // namespace flowforge
