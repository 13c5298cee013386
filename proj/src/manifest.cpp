#include "canids/manifest.hpp"

#include "canids/version.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace canids {

std::string manifest_json(const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["argv"] = m.argv;
    j["config"] = m.config_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(m.config_json);
    j["seed"] = m.seed;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["tool_version"] = m.tool_version.empty() ? std::string(kToolVersion) : m.tool_version;
    j["wall_s"] = m.wall_s;
    return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << manifest_json(m);
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string manifest_path_for(const std::string& path) { return path + ".manifest.json"; }

}  // namespace canids
