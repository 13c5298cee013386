#pragma once

// Run manifests: a small JSON sidecar written next to every file the CLI
// produces, recording what command produced it and from which inputs.

#include <cstdint>
#include <string>
#include <vector>

namespace canids {

struct RunManifest {
    std::string command;             // subcommand name
    std::vector<std::string> argv;   // full command line as invoked
    std::string config_json;         // resolved settings, serialized JSON object
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string tool_version;
    double wall_s = 0.0;
};

// Serializes the manifest as pretty-printed JSON. config_json must be a valid
// JSON value (it is embedded, not quoted).
std::string manifest_json(const RunManifest& m);

// Writes manifest_json(m) to `path`.
void write_manifest(const RunManifest& m, const std::string& path);

// `path` + ".manifest.json".
std::string manifest_path_for(const std::string& path);

}  // namespace canids
