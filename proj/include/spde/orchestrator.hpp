#pragma once

#include "spde/config.hpp"
#include "spde/diagnostics.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spde {

/// Version string of the library and CLI.
std::string artifact_version();

/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& file);

struct ManifestEntry {
    std::string file;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string command;
    std::string version;
    std::string config_text;
    std::uint64_t seed = 0;
    std::string started;
    std::string finished;
    std::vector<ManifestEntry> files;
    bool pass = false;
    /// Engine or I/O errors caught while running the command.
    std::vector<std::string> errors;
};

/// Runs one command, writes its outputs and manifest.json into out_dir and
/// returns the manifest. Configuration errors propagate; engine errors are
/// recorded in the manifest and clear the pass flag.
RunManifest run(const std::string& command, const RunConfig& config,
                const std::filesystem::path& out_dir);

/// Dispatches a study command to its diagnostic.
EstimateReport run_study(const std::string& command, const RunConfig& config);

}  // namespace spde
