#ifndef VCCNET_MANIFEST_HPP
#define VCCNET_MANIFEST_HPP

// Output manifests: every artifact a command writes, with its SHA-256.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vccnet {

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct ManifestEntry {
    std::string path;  // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

class Manifest {
public:
    Manifest(std::filesystem::path root, std::string command);

    /// Hashes a file already written below the root.
    void add(const std::filesystem::path& relative);
    void set_info(const std::string& key, nlohmann::json value) { info_[key] = std::move(value); }

    const std::vector<ManifestEntry>& entries() const { return entries_; }
    nlohmann::json to_json() const;
    /// Writes manifest.json into the root.
    void write() const;

private:
    std::filesystem::path root_;
    std::string command_;
    std::vector<ManifestEntry> entries_;
    nlohmann::json info_ = nlohmann::json::object();
};

/// Re-hashes every entry of a manifest.json; returns the paths that differ.
std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path);

}  // namespace vccnet

#endif  // VCCNET_MANIFEST_HPP
