#include "vccnet/manifest.hpp"

#include "vccnet/errors.hpp"
#include "vccnet/grid_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <memory>

namespace vccnet {

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::Io, "sha256: digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 15]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file_bytes(path)); }

Manifest::Manifest(std::filesystem::path root, std::string command)
    : root_(std::move(root)), command_(std::move(command)) {}

void Manifest::add(const std::filesystem::path& relative) {
    const auto bytes = read_file_bytes(root_ / relative);
    entries_.push_back({relative.generic_string(), sha256_hex(bytes), bytes.size()});
}

nlohmann::json Manifest::to_json() const {
    nlohmann::json files = nlohmann::json::array();
    std::vector<ManifestEntry> sorted = entries_;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    for (const auto& e : sorted) {
        files.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    }
    return {{"command", command_}, {"files", files}, {"info", info_}};
}

void Manifest::write() const { write_file_text(root_ / "manifest.json", to_json().dump(2) + "\n"); }

std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path) {
    const auto bytes = read_file_bytes(manifest_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Validation, std::string("manifest: ") + e.what());
    }
    std::vector<std::string> bad;
    const auto root = manifest_path.parent_path();
    for (const auto& f : j.at("files")) {
        const auto rel = f.at("path").get<std::string>();
        const auto p = root / rel;
        if (!std::filesystem::exists(p) || sha256_file(p) != f.at("sha256").get<std::string>()) {
            bad.push_back(rel);
        }
    }
    return bad;
}

}  // namespace vccnet
