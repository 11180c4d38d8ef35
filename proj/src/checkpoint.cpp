#include "vccnet/checkpoint.hpp"

#include <cstring>
#include <map>

namespace vccnet {

namespace {

constexpr char kMagic[4] = {'V', 'C', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    const std::uint8_t* take(std::size_t n) {
        if (bytes_.size() - pos_ < n) {
            throw Error(ErrorCode::Validation, "checkpoint: truncated archive");
        }
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint64_t uint(int width) {
        const std::uint8_t* p = take(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelBundle& bundle) {
    nlohmann::json header;
    header["model"] = model_config_to_json(bundle.config);
    header["entries"] = nlohmann::json::array();
    std::vector<std::vector<std::uint8_t>> blobs;
    const auto add = [&](const auto& entries, const char* kind) {
        for (const auto& [name, var] : entries) {
            header["entries"].push_back(
                {{"name", name}, {"kind", kind}, {"rows", var.rows()}, {"cols", var.cols()}});
            blobs.push_back(encode_grid(var.value()));
        }
    };
    add(bundle.params.parameters(), "parameter");
    add(bundle.params.buffers(), "buffer");

    const std::string text = header.dump();
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& blob : blobs) {
        put_u64(out, blob.size());
        out.insert(out.end(), blob.begin(), blob.end());
    }
    return out;
}

ModelBundle decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader in(bytes);
    if (std::memcmp(in.take(4), kMagic, 4) != 0) {
        throw Error(ErrorCode::Validation, "checkpoint: bad magic");
    }
    if (in.uint(4) != kVersion) {
        throw Error(ErrorCode::Validation, "checkpoint: unsupported version");
    }
    const std::size_t header_len = in.uint(4);
    const auto* text = reinterpret_cast<const char*>(in.take(header_len));
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text, text + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Validation, std::string("checkpoint: header is not JSON: ") + e.what());
    }
    if (!header.contains("model") || !header.contains("entries") || !header["entries"].is_array()) {
        throw Error(ErrorCode::Validation, "checkpoint: header lacks model or entries");
    }
    ModelBundle bundle = ModelBundle::create(model_config_from_json(header["model"]), 0);

    std::map<std::string, Grid> stored;
    for (const auto& entry : header["entries"]) {
        const std::size_t len = in.uint(8);
        const std::uint8_t* blob = in.take(len);
        stored.emplace(entry.at("name").get<std::string>(), decode_grid(blob, len));
    }
    if (!in.done()) {
        throw Error(ErrorCode::Validation, "checkpoint: trailing bytes after the last entry");
    }
    const auto restore = [&](const auto& entries) {
        for (const auto& [name, var] : entries) {
            const auto it = stored.find(name);
            if (it == stored.end()) {
                throw Error(ErrorCode::Validation, "checkpoint: missing entry \"" + name + "\"");
            }
            if (it->second.rows() != var.rows() || it->second.cols() != var.cols()) {
                throw Error(ErrorCode::Validation, "checkpoint: entry \"" + name + "\" has the wrong shape");
            }
            Var v = var;
            v.mutable_value() = it->second;
        }
    };
    restore(bundle.params.parameters());
    restore(bundle.params.buffers());
    return bundle;
}

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle) {
    write_file_bytes(path, encode_checkpoint(bundle));
}

ModelBundle load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace vccnet
