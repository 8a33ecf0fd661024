#include "manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "tomopair/errors.hpp"

namespace tomopair {

std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

std::uint64_t fnv1a64_str(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("manifest: cannot hash missing file '" + path + "'");
    std::uint64_t h = 0xCBF29CE484222325ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<std::uint8_t>(buf[i]);
            h *= 0x100000001B3ull;
        }
    }
    return h;
}

Manifest::Manifest(std::string command, std::string config_canonical, std::uint64_t seed)
    : command_(std::move(command)), config_(std::move(config_canonical)), seed_(seed) {}

void Manifest::declare(const std::string& path) { outputs_.push_back(path); }

void Manifest::write(const std::string& out_dir) const {
    nlohmann::json doc;
    doc["tool"] = "tomopair";
    doc["tool_version"] = kToolVersion;
    doc["command"] = command_;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64_str(config_)));
    doc["config_fnv1a64"] = hash;
    doc["seed"] = seed_;
    nlohmann::json outs = nlohmann::json::array();
    for (const std::string& path : outputs_) {
        std::error_code ec;
        std::uintmax_t bytes = std::filesystem::file_size(path, ec);
        if (ec) throw IoError("manifest: declared output missing: '" + path + "'");
        char fh[32];
        std::snprintf(fh, sizeof(fh), "%016llx",
                      static_cast<unsigned long long>(fnv1a64_file(path)));
        outs.push_back({{"path", std::filesystem::path(path).filename().string()},
                        {"bytes", bytes},
                        {"fnv1a64", fh}});
    }
    doc["outputs"] = outs;

    std::string path = out_dir + "/run_manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("manifest: cannot write '" + path + "'");
    out << doc.dump(2) << "\n";
}

void Manifest::remove_partial_outputs() const {
    for (const std::string& path : outputs_) {
        std::error_code ec;
        std::filesystem::remove(path, ec);
    }
}

} // namespace tomopair
