#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tomopair {

// Run manifest: records the effective config hash, seed, tool version, and
// an FNV-1a hash of every declared output so reruns can be compared byte for
// byte. No timestamps: a run with identical config and seed must produce an
// identical manifest.
inline constexpr const char* kToolVersion = "0.1.0";

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64_str(const std::string& s);
std::uint64_t fnv1a64_file(const std::string& path);

class Manifest {
public:
    Manifest(std::string command, std::string config_canonical, std::uint64_t seed);

    // Registers an output path (before it is written, so failures can clean
    // up partial files).
    void declare(const std::string& path);
    const std::vector<std::string>& declared() const { return outputs_; }

    // Hashes all declared outputs and writes <out_dir>/run_manifest.json.
    void write(const std::string& out_dir) const;

    // Removes declared outputs that exist (failure path).
    void remove_partial_outputs() const;

private:
    std::string command_;
    std::string config_;
    std::uint64_t seed_;
    std::vector<std::string> outputs_;
};

// Deletes declared outputs unless the run reached commit(): a failing
// command never leaves partial files behind.
class ManifestGuard {
public:
    explicit ManifestGuard(Manifest& manifest) : manifest_(manifest) {}
    ~ManifestGuard() {
        if (armed_) manifest_.remove_partial_outputs();
    }
    void commit(const std::string& out_dir) {
        manifest_.write(out_dir);
        armed_ = false;
    }

private:
    Manifest& manifest_;
    bool armed_ = true;
};

} // namespace tomopair
