#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tomopair/nn.hpp"
#include "tomopair/phantom.hpp"
#include "tomopair/recon.hpp"

namespace tomopair {

// Structured run configuration: a versioned JSON document validated
// strictly (unknown keys are rejected), with flag/env overrides applied on
// top. One config fully determines a pipeline run.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PairingConfig {
    std::size_t patch_count = 0; // 0 = per-scheme default (1000 2D / 1200 3D)
    std::vector<std::size_t> patch_size; // empty = per-scheme default (128x128 / 64^3)
};

struct DetectionConfig {
    bool enabled = false;
    std::size_t train_patches = 300;
    std::vector<std::size_t> patch_size = {16, 16, 16};
    std::vector<std::size_t> size_thresholds = {1, 5, 10, 20, 40, 80};
    std::size_t split_axis = 1;    // train/test cut through the volume
    double split_fraction = 0.5;
    UNetConfig unet = {3, 2, 3, 4};
    TrainConfig train;
};

struct PipelineConfig {
    int version = 1;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string out_dir = "out";
    std::string scheme = "t2t-df"; // p2p-ip | p2p-tap | p2p-df | t2t-eoa | t2t-df

    PhantomSpec phantom;
    AcquisitionSpec acquisition;
    PairingConfig pairing;
    UNetConfig unet;            // spatial_dims derived from the scheme
    bool unet_explicit = false; // set when the config carries a "unet" block
    TrainConfig train;
    std::vector<std::size_t> recon_shape; // empty = phantom shape
    RampWindow window = RampWindow::Hann;
    double fsc_shell_width = 1.0;
    double wedge_half_angle = 0.0; // 0 = derive from the tilt range
    DetectionConfig detection;

    bool is_t2t() const { return scheme.rfind("t2t", 0) == 0; }

    // Effective per-scheme settings.
    std::size_t patch_count() const;
    std::vector<std::size_t> patch_size() const;
    UNetConfig network() const;
    std::vector<std::size_t> reconstruction_shape() const;
    double wedge_angle() const;
};

bool valid_scheme(const std::string& scheme);

// Parses and validates a config document; `text` must be a version-1 JSON
// object. Unknown keys anywhere are errors.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::string& path);

// Canonical serialization of the effective config (sorted keys, all
// defaults materialized) — hashed into the run manifest.
std::string canonical_config(const PipelineConfig& cfg);

} // namespace tomopair
