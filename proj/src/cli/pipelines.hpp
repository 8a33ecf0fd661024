#pragma once

#include <string>
#include <vector>

#include "config.hpp"

namespace tomopair {

// One function per CLI subcommand. Each writes its outputs plus a
// run_manifest.json under the output directory; on failure partial outputs
// are removed by the caller via the thrown exception path in main.

void cmd_simulate(const PipelineConfig& cfg);

// Reads simulate outputs from cfg.out_dir, writes the scheme's paired data.
void cmd_pair(const PipelineConfig& cfg);

// Raw tomogram from aligned full-dose sums; for t2t schemes also the two
// half tomograms.
void cmd_reconstruct(const PipelineConfig& cfg);

// Trains on the paired data (2D patches for p2p, 3D subvolumes from the two
// half tomograms for t2t) and writes the model artifact.
void cmd_train(const PipelineConfig& cfg);

// Applies the trained model: restored tilt stack (p2p) or restored half
// tomograms plus their average (t2t).
void cmd_restore(const PipelineConfig& cfg);

struct FilterOptions {
    std::string input, output;
    std::string method = "median"; // median | nad
    std::size_t radius = 1;        // median
    std::size_t steps = 30;        // nad
    double dt = 0.0;               // 0 = stability bound for the field's rank
    double lambda = 0.0;           // 0 = robust default
};
void cmd_filter(const FilterOptions& opt, const std::string& out_dir, std::uint64_t seed);

struct FscOptions {
    std::string volume_a, volume_b;
    std::string out_csv = "fsc.csv";
    std::string out_svg; // empty = skip plot
    double shell_width = 1.0;
};
void cmd_fsc(const FscOptions& opt, const std::string& out_dir, std::uint64_t seed);

struct SegmentOptions {
    std::string model, input;
    std::string out_prediction = "segmentation_prediction.mrc";
    std::string out_mask = "segmentation_mask.mrc";
};
void cmd_segment(const SegmentOptions& opt, const std::string& out_dir, std::uint64_t seed);

struct EvaluateOptions {
    std::string prediction, truth;       // mse/psnr when both set
    std::string volume;                  // wedge ratio when set
    double wedge_half_angle = 60.0;
    std::string seg_model, labels;       // PR sweep when set with volume
    std::vector<std::size_t> size_thresholds = {1, 5, 10, 20, 40, 80};
};
void cmd_evaluate(const EvaluateOptions& opt, const std::string& out_dir, std::uint64_t seed);

// End-to-end run of the configured scheme: simulate, pair, reconstruct,
// train, restore, evaluate; all through the public module operations.
void cmd_pipeline(const PipelineConfig& cfg);

} // namespace tomopair
