#pragma once

#include <string>
#include <vector>

#include "tomopair/grid.hpp"
#include "tomopair/nn.hpp"

namespace tomopair {

// Automated detection workflow: dense U-Net segmentation, Otsu thresholding
// of the normalized prediction, connected-component extraction, voxel-size
// filtering, and precision/recall scoring against ground-truth labels.

struct BinaryMask {
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> data; // 0 / 1

    BinaryMask() = default;
    explicit BinaryMask(std::vector<std::size_t> shape_, std::uint8_t fill = 0);

    std::size_t size() const { return data.size(); }
};

BinaryMask mask_from_labels(const LabelField& labels);
BinaryMask threshold_mask(const ScalarField& f, float threshold); // f >= threshold
ScalarField mask_to_field(const BinaryMask& m);

// Trains the segmentation network on patches cut at identical offsets from
// each volume and its mask; targets stay in raw {0,1} space.
TrainResult train_segmenter(const std::vector<std::pair<ScalarField, BinaryMask>>& data,
                            const UNetConfig& ucfg, TrainConfig tcfg, std::size_t n_patches,
                            const std::vector<std::size_t>& patch_size);

// Threshold maximizing the between-class variance of a 256-bin histogram of
// the min-max normalized values, mapped back to raw units (apply as
// value >= threshold). Ties break toward the lower threshold.
float otsu_threshold(const ScalarField& f);

enum class Connectivity : int { Faces = 6, FacesEdges = 18, Full = 26 };

struct Components {
    LabelField labels;               // 1..K in raster discovery order
    std::vector<std::size_t> counts; // counts[k-1] = voxels of component k
};

Components connected_components(const BinaryMask& m, Connectivity connectivity);

struct Detection {
    std::int32_t component_id = 0;
    std::size_t voxel_count = 0;
    double centroid[3] = {0, 0, 0};            // (z, y, x)
    std::vector<std::size_t> voxels;           // linear indices
};

// Keeps components with voxel_count >= min_size.
std::vector<Detection> filter_components(const Components& components, std::size_t min_size);

struct DetectionScore {
    std::size_t min_size = 0;
    std::size_t tp = 0, fp = 0, fn = 0;
    double precision = 1.0, recall = 1.0;

    double f1() const;
};

struct DetectionReport {
    std::string matching = "greedy largest-overlap, >=1 shared voxel";
    std::vector<DetectionScore> entries;

    double best_f1() const;
};

// Greedy largest-overlap-first matching: a prediction is a true positive
// when it shares at least one voxel with a ground-truth component not
// already claimed. Zero predictions score precision 1 by convention.
DetectionScore score_detections(const std::vector<Detection>& detections,
                                const LabelField& gt_labels);

// segment -> Otsu -> components once, then filter + score per size
// threshold (ascending).
DetectionReport pr_sweep(const ScalarField& volume, const UNetParams& seg_params,
                         const LabelField& gt_labels,
                         const std::vector<std::size_t>& size_thresholds);

// columns: min_size,tp,fp,fn,precision,recall
std::string report_to_csv(const DetectionReport& report);

// Single-volume train/test protocol: the volume is cut along one axis at
// `fraction`; labeled components are assigned to a side by centroid.
struct RegionSplit {
    ScalarField train_volume, test_volume;
    LabelField train_labels, test_labels;
    std::size_t train_components = 0, test_components = 0;
};

RegionSplit split_for_training(const ScalarField& volume, const LabelField& labels,
                               std::size_t axis, double fraction);

} // namespace tomopair
