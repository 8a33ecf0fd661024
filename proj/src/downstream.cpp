#include "tomopair/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace tomopair {

BinaryMask::BinaryMask(std::vector<std::size_t> shape_, std::uint8_t fill)
    : shape(std::move(shape_)) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        require(e > 0, "BinaryMask: zero extent");
        n *= e;
    }
    data.assign(n, fill);
}

BinaryMask mask_from_labels(const LabelField& labels) {
    BinaryMask m(labels.shape);
    for (std::size_t i = 0; i < labels.size(); ++i) m.data[i] = labels.data[i] != 0 ? 1 : 0;
    return m;
}

BinaryMask threshold_mask(const ScalarField& f, float threshold) {
    BinaryMask m(f.shape);
    for (std::size_t i = 0; i < f.size(); ++i) m.data[i] = f.data[i] >= threshold ? 1 : 0;
    return m;
}

ScalarField mask_to_field(const BinaryMask& m) {
    ScalarField f(m.shape);
    for (std::size_t i = 0; i < m.size(); ++i) f.data[i] = static_cast<float>(m.data[i]);
    return f;
}

TrainResult train_segmenter(const std::vector<std::pair<ScalarField, BinaryMask>>& data,
                            const UNetConfig& ucfg, TrainConfig tcfg, std::size_t n_patches,
                            const std::vector<std::size_t>& patch_size) {
    require(!data.empty(), "train_segmenter: empty training set");
    require(n_patches >= 10, "train_segmenter: need at least 10 patches");
    for (const auto& [vol, mask] : data)
        require(vol.shape == mask.shape, "train_segmenter: mask shape must match volume");

    tcfg.standardize_targets = false; // targets are {0,1} masks
    Rng rng(tcfg.seed);

    PairDataset dataset;
    dataset.items.reserve(n_patches);
    const std::size_t per = (n_patches + data.size() - 1) / data.size();
    for (std::size_t i = 0; i < data.size() && dataset.items.size() < n_patches; ++i) {
        std::size_t want = std::min(per, n_patches - dataset.items.size());
        Rng patch_rng = rng.derive(100 + i);
        ScalarField mask_field = mask_to_field(data[i].second);
        auto pairs = extract_patch_pairs(data[i].first, mask_field, want, patch_size, patch_rng);
        for (auto& pr : pairs) dataset.items.push_back(std::move(pr));
    }

    return train(dataset, ucfg, tcfg);
}

float otsu_threshold(const ScalarField& f) {
    const float lo = f.min(), hi = f.max();
    if (!(hi > lo)) throw DegenerateInputError("otsu_threshold: constant field");

    constexpr std::size_t kBins = 256;
    std::vector<std::size_t> hist(kBins, 0);
    const double scale = static_cast<double>(kBins) / (static_cast<double>(hi) - lo);
    for (float v : f.data) {
        std::size_t b = static_cast<std::size_t>((static_cast<double>(v) - lo) * scale);
        if (b >= kBins) b = kBins - 1;
        ++hist[b];
    }

    // Between-class variance via cumulative moments; candidates are the 255
    // bin boundaries (class 0 = bins < t).
    const double total = static_cast<double>(f.size());
    double total_mean = 0.0;
    for (std::size_t b = 0; b < kBins; ++b)
        total_mean += static_cast<double>(hist[b]) * (static_cast<double>(b) + 0.5);
    total_mean /= total;

    double best_var = -1.0;
    std::size_t best_t = 1;
    double w0 = 0.0, sum0 = 0.0;
    for (std::size_t t = 1; t < kBins; ++t) {
        w0 += static_cast<double>(hist[t - 1]);
        sum0 += static_cast<double>(hist[t - 1]) * (static_cast<double>(t - 1) + 0.5);
        double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        double mu0 = sum0 / w0;
        double mu1 = (total_mean * total - sum0) / w1;
        double var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
        if (var > best_var) { // strict improvement: ties keep the lower threshold
            best_var = var;
            best_t = t;
        }
    }
    if (best_var < 0.0) throw DegenerateInputError("otsu_threshold: all values in one bin");

    return static_cast<float>(static_cast<double>(lo) +
                              static_cast<double>(best_t) / kBins *
                                  (static_cast<double>(hi) - lo));
}

Components connected_components(const BinaryMask& m, Connectivity connectivity) {
    require(m.shape.size() == 3, "connected_components: mask must be 3D");
    const int conn = static_cast<int>(connectivity);
    require(conn == 6 || conn == 18 || conn == 26, "connected_components: bad connectivity");

    const long nz = static_cast<long>(m.shape[0]), ny = static_cast<long>(m.shape[1]),
               nx = static_cast<long>(m.shape[2]);

    std::vector<std::array<long, 3>> offsets;
    for (long dz = -1; dz <= 1; ++dz)
        for (long dy = -1; dy <= 1; ++dy)
            for (long dx = -1; dx <= 1; ++dx) {
                long manhattan = std::abs(dz) + std::abs(dy) + std::abs(dx);
                if (manhattan == 0) continue;
                if (conn == 6 && manhattan > 1) continue;
                if (conn == 18 && manhattan > 2) continue;
                offsets.push_back({dz, dy, dx});
            }

    Components out;
    out.labels = LabelField(m.shape, 0);
    std::vector<std::size_t> stack;
    std::int32_t next_id = 0;

    for (std::size_t start = 0; start < m.size(); ++start) {
        if (m.data[start] == 0 || out.labels.data[start] != 0) continue;
        ++next_id;
        std::size_t count = 0;
        stack.clear();
        stack.push_back(start);
        out.labels.data[start] = next_id;
        while (!stack.empty()) {
            std::size_t idx = stack.back();
            stack.pop_back();
            ++count;
            long z = static_cast<long>(idx / (ny * nx));
            long y = static_cast<long>((idx / nx) % ny);
            long x = static_cast<long>(idx % nx);
            for (const auto& [dz, dy, dx] : offsets) {
                long zz = z + dz, yy = y + dy, xx = x + dx;
                if (zz < 0 || zz >= nz || yy < 0 || yy >= ny || xx < 0 || xx >= nx) continue;
                std::size_t nidx = static_cast<std::size_t>((zz * ny + yy) * nx + xx);
                if (m.data[nidx] == 0 || out.labels.data[nidx] != 0) continue;
                out.labels.data[nidx] = next_id;
                stack.push_back(nidx);
            }
        }
        out.counts.push_back(count);
    }
    return out;
}

std::vector<Detection> filter_components(const Components& components, std::size_t min_size) {
    const std::size_t k = components.counts.size();
    std::vector<Detection> out;
    std::vector<std::size_t> keep_index(k, std::size_t(-1));
    for (std::size_t id = 1; id <= k; ++id) {
        if (components.counts[id - 1] < min_size) continue;
        keep_index[id - 1] = out.size();
        Detection d;
        d.component_id = static_cast<std::int32_t>(id);
        d.voxel_count = components.counts[id - 1];
        out.push_back(std::move(d));
    }
    if (out.empty()) return out;

    const std::size_t ny = components.labels.shape[1], nx = components.labels.shape[2];
    for (std::size_t i = 0; i < components.labels.size(); ++i) {
        std::int32_t id = components.labels.data[i];
        if (id == 0) continue;
        std::size_t slot = keep_index[static_cast<std::size_t>(id) - 1];
        if (slot == std::size_t(-1)) continue;
        Detection& d = out[slot];
        d.voxels.push_back(i);
        d.centroid[0] += static_cast<double>(i / (ny * nx));
        d.centroid[1] += static_cast<double>((i / nx) % ny);
        d.centroid[2] += static_cast<double>(i % nx);
    }
    for (Detection& d : out)
        for (double& c : d.centroid) c /= static_cast<double>(d.voxel_count);
    return out;
}

double DetectionScore::f1() const {
    double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

double DetectionReport::best_f1() const {
    double best = 0.0;
    for (const DetectionScore& e : entries) best = std::max(best, e.f1());
    return best;
}

DetectionScore score_detections(const std::vector<Detection>& detections,
                                const LabelField& gt_labels) {
    std::int32_t n_gt = 0;
    for (std::int32_t v : gt_labels.data) n_gt = std::max(n_gt, v);

    // Overlap table (detection, gt id) -> shared voxels.
    struct Candidate {
        std::size_t overlap;
        std::size_t det;
        std::int32_t gt;
    };
    std::vector<Candidate> candidates;
    for (std::size_t d = 0; d < detections.size(); ++d) {
        std::map<std::int32_t, std::size_t> overlaps;
        for (std::size_t idx : detections[d].voxels) {
            std::int32_t g = gt_labels.data[idx];
            if (g != 0) ++overlaps[g];
        }
        for (const auto& [g, n] : overlaps) candidates.push_back({n, d, g});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        if (a.det != b.det) return a.det < b.det;
        return a.gt < b.gt;
    });

    std::vector<bool> det_used(detections.size(), false);
    std::vector<bool> gt_used(static_cast<std::size_t>(n_gt) + 1, false);
    std::size_t tp = 0;
    for (const Candidate& c : candidates) {
        if (det_used[c.det] || gt_used[static_cast<std::size_t>(c.gt)]) continue;
        det_used[c.det] = true;
        gt_used[static_cast<std::size_t>(c.gt)] = true;
        ++tp;
    }

    DetectionScore s;
    s.tp = tp;
    s.fp = detections.size() - tp;
    s.fn = static_cast<std::size_t>(n_gt) - tp;
    s.precision = detections.empty() ? 1.0
                                     : static_cast<double>(tp) /
                                           static_cast<double>(detections.size());
    s.recall = n_gt == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(n_gt);
    return s;
}

DetectionReport pr_sweep(const ScalarField& volume, const UNetParams& seg_params,
                         const LabelField& gt_labels,
                         const std::vector<std::size_t>& size_thresholds) {
    require(!size_thresholds.empty(), "pr_sweep: need at least one size threshold");
    for (std::size_t i = 1; i < size_thresholds.size(); ++i)
        require(size_thresholds[i] >= size_thresholds[i - 1],
                "pr_sweep: size thresholds must be ascending");
    require(volume.shape == gt_labels.shape, "pr_sweep: labels must match volume shape");

    ScalarField prediction = predict(volume, seg_params);
    float threshold = otsu_threshold(prediction);
    BinaryMask mask = threshold_mask(prediction, threshold);
    Components components = connected_components(mask, Connectivity::Full);

    DetectionReport report;
    for (std::size_t min_size : size_thresholds) {
        std::vector<Detection> detections = filter_components(components, min_size);
        DetectionScore score = score_detections(detections, gt_labels);
        score.min_size = min_size;
        report.entries.push_back(score);
    }
    return report;
}

std::string report_to_csv(const DetectionReport& report) {
    std::string out = "min_size,tp,fp,fn,precision,recall\n";
    char line[160];
    for (const DetectionScore& e : report.entries) {
        std::snprintf(line, sizeof(line), "%zu,%zu,%zu,%zu,%.9g,%.9g\n", e.min_size, e.tp, e.fp,
                      e.fn, e.precision, e.recall);
        out += line;
    }
    return out;
}

RegionSplit split_for_training(const ScalarField& volume, const LabelField& labels,
                               std::size_t axis, double fraction) {
    require(volume.ndim() == 3 && volume.shape == labels.shape,
            "split_for_training: need matching 3D volume and labels");
    require(axis < 3, "split_for_training: axis out of range");
    require(fraction > 0.0 && fraction < 1.0, "split_for_training: fraction must lie in (0,1)");

    const std::size_t cut = std::max<std::size_t>(
        1, std::min(volume.shape[axis] - 1,
                    static_cast<std::size_t>(std::llround(
                        fraction * static_cast<double>(volume.shape[axis])))));

    std::vector<std::size_t> train_shape = volume.shape, test_shape = volume.shape;
    train_shape[axis] = cut;
    test_shape[axis] = volume.shape[axis] - cut;

    RegionSplit split;
    split.train_volume = ScalarField(train_shape);
    split.test_volume = ScalarField(test_shape);
    split.train_volume.voxel_size = split.test_volume.voxel_size = volume.voxel_size;
    split.train_labels = LabelField(train_shape, 0);
    split.test_labels = LabelField(test_shape, 0);

    const std::size_t nz = volume.shape[0], ny = volume.shape[1], nx = volume.shape[2];
    for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                std::size_t coords[3] = {z, y, x};
                float v = volume.at3(z, y, x);
                std::int32_t l = labels.at3(z, y, x);
                if (coords[axis] < cut) {
                    std::size_t c[3] = {z, y, x};
                    split.train_volume.at3(c[0], c[1], c[2]) = v;
                    split.train_labels.at3(c[0], c[1], c[2]) = l;
                } else {
                    std::size_t c[3] = {z, y, x};
                    c[axis] -= cut;
                    split.test_volume.at3(c[0], c[1], c[2]) = v;
                    split.test_labels.at3(c[0], c[1], c[2]) = l;
                }
            }

    // Re-number ids per side so each side's labels are contiguous 1..K, and
    // count components by presence.
    auto renumber = [](LabelField& lf) {
        std::map<std::int32_t, std::int32_t> remap;
        for (std::int32_t& v : lf.data) {
            if (v == 0) continue;
            auto it = remap.find(v);
            if (it == remap.end())
                it = remap.emplace(v, static_cast<std::int32_t>(remap.size()) + 1).first;
            v = it->second;
        }
        return remap.size();
    };
    split.train_components = renumber(split.train_labels);
    split.test_components = renumber(split.test_labels);
    return split;
}

} // namespace tomopair
