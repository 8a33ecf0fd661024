#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tomopair/errors.hpp"

namespace tomopair {

// N-dimensional (2D/3D) scalar grid, row-major, last axis fastest.
// Axis order is (ny, nx) for 2D and (nz, ny, nx) for 3D. voxel_size stores
// the physical extent of one voxel per axis (defaults to 1.0).
//
// Read access is thread-safe once construction/mutation is done; operations
// in this library never mutate their inputs.
struct ScalarField {
    std::vector<std::size_t> shape;
    std::vector<float> data;
    std::vector<double> voxel_size;

    ScalarField() = default;
    ScalarField(std::vector<std::size_t> shape_, float fill = 0.0f);
    ScalarField(std::vector<std::size_t> shape_, std::vector<float> data_,
                std::vector<double> voxel_size_ = {});

    std::size_t ndim() const { return shape.size(); }
    std::size_t size() const { return data.size(); }

    std::size_t idx2(std::size_t y, std::size_t x) const { return y * shape[1] + x; }
    std::size_t idx3(std::size_t z, std::size_t y, std::size_t x) const {
        return (z * shape[1] + y) * shape[2] + x;
    }

    float& at2(std::size_t y, std::size_t x) { return data[idx2(y, x)]; }
    float at2(std::size_t y, std::size_t x) const { return data[idx2(y, x)]; }
    float& at3(std::size_t z, std::size_t y, std::size_t x) { return data[idx3(z, y, x)]; }
    float at3(std::size_t z, std::size_t y, std::size_t x) const { return data[idx3(z, y, x)]; }

    bool all_finite() const;
    void require_finite(const char* op) const;

    double mean() const; // float64 accumulation
    float min() const;
    float max() const;
};

bool same_shape(const ScalarField& a, const ScalarField& b);

// Integer companion grid for component ids / ground-truth annotations.
// 0 is background; positive ids label structures.
struct LabelField {
    std::vector<std::size_t> shape;
    std::vector<std::int32_t> data;

    LabelField() = default;
    explicit LabelField(std::vector<std::size_t> shape_, std::int32_t fill = 0);

    std::size_t size() const { return data.size(); }
    std::size_t idx3(std::size_t z, std::size_t y, std::size_t x) const {
        return (z * shape[1] + y) * shape[2] + x;
    }
    std::int32_t& at3(std::size_t z, std::size_t y, std::size_t x) { return data[idx3(z, y, x)]; }
    std::int32_t at3(std::size_t z, std::size_t y, std::size_t x) const {
        return data[idx3(z, y, x)];
    }
};

// Counter-based deterministic RNG. The output stream is a pure function of
// (seed, stream, counter), so identical seeds reproduce identical streams
// across runs and platforms, and derived streams can be consumed in parallel
// without coordination.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();
    double uniform();                           // [0, 1)
    std::uint64_t uniform_int(std::uint64_t n); // [0, n), n > 0
    double normal();                            // standard normal (Box-Muller)
    std::uint64_t poisson(double lambda);       // lambda >= 0

    // Independent substream; deterministic in (this rng's identity, stream_index).
    Rng derive(std::uint64_t stream_index) const;

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

// Population mean / standard deviation of a field.
struct NormStats {
    double mean = 0.0;
    double std = 0.0;

    bool degenerate() const { return !(std > 0.0); }
};

NormStats compute_norm_stats(const ScalarField& f);

// (f - mean) / std. Throws DegenerateInputError when stats.std == 0.
ScalarField apply_norm(const ScalarField& f, const NormStats& stats);

// f * std + mean.
ScalarField invert_norm(const ScalarField& f, const NormStats& stats);

// Cuts `count` patch pairs of extent `size` from a and b at identical,
// uniformly distributed offsets. a and b must share one shape.
std::vector<std::pair<ScalarField, ScalarField>>
extract_patch_pairs(const ScalarField& a, const ScalarField& b, std::size_t count,
                    const std::vector<std::size_t>& size, Rng& rng);

// Block-mean downsampling by an integer factor per axis. Remainder rows/
// cols/sections that do not fill a whole block are truncated. Output
// voxel_size is scaled by the factor.
ScalarField bin(const ScalarField& f, const std::vector<std::size_t>& factor);
ScalarField bin(const ScalarField& f, std::size_t factor);

} // namespace tomopair
