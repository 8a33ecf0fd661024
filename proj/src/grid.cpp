#include "tomopair/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace tomopair {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
    require(shape.size() == 2 || shape.size() == 3, "ScalarField: shape must have 2 or 3 axes");
    std::size_t n = 1;
    for (std::size_t e : shape) {
        require(e > 0, "ScalarField: zero extent");
        n *= e;
    }
    return n;
}

// SplitMix64 finalizer; bijective on u64.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace

ScalarField::ScalarField(std::vector<std::size_t> shape_, float fill)
    : shape(std::move(shape_)) {
    std::size_t n = checked_product(shape);
    data.assign(n, fill);
    voxel_size.assign(shape.size(), 1.0);
}

ScalarField::ScalarField(std::vector<std::size_t> shape_, std::vector<float> data_,
                         std::vector<double> voxel_size_)
    : shape(std::move(shape_)), data(std::move(data_)), voxel_size(std::move(voxel_size_)) {
    std::size_t n = checked_product(shape);
    require(n == data.size(), "ScalarField: product(shape) != data length");
    if (voxel_size.empty()) voxel_size.assign(shape.size(), 1.0);
    require(voxel_size.size() == shape.size(), "ScalarField: voxel_size rank mismatch");
}

bool ScalarField::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void ScalarField::require_finite(const char* op) const {
    if (!all_finite()) throw PreconditionError(std::string(op) + ": field contains NaN/Inf");
}

double ScalarField::mean() const {
    double s = 0.0;
    for (float v : data) s += v;
    return s / static_cast<double>(data.size());
}

float ScalarField::min() const { return *std::min_element(data.begin(), data.end()); }
float ScalarField::max() const { return *std::max_element(data.begin(), data.end()); }

bool same_shape(const ScalarField& a, const ScalarField& b) { return a.shape == b.shape; }

LabelField::LabelField(std::vector<std::size_t> shape_, std::int32_t fill)
    : shape(std::move(shape_)) {
    data.assign(checked_product(shape), fill);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
    key_ = mix64(mix64(seed) ^ mix64(stream ^ 0xA5A5A5A55A5A5A5Aull));
}

std::uint64_t Rng::next_u64() {
    return mix64(key_ ^ (++counter_ * 0xD1B54A32D192ED03ull));
}

double Rng::uniform() {
    // 53 high bits -> [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    require(n > 0, "Rng::uniform_int: n must be positive");
    // Multiply-shift bound rejection keeps the draw unbiased and portable.
    for (;;) {
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        std::uint64_t lo = static_cast<std::uint64_t>(m);
        if (lo >= n) return static_cast<std::uint64_t>(m >> 64);
        std::uint64_t threshold = (0ull - n) % n;
        if (lo >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
}

double Rng::normal() {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(angle);
    have_cached_normal_ = true;
    return r * std::cos(angle);
}

std::uint64_t Rng::poisson(double lambda) {
    require(lambda >= 0.0 && std::isfinite(lambda), "Rng::poisson: lambda must be finite and >= 0");
    if (lambda == 0.0) return 0;
    if (lambda < 60.0) {
        // Knuth's product-of-uniforms method.
        double limit = std::exp(-lambda);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }
    // Gaussian approximation for large rates; adequate above lambda ~ 60.
    double g = lambda + std::sqrt(lambda) * normal();
    if (g < 0.0) g = 0.0;
    return static_cast<std::uint64_t>(std::llround(g));
}

Rng Rng::derive(std::uint64_t stream_index) const {
    Rng child(0);
    child.key_ = mix64(key_ ^ mix64(stream_index + 0x8BADF00Dull));
    return child;
}

NormStats compute_norm_stats(const ScalarField& f) {
    f.require_finite("compute_norm_stats");
    double mean = f.mean();
    double ss = 0.0;
    for (float v : f.data) {
        double d = v - mean;
        ss += d * d;
    }
    NormStats stats;
    stats.mean = mean;
    stats.std = std::sqrt(ss / static_cast<double>(f.size()));
    return stats;
}

ScalarField apply_norm(const ScalarField& f, const NormStats& stats) {
    if (stats.degenerate())
        throw DegenerateInputError("apply_norm: zero standard deviation (constant field)");
    ScalarField out = f;
    double inv = 1.0 / stats.std;
    for (float& v : out.data) v = static_cast<float>((v - stats.mean) * inv);
    return out;
}

ScalarField invert_norm(const ScalarField& f, const NormStats& stats) {
    ScalarField out = f;
    for (float& v : out.data) v = static_cast<float>(v * stats.std + stats.mean);
    return out;
}

std::vector<std::pair<ScalarField, ScalarField>>
extract_patch_pairs(const ScalarField& a, const ScalarField& b, std::size_t count,
                    const std::vector<std::size_t>& size, Rng& rng) {
    require(same_shape(a, b), "extract_patch_pairs: fields must share one shape");
    require(count > 0, "extract_patch_pairs: count must be positive");
    require(size.size() == a.ndim(), "extract_patch_pairs: patch rank mismatch");
    for (std::size_t ax = 0; ax < size.size(); ++ax) {
        require(size[ax] > 0 && size[ax] <= a.shape[ax],
                "extract_patch_pairs: patch size exceeds field extent");
    }

    std::vector<std::pair<ScalarField, ScalarField>> out;
    out.reserve(count);
    const std::size_t nd = a.ndim();
    std::vector<std::size_t> off(nd);
    for (std::size_t p = 0; p < count; ++p) {
        for (std::size_t ax = 0; ax < nd; ++ax)
            off[ax] = rng.uniform_int(a.shape[ax] - size[ax] + 1);
        ScalarField pa(size);
        ScalarField pb(size);
        pa.voxel_size = a.voxel_size;
        pb.voxel_size = b.voxel_size;
        if (nd == 2) {
            for (std::size_t y = 0; y < size[0]; ++y)
                for (std::size_t x = 0; x < size[1]; ++x) {
                    pa.at2(y, x) = a.at2(off[0] + y, off[1] + x);
                    pb.at2(y, x) = b.at2(off[0] + y, off[1] + x);
                }
        } else {
            for (std::size_t z = 0; z < size[0]; ++z)
                for (std::size_t y = 0; y < size[1]; ++y)
                    for (std::size_t x = 0; x < size[2]; ++x) {
                        pa.at3(z, y, x) = a.at3(off[0] + z, off[1] + y, off[2] + x);
                        pb.at3(z, y, x) = b.at3(off[0] + z, off[1] + y, off[2] + x);
                    }
        }
        out.emplace_back(std::move(pa), std::move(pb));
    }
    return out;
}

ScalarField bin(const ScalarField& f, const std::vector<std::size_t>& factor) {
    require(factor.size() == f.ndim(), "bin: factor rank mismatch");
    for (std::size_t k : factor) require(k > 0, "bin: factor must be positive");
    std::vector<std::size_t> out_shape(f.ndim());
    for (std::size_t ax = 0; ax < f.ndim(); ++ax) {
        out_shape[ax] = f.shape[ax] / factor[ax];
        require(out_shape[ax] > 0, "bin: factor exceeds field extent");
    }

    ScalarField out(out_shape);
    for (std::size_t ax = 0; ax < f.ndim(); ++ax)
        out.voxel_size[ax] = f.voxel_size[ax] * static_cast<double>(factor[ax]);

    if (f.ndim() == 2) {
        double inv = 1.0 / static_cast<double>(factor[0] * factor[1]);
        for (std::size_t y = 0; y < out_shape[0]; ++y)
            for (std::size_t x = 0; x < out_shape[1]; ++x) {
                double s = 0.0;
                for (std::size_t dy = 0; dy < factor[0]; ++dy)
                    for (std::size_t dx = 0; dx < factor[1]; ++dx)
                        s += f.at2(y * factor[0] + dy, x * factor[1] + dx);
                out.at2(y, x) = static_cast<float>(s * inv);
            }
    } else {
        double inv = 1.0 / static_cast<double>(factor[0] * factor[1] * factor[2]);
        for (std::size_t z = 0; z < out_shape[0]; ++z)
            for (std::size_t y = 0; y < out_shape[1]; ++y)
                for (std::size_t x = 0; x < out_shape[2]; ++x) {
                    double s = 0.0;
                    for (std::size_t dz = 0; dz < factor[0]; ++dz)
                        for (std::size_t dy = 0; dy < factor[1]; ++dy)
                            for (std::size_t dx = 0; dx < factor[2]; ++dx)
                                s += f.at3(z * factor[0] + dz, y * factor[1] + dy,
                                           x * factor[2] + dx);
                    out.at3(z, y, x) = static_cast<float>(s * inv);
                }
    }
    return out;
}

ScalarField bin(const ScalarField& f, std::size_t factor) {
    return bin(f, std::vector<std::size_t>(f.ndim(), factor));
}

} // namespace tomopair
