#include "tomopair/fft.hpp"

#include <cmath>
#include <numbers>

namespace tomopair {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_inplace(std::complex<double>* data, std::size_t n, bool inverse) {
    require(n > 0 && (n & (n - 1)) == 0, "fft: length must be a power of two");
    if (n == 1) return;

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        double angle = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wl(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = data[i + k];
                std::complex<double> v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }

    if (inverse) {
        double scale = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) data[i] *= scale;
    }
}

namespace {

// Transform along one axis of a row-major grid by gather/scatter through a
// contiguous scratch line.
void transform_axis(ComplexGrid& g, std::size_t axis, bool inverse) {
    const std::size_t nd = g.shape.size();
    std::size_t n = g.shape[axis];
    if (n == 1) return;

    std::size_t stride = 1;
    for (std::size_t ax = axis + 1; ax < nd; ++ax) stride *= g.shape[ax];
    std::size_t outer = 1;
    for (std::size_t ax = 0; ax < axis; ++ax) outer *= g.shape[ax];
    std::size_t inner = stride;
    std::size_t outer_stride = n * stride;

    std::vector<std::complex<double>> line(n);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            std::complex<double>* base = g.data.data() + o * outer_stride + i;
            for (std::size_t k = 0; k < n; ++k) line[k] = base[k * stride];
            fft_inplace(line.data(), n, inverse);
            for (std::size_t k = 0; k < n; ++k) base[k * stride] = line[k];
        }
    }
}

} // namespace

ComplexGrid fft_forward(const ScalarField& f) {
    ComplexGrid g;
    g.shape.resize(f.ndim());
    std::size_t total = 1;
    for (std::size_t ax = 0; ax < f.ndim(); ++ax) {
        g.shape[ax] = next_pow2(f.shape[ax]);
        total *= g.shape[ax];
    }
    g.data.assign(total, {0.0, 0.0});

    if (f.ndim() == 2) {
        for (std::size_t y = 0; y < f.shape[0]; ++y)
            for (std::size_t x = 0; x < f.shape[1]; ++x)
                g.data[y * g.shape[1] + x] = f.at2(y, x);
    } else {
        for (std::size_t z = 0; z < f.shape[0]; ++z)
            for (std::size_t y = 0; y < f.shape[1]; ++y)
                for (std::size_t x = 0; x < f.shape[2]; ++x)
                    g.data[(z * g.shape[1] + y) * g.shape[2] + x] = f.at3(z, y, x);
    }

    for (std::size_t ax = 0; ax < g.shape.size(); ++ax) transform_axis(g, ax, false);
    return g;
}

ScalarField fft_inverse_real(const ComplexGrid& g, const std::vector<std::size_t>& out_shape) {
    require(out_shape.size() == g.shape.size(), "fft_inverse_real: rank mismatch");
    for (std::size_t ax = 0; ax < out_shape.size(); ++ax)
        require(out_shape[ax] <= g.shape[ax], "fft_inverse_real: crop exceeds grid");

    ComplexGrid tmp = g;
    for (std::size_t ax = 0; ax < tmp.shape.size(); ++ax) transform_axis(tmp, ax, true);

    ScalarField out(out_shape);
    if (out.ndim() == 2) {
        for (std::size_t y = 0; y < out_shape[0]; ++y)
            for (std::size_t x = 0; x < out_shape[1]; ++x)
                out.at2(y, x) = static_cast<float>(tmp.data[y * tmp.shape[1] + x].real());
    } else {
        for (std::size_t z = 0; z < out_shape[0]; ++z)
            for (std::size_t y = 0; y < out_shape[1]; ++y)
                for (std::size_t x = 0; x < out_shape[2]; ++x)
                    out.at3(z, y, x) = static_cast<float>(
                        tmp.data[(z * tmp.shape[1] + y) * tmp.shape[2] + x].real());
    }
    return out;
}

} // namespace tomopair
