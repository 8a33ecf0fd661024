#pragma once

#include <complex>
#include <vector>

#include "tomopair/grid.hpp"

namespace tomopair {

// Iterative radix-2 FFT plus the small amount of N-d machinery the library
// needs. Transforms run in double precision; non-power-of-two inputs are
// zero-padded per axis to the next power of two (the single padding policy
// used everywhere a spectrum is taken).

std::size_t next_pow2(std::size_t n);

// In-place transform; n must be a power of two. inverse=true applies the
// unscaled conjugate transform followed by division by n.
void fft_inplace(std::complex<double>* data, std::size_t n, bool inverse);

// Complex N-d grid, row-major like ScalarField (axes: slowest first).
struct ComplexGrid {
    std::vector<std::size_t> shape;
    std::vector<std::complex<double>> data;

    std::size_t size() const { return data.size(); }
};

// Real field -> full complex spectrum. Each axis is zero-padded to the next
// power of two before the transform.
ComplexGrid fft_forward(const ScalarField& f);

// Full complex spectrum -> real field: inverse transform, then the real part
// cropped to `out_shape` (top-left corner), matching fft_forward's padding.
ScalarField fft_inverse_real(const ComplexGrid& g, const std::vector<std::size_t>& out_shape);

// Signed integer frequency index for bin k of an n-point transform
// (0..n/2 positive, then negative).
inline long freq_index(std::size_t k, std::size_t n) {
    return k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

} // namespace tomopair
