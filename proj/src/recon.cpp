#include "tomopair/recon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tomopair/fft.hpp"
#include "tomopair/parallel.hpp"

namespace tomopair {

ScalarField ramp_filter(const ScalarField& projection, RampWindow window) {
    require(projection.ndim() == 2, "ramp_filter: projection must be 2D");
    const std::size_t ny = projection.shape[0], nx = projection.shape[1];
    require(nx >= 2, "ramp_filter: width must be >= 2");

    const std::size_t n = next_pow2(nx);
    std::vector<double> gain(n);
    for (std::size_t k = 0; k < n; ++k) {
        double f = std::abs(static_cast<double>(freq_index(k, n))) / static_cast<double>(n);
        double g = f;
        if (window == RampWindow::Hann)
            g *= 0.5 * (1.0 + std::cos(std::numbers::pi * f / 0.5));
        gain[k] = g;
    }

    ScalarField out(projection.shape);
    out.voxel_size = projection.voxel_size;
    std::vector<std::complex<double>> line(n);
    for (std::size_t y = 0; y < ny; ++y) {
        for (std::size_t x = 0; x < n; ++x)
            line[x] = x < nx ? std::complex<double>(projection.at2(y, x), 0.0)
                             : std::complex<double>(0.0, 0.0);
        fft_inplace(line.data(), n, false);
        for (std::size_t x = 0; x < n; ++x) line[x] *= gain[x];
        fft_inplace(line.data(), n, true);
        for (std::size_t x = 0; x < nx; ++x)
            out.at2(y, x) = static_cast<float>(line[x].real());
    }
    return out;
}

ScalarField backproject(const TiltSeries& series, const std::vector<std::size_t>& out_shape,
                        bool filtered, RampWindow window) {
    require(!series.tilts.empty(), "backproject: empty tilt series");
    require(out_shape.size() == 3, "backproject: output shape must be 3D");
    validate_tilt_series(series);

    TiltSeries sorted = sorted_by_angle(series);
    std::vector<ScalarField> projections(sorted.size());
    parallel_for_each(sorted.size(), [&](std::size_t t) {
        projections[t] = filtered ? ramp_filter(sorted.tilts[t].projection, window)
                                  : sorted.tilts[t].projection;
    });

    const std::size_t nz = out_shape[0], ny = out_shape[1], nx = out_shape[2];
    const std::size_t py = sorted.tilts.front().projection.shape[0];
    const std::size_t px = sorted.tilts.front().projection.shape[1];
    require(py >= ny, "backproject: projection height smaller than output ny");

    const double cz = 0.5 * static_cast<double>(nz - 1);
    const double cx = 0.5 * static_cast<double>(nx - 1);
    const double cu = 0.5 * static_cast<double>(px - 1);
    const double cpy = 0.5 * static_cast<double>(py - 1);
    const double cy = 0.5 * static_cast<double>(ny - 1);
    const double scale = std::numbers::pi / static_cast<double>(sorted.size());

    ScalarField vol(out_shape, 0.0f);

    // Slab-parallel over z: each worker owns whole z-slices, accumulation
    // order over angles is fixed.
    parallel_for(nz, [&](std::size_t z_begin, std::size_t z_end) {
        std::vector<double> slab(ny * nx);
        for (std::size_t z = z_begin; z < z_end; ++z) {
            std::fill(slab.begin(), slab.end(), 0.0);
            for (std::size_t t = 0; t < sorted.size(); ++t) {
                const ScalarField& p = projections[t];
                const double theta = sorted.tilts[t].angle_deg * std::numbers::pi / 180.0;
                const double c = std::cos(theta), s = std::sin(theta);
                const double zs = (static_cast<double>(z) - cz) * s + cu;
                for (std::size_t y = 0; y < ny; ++y) {
                    // Projection rows are centered on the volume's y range.
                    const double yp = static_cast<double>(y) - cy + cpy;
                    const std::size_t row = static_cast<std::size_t>(std::llround(yp));
                    const float* prow = p.data.data() + row * px;
                    double* srow = slab.data() + y * nx;
                    for (std::size_t x = 0; x < nx; ++x) {
                        double u = (static_cast<double>(x) - cx) * c + zs;
                        double fl = std::floor(u);
                        long u0 = static_cast<long>(fl);
                        double w = u - fl;
                        double v = 0.0;
                        if (u0 >= 0 && u0 < static_cast<long>(px)) v += prow[u0] * (1.0 - w);
                        if (u0 + 1 >= 0 && u0 + 1 < static_cast<long>(px))
                            v += prow[u0 + 1] * w;
                        srow[x] += v;
                    }
                }
            }
            float* vslice = vol.data.data() + z * ny * nx;
            for (std::size_t i = 0; i < slab.size(); ++i)
                vslice[i] = static_cast<float>(slab[i] * scale);
        }
    });

    return vol;
}

std::pair<ScalarField, ScalarField> reconstruct_pair(const HalfSeries& half,
                                                     const std::vector<std::size_t>& out_shape,
                                                     RampWindow window) {
    require(!half.a.tilts.empty() && !half.b.tilts.empty(),
            "reconstruct_pair: both halves must be nonempty");
    ScalarField ra = backproject(half.a, out_shape, true, window);
    ScalarField rb = backproject(half.b, out_shape, true, window);
    return {std::move(ra), std::move(rb)};
}

} // namespace tomopair
