#include "tomopair/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "tomopair/parallel.hpp"

namespace tomopair {

namespace {

long clamp_idx(long v, long hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); }

double median_of(std::vector<float>& scratch) {
    std::size_t mid = scratch.size() / 2;
    std::nth_element(scratch.begin(), scratch.begin() + mid, scratch.end());
    if (scratch.size() % 2 == 1) return scratch[mid];
    float hi = scratch[mid];
    float lo = *std::max_element(scratch.begin(), scratch.begin() + mid);
    return 0.5 * (static_cast<double>(lo) + static_cast<double>(hi));
}

} // namespace

ScalarField median_filter(const ScalarField& f, const std::vector<std::size_t>& radius) {
    require(radius.size() == f.ndim(), "median_filter: radius rank mismatch");
    ScalarField out(f.shape);
    out.voxel_size = f.voxel_size;

    if (f.ndim() == 2) {
        const long ny = static_cast<long>(f.shape[0]), nx = static_cast<long>(f.shape[1]);
        const long ry = static_cast<long>(radius[0]), rx = static_cast<long>(radius[1]);
        parallel_for(f.shape[0], [&](std::size_t y_begin, std::size_t y_end) {
            std::vector<float> window;
            window.reserve((2 * ry + 1) * (2 * rx + 1));
            for (std::size_t y = y_begin; y < y_end; ++y)
                for (long x = 0; x < nx; ++x) {
                    window.clear();
                    for (long dy = -ry; dy <= ry; ++dy)
                        for (long dx = -rx; dx <= rx; ++dx)
                            window.push_back(f.at2(clamp_idx(static_cast<long>(y) + dy, ny),
                                                   clamp_idx(x + dx, nx)));
                    out.at2(y, x) = static_cast<float>(median_of(window));
                }
        });
    } else {
        const long nz = static_cast<long>(f.shape[0]), ny = static_cast<long>(f.shape[1]),
                   nx = static_cast<long>(f.shape[2]);
        const long rz = static_cast<long>(radius[0]), ry = static_cast<long>(radius[1]),
                   rx = static_cast<long>(radius[2]);
        parallel_for(f.shape[0], [&](std::size_t z_begin, std::size_t z_end) {
            std::vector<float> window;
            window.reserve((2 * rz + 1) * (2 * ry + 1) * (2 * rx + 1));
            for (std::size_t z = z_begin; z < z_end; ++z)
                for (long y = 0; y < ny; ++y)
                    for (long x = 0; x < nx; ++x) {
                        window.clear();
                        for (long dz = -rz; dz <= rz; ++dz)
                            for (long dy = -ry; dy <= ry; ++dy)
                                for (long dx = -rx; dx <= rx; ++dx)
                                    window.push_back(
                                        f.at3(clamp_idx(static_cast<long>(z) + dz, nz),
                                              clamp_idx(y + dy, ny), clamp_idx(x + dx, nx)));
                        out.at3(z, y, x) = static_cast<float>(median_of(window));
                    }
        });
    }
    return out;
}

ScalarField median_filter(const ScalarField& f, std::size_t radius) {
    return median_filter(f, std::vector<std::size_t>(f.ndim(), radius));
}

namespace {

// Forward-difference gradient magnitude per voxel (zero at the far edges).
std::vector<double> gradient_magnitude(const ScalarField& f) {
    std::vector<double> mag(f.size(), 0.0);
    const std::size_t nd = f.ndim();
    if (nd == 2) {
        const std::size_t ny = f.shape[0], nx = f.shape[1];
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                double gy = y + 1 < ny ? f.at2(y + 1, x) - f.at2(y, x) : 0.0;
                double gx = x + 1 < nx ? f.at2(y, x + 1) - f.at2(y, x) : 0.0;
                mag[f.idx2(y, x)] = std::sqrt(gy * gy + gx * gx);
            }
    } else {
        const std::size_t nz = f.shape[0], ny = f.shape[1], nx = f.shape[2];
        for (std::size_t z = 0; z < nz; ++z)
            for (std::size_t y = 0; y < ny; ++y)
                for (std::size_t x = 0; x < nx; ++x) {
                    double gz = z + 1 < nz ? f.at3(z + 1, y, x) - f.at3(z, y, x) : 0.0;
                    double gy = y + 1 < ny ? f.at3(z, y + 1, x) - f.at3(z, y, x) : 0.0;
                    double gx = x + 1 < nx ? f.at3(z, y, x + 1) - f.at3(z, y, x) : 0.0;
                    mag[f.idx3(z, y, x)] = std::sqrt(gz * gz + gy * gy + gx * gx);
                }
    }
    return mag;
}

double median_inplace(std::vector<double>& v) {
    std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    return v[mid];
}

} // namespace

double nad_default_lambda(const ScalarField& f) {
    std::vector<double> mag = gradient_magnitude(f);
    std::vector<double> tmp = mag;
    double med = median_inplace(tmp);
    for (std::size_t i = 0; i < mag.size(); ++i) tmp[i] = std::abs(mag[i] - med);
    double mad = median_inplace(tmp);
    double lambda = 1.4826 * mad;
    return lambda > 0 ? lambda : 1e-6;
}

ScalarField nad_filter(const ScalarField& f, std::size_t steps, double dt, double lambda) {
    const double d = static_cast<double>(f.ndim());
    require(dt > 0 && dt <= 1.0 / (2.0 * d) + 1e-12,
            "nad_filter: dt exceeds the explicit stability bound 1/(2d)");
    if (lambda <= 0) lambda = nad_default_lambda(f);
    f.require_finite("nad_filter");

    const double inv_l2 = 1.0 / (lambda * lambda);
    auto g = [inv_l2](double s) { return 1.0 / (1.0 + s * s * inv_l2); };

    std::vector<double> cur(f.data.begin(), f.data.end());
    std::vector<double> next(f.size());

    for (std::size_t step = 0; step < steps; ++step) {
        if (f.ndim() == 2) {
            const long ny = static_cast<long>(f.shape[0]), nx = static_cast<long>(f.shape[1]);
            auto u = [&](long y, long x) { return cur[static_cast<std::size_t>(y) * nx + x]; };
            parallel_for(f.shape[0], [&](std::size_t y_begin, std::size_t y_end) {
                for (std::size_t yy = y_begin; yy < y_end; ++yy) {
                    long y = static_cast<long>(yy);
                    for (long x = 0; x < nx; ++x) {
                        double u0 = u(y, x);
                        double div = 0.0;
                        if (y + 1 < ny) { double s = u(y + 1, x) - u0; div += g(std::abs(s)) * s; }
                        if (y > 0)      { double s = u(y - 1, x) - u0; div += g(std::abs(s)) * s; }
                        if (x + 1 < nx) { double s = u(y, x + 1) - u0; div += g(std::abs(s)) * s; }
                        if (x > 0)      { double s = u(y, x - 1) - u0; div += g(std::abs(s)) * s; }
                        next[static_cast<std::size_t>(y) * nx + x] = u0 + dt * div;
                    }
                }
            });
        } else {
            const long nz = static_cast<long>(f.shape[0]), ny = static_cast<long>(f.shape[1]),
                       nx = static_cast<long>(f.shape[2]);
            auto u = [&](long z, long y, long x) {
                return cur[(static_cast<std::size_t>(z) * ny + y) * nx + x];
            };
            parallel_for(f.shape[0], [&](std::size_t z_begin, std::size_t z_end) {
                for (std::size_t zz = z_begin; zz < z_end; ++zz) {
                    long z = static_cast<long>(zz);
                    for (long y = 0; y < ny; ++y)
                        for (long x = 0; x < nx; ++x) {
                            double u0 = u(z, y, x);
                            double div = 0.0;
                            if (z + 1 < nz) { double s = u(z + 1, y, x) - u0; div += g(std::abs(s)) * s; }
                            if (z > 0)      { double s = u(z - 1, y, x) - u0; div += g(std::abs(s)) * s; }
                            if (y + 1 < ny) { double s = u(z, y + 1, x) - u0; div += g(std::abs(s)) * s; }
                            if (y > 0)      { double s = u(z, y - 1, x) - u0; div += g(std::abs(s)) * s; }
                            if (x + 1 < nx) { double s = u(z, y, x + 1) - u0; div += g(std::abs(s)) * s; }
                            if (x > 0)      { double s = u(z, y, x - 1) - u0; div += g(std::abs(s)) * s; }
                            next[(static_cast<std::size_t>(z) * ny + y) * nx + x] = u0 + dt * div;
                        }
                }
            });
        }
        cur.swap(next);
    }

    ScalarField out(f.shape);
    out.voxel_size = f.voxel_size;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = static_cast<float>(cur[i]);
    return out;
}

} // namespace tomopair
