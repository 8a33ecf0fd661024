#include "tomopair/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tomopair/parallel.hpp"

namespace tomopair {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Vec3 {
    double z, y, x;
};

double dot(const Vec3& a, const Vec3& b) { return a.z * b.z + a.y * b.y + a.x * b.x; }

Vec3 random_unit(Rng& rng) {
    for (;;) {
        Vec3 v{rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0};
        double n2 = dot(v, v);
        if (n2 > 1e-6 && n2 <= 1.0) {
            double inv = 1.0 / std::sqrt(n2);
            return {v.z * inv, v.y * inv, v.x * inv};
        }
    }
}

} // namespace

std::vector<double> default_tilt_angles(double max_angle_deg, double step_deg) {
    require(max_angle_deg > 0 && max_angle_deg < 90, "tilt range must lie within (0, 90)");
    require(step_deg > 0, "tilt step must be positive");
    std::vector<double> angles;
    for (double a = -max_angle_deg; a <= max_angle_deg + 1e-9; a += step_deg)
        angles.push_back(a);
    return angles;
}

Phantom make_phantom(const PhantomSpec& spec) {
    require(spec.shape.size() == 3, "make_phantom: shape must be 3D");
    require(spec.blob_radius_min > 0 && spec.blob_radius_max >= spec.blob_radius_min,
            "make_phantom: invalid blob radius range");
    const double nz = static_cast<double>(spec.shape[0]);
    const double ny = static_cast<double>(spec.shape[1]);
    const double nx = static_cast<double>(spec.shape[2]);
    require(2.0 * spec.blob_radius_max + 2.0 < std::min({nz, ny, nx}),
            "make_phantom: shape too small for requested blob radii");

    Phantom p;
    p.density = ScalarField(spec.shape, spec.density_background);
    p.labels = LabelField(spec.shape, 0);

    Rng rng(spec.seed);
    Rng membrane_rng = rng.derive(1);
    Rng filament_rng = rng.derive(2);
    Rng blob_rng = rng.derive(3);

    auto paint = [&](std::size_t z, std::size_t y, std::size_t x, float level) {
        float& d = p.density.at3(z, y, x);
        d = std::max(d, level);
    };

    // Membranes: spherical shells with centers possibly outside the volume,
    // so the visible part looks like a curved sheet.
    for (std::size_t m = 0; m < spec.n_membranes; ++m) {
        double extent = std::max({nz, ny, nx});
        Vec3 c{nz * (membrane_rng.uniform() * 2.0 - 0.5),
               ny * (membrane_rng.uniform() * 2.0 - 0.5),
               nx * (membrane_rng.uniform() * 2.0 - 0.5)};
        double radius = extent * (0.4 + 0.8 * membrane_rng.uniform());
        double half_thick = 0.8 + 0.7 * membrane_rng.uniform();
        for (std::size_t z = 0; z < spec.shape[0]; ++z)
            for (std::size_t y = 0; y < spec.shape[1]; ++y)
                for (std::size_t x = 0; x < spec.shape[2]; ++x) {
                    double dz = z - c.z, dy = y - c.y, dx = x - c.x;
                    double r = std::sqrt(dz * dz + dy * dy + dx * dx);
                    if (std::abs(r - radius) <= half_thick)
                        paint(z, y, x, spec.density_membrane);
                }
    }

    // Filaments: straight cylinders through the volume interior.
    for (std::size_t f = 0; f < spec.n_filaments; ++f) {
        Vec3 p0{nz * (0.2 + 0.6 * filament_rng.uniform()),
                ny * (0.2 + 0.6 * filament_rng.uniform()),
                nx * (0.2 + 0.6 * filament_rng.uniform())};
        Vec3 dir = random_unit(filament_rng);
        double radius = 1.2 + 1.0 * filament_rng.uniform();
        double r2 = radius * radius;
        for (std::size_t z = 0; z < spec.shape[0]; ++z)
            for (std::size_t y = 0; y < spec.shape[1]; ++y)
                for (std::size_t x = 0; x < spec.shape[2]; ++x) {
                    Vec3 d{z - p0.z, y - p0.y, x - p0.x};
                    double along = dot(d, dir);
                    double perp2 = dot(d, d) - along * along;
                    if (perp2 <= r2) paint(z, y, x, spec.density_filament);
                }
    }

    // Blobs: pairwise disjoint spheres, labeled 1..K.
    struct Blob {
        Vec3 c;
        double r;
    };
    std::vector<Blob> blobs;
    blobs.reserve(spec.n_blobs);
    const std::size_t max_attempts = 1000 * std::max<std::size_t>(spec.n_blobs, 1);
    std::size_t attempts = 0;
    while (blobs.size() < spec.n_blobs) {
        if (++attempts > max_attempts)
            throw DegenerateInputError(
                "make_phantom: could not place non-overlapping blobs within bounded retries");
        double r = spec.blob_radius_min +
                   (spec.blob_radius_max - spec.blob_radius_min) * blob_rng.uniform();
        double margin = r + 1.0;
        Vec3 c{margin + (nz - 2.0 * margin) * blob_rng.uniform(),
               margin + (ny - 2.0 * margin) * blob_rng.uniform(),
               margin + (nx - 2.0 * margin) * blob_rng.uniform()};
        bool ok = true;
        for (const Blob& b : blobs) {
            Vec3 d{c.z - b.c.z, c.y - b.c.y, c.x - b.c.x};
            double min_dist = r + b.r + 1.0;
            if (dot(d, d) < min_dist * min_dist) {
                ok = false;
                break;
            }
        }
        if (ok) blobs.push_back({c, r});
    }

    for (std::size_t k = 0; k < blobs.size(); ++k) {
        const Blob& b = blobs[k];
        double r2 = b.r * b.r;
        std::size_t z0 = static_cast<std::size_t>(std::max(0.0, std::floor(b.c.z - b.r)));
        std::size_t z1 = static_cast<std::size_t>(std::min(nz - 1, std::ceil(b.c.z + b.r)));
        std::size_t y0 = static_cast<std::size_t>(std::max(0.0, std::floor(b.c.y - b.r)));
        std::size_t y1 = static_cast<std::size_t>(std::min(ny - 1, std::ceil(b.c.y + b.r)));
        std::size_t x0 = static_cast<std::size_t>(std::max(0.0, std::floor(b.c.x - b.r)));
        std::size_t x1 = static_cast<std::size_t>(std::min(nx - 1, std::ceil(b.c.x + b.r)));
        for (std::size_t z = z0; z <= z1; ++z)
            for (std::size_t y = y0; y <= y1; ++y)
                for (std::size_t x = x0; x <= x1; ++x) {
                    Vec3 d{z - b.c.z, y - b.c.y, x - b.c.x};
                    if (dot(d, d) <= r2) {
                        paint(z, y, x, spec.density_blob);
                        p.labels.at3(z, y, x) = static_cast<std::int32_t>(k + 1);
                    }
                }
    }

    return p;
}

ScalarField project(const ScalarField& volume, double angle_deg) {
    require(volume.ndim() == 3, "project: volume must be 3D");
    require(std::abs(angle_deg) < 90.0, "project: |angle| must be < 90 degrees");

    const std::size_t nz = volume.shape[0], ny = volume.shape[1], nx = volume.shape[2];
    const double cz = 0.5 * static_cast<double>(nz - 1);
    const double cx = 0.5 * static_cast<double>(nx - 1);
    const double theta = angle_deg * kDegToRad;
    const double c = std::cos(theta), s = std::sin(theta);

    ScalarField out({ny, nx}, 0.0f);
    out.voxel_size = {volume.voxel_size[1], volume.voxel_size[2]};

    // Voxel-driven splat: each voxel deposits its value at its rotated
    // detector coordinate with linear weights, which keeps the projection
    // exactly linear and mass-preserving for content inside the detector.
    std::vector<double> acc(ny * nx, 0.0);
    for (std::size_t z = 0; z < nz; ++z) {
        const double zs = (static_cast<double>(z) - cz) * s;
        for (std::size_t y = 0; y < ny; ++y) {
            const float* row = volume.data.data() + (z * ny + y) * nx;
            double* arow = acc.data() + y * nx;
            for (std::size_t x = 0; x < nx; ++x) {
                float v = row[x];
                if (v == 0.0f) continue;
                double u = (static_cast<double>(x) - cx) * c + zs + cx;
                double fl = std::floor(u);
                long x0 = static_cast<long>(fl);
                double w1 = u - fl;
                if (x0 >= 0 && x0 < static_cast<long>(nx)) arow[x0] += v * (1.0 - w1);
                if (x0 + 1 >= 0 && x0 + 1 < static_cast<long>(nx)) arow[x0 + 1] += v * w1;
            }
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i]);
    return out;
}

std::vector<ScalarField> clean_projections(const ScalarField& volume,
                                           const AcquisitionSpec& acq) {
    require(!acq.angles_deg.empty(), "acquisition needs at least one tilt angle");
    for (double a : acq.angles_deg)
        require(std::abs(a) < 90.0, "tilt angles must lie strictly within (-90, +90)");
    std::vector<ScalarField> clean(acq.angles_deg.size());
    parallel_for_each(acq.angles_deg.size(),
                      [&](std::size_t t) { clean[t] = project(volume, acq.angles_deg[t]); });
    return clean;
}

ScalarField shift_image(const ScalarField& f, double dy, double dx) {
    require(f.ndim() == 2, "shift_image: field must be 2D");
    const long ny = static_cast<long>(f.shape[0]), nx = static_cast<long>(f.shape[1]);
    ScalarField out(f.shape);
    out.voxel_size = f.voxel_size;
    auto clamp = [](long v, long hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); };
    for (long y = 0; y < ny; ++y) {
        double sy = static_cast<double>(y) - dy;
        long y0 = static_cast<long>(std::floor(sy));
        double wy = sy - std::floor(sy);
        long ya = clamp(y0, ny), yb = clamp(y0 + 1, ny);
        for (long x = 0; x < nx; ++x) {
            double sx = static_cast<double>(x) - dx;
            long x0 = static_cast<long>(std::floor(sx));
            double wx = sx - std::floor(sx);
            long xa = clamp(x0, nx), xb = clamp(x0 + 1, nx);
            double v = (1.0 - wy) * ((1.0 - wx) * f.at2(ya, xa) + wx * f.at2(ya, xb)) +
                       wy * ((1.0 - wx) * f.at2(yb, xa) + wx * f.at2(yb, xb));
            out.at2(y, x) = static_cast<float>(v);
        }
    }
    return out;
}

MovieTiltSeries simulate_acquisition(const Phantom& phantom, const AcquisitionSpec& acq) {
    require(acq.electrons_per_pixel_per_frame > 0, "simulate_acquisition: dose must be positive");
    require(acq.frames_per_tilt >= 1, "simulate_acquisition: frames_per_tilt must be >= 1");

    std::vector<ScalarField> clean = clean_projections(phantom.density, acq);

    // Scale so the brightest projection pixel of the series receives exactly
    // the per-frame dose; relative intensities across tilts are preserved.
    double peak = 0.0;
    for (const ScalarField& c : clean) peak = std::max<double>(peak, c.max());
    if (!(peak > 0.0))
        throw DegenerateInputError("simulate_acquisition: phantom projects to no positive signal");
    const double dose_scale = acq.electrons_per_pixel_per_frame / peak;

    MovieTiltSeries series;
    series.tilts.resize(acq.angles_deg.size());
    Rng root(acq.seed);

    parallel_for_each(acq.angles_deg.size(), [&](std::size_t t) {
        MovieTilt tilt;
        tilt.angle_deg = acq.angles_deg[t];
        tilt.acquisition_index = t;
        tilt.frames.reserve(acq.frames_per_tilt);
        Rng tilt_rng = root.derive(t);
        for (std::size_t k = 0; k < acq.frames_per_tilt; ++k) {
            ScalarField base = clean[t];
            double dy = static_cast<double>(k) * acq.drift_per_frame_y;
            double dx = static_cast<double>(k) * acq.drift_per_frame_x;
            if (dy != 0.0 || dx != 0.0) base = shift_image(base, dy, dx);
            Rng frame_rng = tilt_rng.derive(k);
            ScalarField frame(base.shape);
            frame.voxel_size = base.voxel_size;
            for (std::size_t i = 0; i < base.size(); ++i) {
                double lambda = std::max(0.0, static_cast<double>(base.data[i]) * dose_scale);
                double counts = static_cast<double>(frame_rng.poisson(lambda));
                if (acq.gaussian_readout_sigma > 0)
                    counts += acq.gaussian_readout_sigma * frame_rng.normal();
                frame.data[i] = static_cast<float>(counts);
            }
            tilt.frames.push_back(std::move(frame));
        }
        series.tilts[t] = std::move(tilt);
    });

    return series;
}

void validate_series(const MovieTiltSeries& series) {
    require(!series.tilts.empty(), "tilt series is empty");
    const std::vector<std::size_t>& shape = series.tilts.front().frames.at(0).shape;
    std::vector<bool> seen(series.tilts.size(), false);
    for (const MovieTilt& t : series.tilts) {
        require(!t.frames.empty(), "tilt has no frames");
        for (const ScalarField& f : t.frames)
            require(f.shape == shape, "frames must share one shape");
        require(t.acquisition_index < series.tilts.size() && !seen[t.acquisition_index],
                "acquisition indices must form a permutation of 0..n-1");
        seen[t.acquisition_index] = true;
    }
}

} // namespace tomopair
