#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "tomopair/pairing.hpp"
#include "tomopair/phantom.hpp"

using namespace tomopair;

namespace {

// Smooth test image with enough structure for correlation peaks.
ScalarField smooth_image(std::size_t ny, std::size_t nx, std::uint64_t seed) {
    ScalarField img({ny, nx});
    Rng rng(seed);
    for (int blob = 0; blob < 12; ++blob) {
        double cy = rng.uniform() * static_cast<double>(ny);
        double cx = rng.uniform() * static_cast<double>(nx);
        double s = 2.0 + rng.uniform() * 4.0;
        double amp = 0.5 + rng.uniform();
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                img.at2(y, x) += static_cast<float>(amp * std::exp(-d2 / (2 * s * s)));
            }
    }
    return img;
}

ScalarField circshift(const ScalarField& f, long dy, long dx) {
    const long ny = static_cast<long>(f.shape[0]), nx = static_cast<long>(f.shape[1]);
    ScalarField out(f.shape);
    for (long y = 0; y < ny; ++y)
        for (long x = 0; x < nx; ++x) {
            long sy = ((y - dy) % ny + ny) % ny;
            long sx = ((x - dx) % nx + nx) % nx;
            out.at2(y, x) = f.at2(sy, sx);
        }
    return out;
}

std::vector<ScalarField> integer_frames(std::size_t n, float base) {
    std::vector<ScalarField> frames;
    for (std::size_t k = 0; k < n; ++k) {
        ScalarField f({4, 4});
        for (std::size_t i = 0; i < f.size(); ++i)
            f.data[i] = base + static_cast<float>(k * 16 + i);
        frames.push_back(std::move(f));
    }
    return frames;
}

} // namespace

TEST_CASE("align: already aligned frames recover zero shifts") {
    ScalarField img = smooth_image(48, 48, 1);
    std::vector<ScalarField> frames = {img, img, img};
    FrameAlignment a = align_frames(frames);
    for (const auto& s : a.shifts) {
        CHECK(std::abs(s[0]) < 0.25);
        CHECK(std::abs(s[1]) < 0.25);
    }
}

TEST_CASE("align: constructed integer shift recovered exactly") {
    ScalarField img = smooth_image(64, 64, 2);
    std::vector<ScalarField> frames = {img, circshift(img, 3, -2)};
    FrameAlignment a = align_frames(frames);
    CHECK(std::llround(a.shifts[1][0]) == 3);
    CHECK(std::llround(a.shifts[1][1]) == -2);
    CHECK(std::llround(a.shifts[0][0]) == 0);
}

TEST_CASE("align: drifting noisy stack within half a pixel on average") {
    PhantomSpec spec;
    spec.shape = {24, 64, 64};
    spec.n_membranes = 1;
    spec.n_filaments = 2;
    spec.n_blobs = 8;
    spec.blob_radius_min = 2.0;
    spec.blob_radius_max = 4.0;
    spec.seed = 3;
    Phantom ph = make_phantom(spec);

    AcquisitionSpec acq;
    acq.angles_deg = {0};
    acq.frames_per_tilt = 8;
    acq.electrons_per_pixel_per_frame = 30.0;
    acq.gaussian_readout_sigma = 0.5;
    acq.drift_per_frame_y = 0.5;
    acq.drift_per_frame_x = -0.3;
    acq.seed = 17;
    MovieTiltSeries s = simulate_acquisition(ph, acq);

    FrameAlignment a = align_frames(s.tilts[0].frames);
    // Ground truth: frame k displaced by k * drift relative to frame 0.
    double err = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
        err += std::abs(a.shifts[k][0] - 0.5 * static_cast<double>(k));
        err += std::abs(a.shifts[k][1] + 0.3 * static_cast<double>(k));
    }
    err /= 16.0;
    CHECK(err < 0.5);
}

TEST_CASE("align: fewer than two frames rejected") {
    std::vector<ScalarField> one = {ScalarField({4, 4}, 1.0f)};
    CHECK_THROWS_AS(align_frames(one), PreconditionError);
}

TEST_CASE("split_halves: four frames") {
    auto frames = integer_frames(4, 0.0f);
    ProjectionPair p = split_halves(frames);
    for (std::size_t i = 0; i < p.a.size(); ++i) {
        CHECK(p.a.data[i] == (frames[0].data[i] + frames[1].data[i]) / 2.0f);
        CHECK(p.b.data[i] == (frames[2].data[i] + frames[3].data[i]) / 2.0f);
    }
}

TEST_CASE("split_halves: three frames use the floor split") {
    auto frames = integer_frames(3, 0.0f);
    ProjectionPair p = split_halves(frames);
    for (std::size_t i = 0; i < p.a.size(); ++i) {
        CHECK(p.a.data[i] == frames[0].data[i]);
        CHECK(p.b.data[i] == (frames[1].data[i] + frames[2].data[i]) / 2.0f);
    }
}

TEST_CASE("split_halves: constant frames stay constant") {
    std::vector<ScalarField> frames(4, ScalarField({3, 3}, 7.0f));
    ProjectionPair p = split_halves(frames);
    for (float v : p.a.data) CHECK(v == 7.0f);
    for (float v : p.b.data) CHECK(v == 7.0f);
}

TEST_CASE("split_halves: weighted mean of halves equals the stack mean") {
    auto frames = integer_frames(5, 2.0f);
    ProjectionPair p = split_halves(frames);
    const double na = 2, nb = 3, n = 5;
    for (std::size_t i = 0; i < p.a.size(); ++i) {
        double stack_mean = 0.0;
        for (const auto& f : frames) stack_mean += f.data[i];
        stack_mean /= n;
        CHECK((na * p.a.data[i] + nb * p.b.data[i]) / n == doctest::Approx(stack_mean));
    }
}

TEST_CASE("split_even_odd: four frames") {
    auto frames = integer_frames(4, 0.0f);
    ProjectionPair p = split_even_odd(frames);
    for (std::size_t i = 0; i < p.a.size(); ++i) {
        CHECK(p.a.data[i] == frames[0].data[i] + frames[2].data[i]);
        CHECK(p.b.data[i] == frames[1].data[i] + frames[3].data[i]);
    }
}

TEST_CASE("split_even_odd: odd frame count and exact sum conservation") {
    auto frames = integer_frames(5, 1.0f);
    ProjectionPair p = split_even_odd(frames);
    for (std::size_t i = 0; i < p.a.size(); ++i) {
        float total = 0.0f;
        for (const auto& f : frames) total += f.data[i];
        CHECK(p.a.data[i] + p.b.data[i] == total); // integer-valued, exact
    }
}

TEST_CASE("split_even_odd: interleaving balances a linear dose ramp") {
    // Frames carry a linearly growing intensity; even/odd summand means stay
    // equal while the half split does not.
    std::vector<ScalarField> frames;
    for (int k = 0; k < 5; ++k)
        frames.emplace_back(std::vector<std::size_t>{8, 8},
                            static_cast<float>(1.0 + 0.1 * k));
    ProjectionPair eo = split_even_odd(frames);
    ProjectionPair half = split_halves(frames);
    double eo_gap = std::abs(eo.a.data[0] / 3.0 - eo.b.data[0] / 2.0);
    double half_gap = std::abs(half.a.data[0] - half.b.data[0]);
    CHECK(eo_gap < half_gap);
    CHECK(eo_gap < 1e-7);
}

TEST_CASE("pair_adjacent_tilts: n tilts give n-1 pairs with provenance") {
    TiltSeries series;
    series.tilts = {{-60, ScalarField({4, 4}, 0.0f), 0},
                    {-58, ScalarField({4, 4}, 1.0f), 1},
                    {-56, ScalarField({4, 4}, 2.0f), 2}};
    auto pairs = pair_adjacent_tilts(series);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].tilt_a == 0);
    CHECK(pairs[0].tilt_b == 1);
    CHECK(pairs[1].tilt_a == 1);
    CHECK(pairs[1].tilt_b == 2);
    CHECK(pairs[0].scheme == "p2p-tap");
}

TEST_CASE("pair_adjacent_tilts: 61 tilts give 60 pairs") {
    TiltSeries series;
    for (int i = 0; i < 61; ++i)
        series.tilts.push_back(
            {-60.0 + 2.0 * i, ScalarField({2, 2}, static_cast<float>(i)), std::size_t(i)});
    CHECK(pair_adjacent_tilts(series).size() == 60);
}

TEST_CASE("eoa split: parity of acquisition index decides the half") {
    TiltSeries series;
    for (int i = 0; i < 6; ++i)
        series.tilts.push_back(
            {-60.0 + 20.0 * i, ScalarField({2, 2}, static_cast<float>(i)), std::size_t(i)});
    HalfSeries h = split_series_even_odd_acquisition(series);
    REQUIRE(h.a.size() == 3);
    REQUIRE(h.b.size() == 3);
    for (const auto& t : h.a.tilts) CHECK(t.acquisition_index % 2 == 0);
    for (const auto& t : h.b.tilts) CHECK(t.acquisition_index % 2 == 1);
}

TEST_CASE("eoa split: follows acquisition order, not angle order") {
    // Dose-symmetric-style ordering: acquisition hops around zero.
    std::vector<double> angles = {0, 20, -20, 40, -40, 60};
    TiltSeries series;
    for (std::size_t i = 0; i < angles.size(); ++i)
        series.tilts.push_back(
            {angles[i], ScalarField({2, 2}, static_cast<float>(i)), i});
    HalfSeries h = split_series_even_odd_acquisition(series);
    std::set<double> a_angles, b_angles;
    for (const auto& t : h.a.tilts) a_angles.insert(t.angle_deg);
    for (const auto& t : h.b.tilts) b_angles.insert(t.angle_deg);
    CHECK(a_angles == std::set<double>{0, -20, -40});
    CHECK(b_angles == std::set<double>{20, 40, 60});

    // union covers the series, intersection empty
    std::set<double> all = a_angles;
    all.insert(b_angles.begin(), b_angles.end());
    CHECK(all.size() == 6);
    // halves sorted by angle
    for (std::size_t i = 1; i < h.a.tilts.size(); ++i)
        CHECK(h.a.tilts[i].angle_deg > h.a.tilts[i - 1].angle_deg);
}

TEST_CASE("eoa split: duplicate acquisition indices rejected") {
    TiltSeries series;
    series.tilts = {{-10, ScalarField({2, 2}, 0.0f), 0}, {10, ScalarField({2, 2}, 1.0f), 0}};
    CHECK_THROWS_AS(split_series_even_odd_acquisition(series), PreconditionError);
}

TEST_CASE("df split: both half series carry the full angle list") {
    MovieTiltSeries movie;
    for (std::size_t t = 0; t < 41; ++t) {
        MovieTilt tilt;
        tilt.angle_deg = -60.0 + 3.0 * static_cast<double>(t);
        tilt.acquisition_index = t;
        ScalarField img = smooth_image(16, 16, 100 + t);
        tilt.frames = {img, img, img, img};
        movie.tilts.push_back(std::move(tilt));
    }
    HalfSeries h = split_series_frames(movie);
    REQUIRE(h.a.size() == 41);
    REQUIRE(h.b.size() == 41);
    CHECK(h.a.angles() == h.b.angles());
    CHECK(h.kind == HalfSplit::DoseFraction);
}

TEST_CASE("df split: every tilt needs at least two frames") {
    MovieTiltSeries movie;
    MovieTilt tilt;
    tilt.frames = {ScalarField({4, 4}, 1.0f)};
    movie.tilts.push_back(tilt);
    CHECK_THROWS_AS(split_series_frames(movie), PreconditionError);
}

TEST_CASE("df split: half residuals uncorrelated on simulated data") {
    PhantomSpec spec;
    spec.shape = {24, 256, 512};
    spec.n_membranes = 1;
    spec.n_filaments = 2;
    spec.n_blobs = 20;
    spec.seed = 19;
    Phantom ph = make_phantom(spec);

    AcquisitionSpec acq;
    acq.angles_deg = {0};
    acq.frames_per_tilt = 4;
    acq.electrons_per_pixel_per_frame = 10.0;
    acq.gaussian_readout_sigma = 0.5;
    acq.seed = 23;
    MovieTiltSeries s = simulate_acquisition(ph, acq);
    HalfSeries h = split_series_frames(s);

    ScalarField clean = project(ph.density, 0.0);
    double peak = clean.max();
    const ScalarField& a = h.a.tilts[0].projection;
    const ScalarField& b = h.b.tilts[0].projection;
    REQUIRE(a.size() >= 100000);

    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    const double n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        double lambda2 = 2.0 * std::max(0.0, clean.data[i] / peak * 10.0); // two frames per half
        double ra = a.data[i] - lambda2, rb = b.data[i] - lambda2;
        sa += ra;
        sb += rb;
        saa += ra * ra;
        sbb += rb * rb;
        sab += ra * rb;
    }
    double cov = sab / n - (sa / n) * (sb / n);
    double rho = cov / std::sqrt((saa / n - (sa / n) * (sa / n)) *
                                 (sbb / n - (sb / n) * (sb / n)));
    CHECK(std::abs(rho) < 0.02);
}

TEST_CASE("sum_aligned_series: sums all frames per tilt, sorted by angle") {
    MovieTiltSeries movie;
    for (std::size_t t = 0; t < 3; ++t) {
        MovieTilt tilt;
        tilt.angle_deg = 20.0 - 10.0 * static_cast<double>(t); // descending on purpose
        tilt.acquisition_index = t;
        tilt.frames = {ScalarField({4, 4}, 1.0f), ScalarField({4, 4}, 2.0f)};
        movie.tilts.push_back(std::move(tilt));
    }
    TiltSeries s = sum_aligned_series(movie);
    REQUIRE(s.size() == 3);
    CHECK(s.tilts[0].angle_deg == doctest::Approx(0.0));
    CHECK(s.tilts[2].angle_deg == doctest::Approx(20.0));
    for (float v : s.tilts[0].projection.data) CHECK(v == doctest::Approx(3.0f));
}
