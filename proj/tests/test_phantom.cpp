#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "tomopair/phantom.hpp"

using namespace tomopair;

namespace {

PhantomSpec small_spec() {
    PhantomSpec spec;
    spec.shape = {24, 32, 32};
    spec.n_membranes = 1;
    spec.n_filaments = 1;
    spec.n_blobs = 5;
    spec.blob_radius_min = 2.0;
    spec.blob_radius_max = 3.0;
    spec.seed = 11;
    return spec;
}

} // namespace

TEST_CASE("phantom: zero blobs leaves labels empty") {
    PhantomSpec spec = small_spec();
    spec.n_blobs = 0;
    Phantom p = make_phantom(spec);
    for (std::int32_t l : p.labels.data) CHECK(l == 0);
}

TEST_CASE("phantom: blob ids are exactly 1..K with nonempty supports") {
    Phantom p = make_phantom(small_spec());
    std::set<std::int32_t> ids;
    for (std::int32_t l : p.labels.data)
        if (l != 0) ids.insert(l);
    CHECK(ids == std::set<std::int32_t>{1, 2, 3, 4, 5});
    // labeled voxels carry the blob density
    for (std::size_t i = 0; i < p.labels.size(); ++i)
        if (p.labels.data[i] != 0) CHECK(p.density.data[i] == doctest::Approx(1.0f));
}

TEST_CASE("phantom: deterministic in seed") {
    Phantom a = make_phantom(small_spec());
    Phantom b = make_phantom(small_spec());
    CHECK(a.density.data == b.density.data);
    CHECK(a.labels.data == b.labels.data);
}

TEST_CASE("phantom: impossible packing reports an error") {
    PhantomSpec spec = small_spec();
    spec.shape = {16, 16, 16};
    spec.n_blobs = 200;
    spec.blob_radius_min = spec.blob_radius_max = 3.0;
    CHECK_THROWS_AS(make_phantom(spec), DegenerateInputError);
}

TEST_CASE("project: constant cube at angle 0 gives thickness everywhere") {
    ScalarField cube({8, 6, 6}, 1.0f);
    ScalarField p = project(cube, 0.0);
    REQUIRE(p.shape == std::vector<std::size_t>{6, 6});
    for (float v : p.data) CHECK(v == doctest::Approx(8.0f));
}

TEST_CASE("project: mass conserved at angle 0") {
    ScalarField v({10, 12, 14});
    Rng rng(3);
    for (float& x : v.data) x = static_cast<float>(rng.uniform());
    ScalarField p = project(v, 0.0);
    double vol_sum = 0.0, proj_sum = 0.0;
    for (float x : v.data) vol_sum += x;
    for (float x : p.data) proj_sum += x;
    CHECK(proj_sum == doctest::Approx(vol_sum).epsilon(1e-4));
}

TEST_CASE("project: single central voxel keeps unit mass at 30 degrees") {
    ScalarField v({17, 17, 17}, 0.0f);
    v.at3(8, 8, 8) = 1.0f;
    ScalarField p = project(v, 30.0);
    double mass = 0.0;
    for (float x : p.data) mass += x;
    CHECK(std::abs(mass - 1.0) < 1e-3);
}

TEST_CASE("project: linear in the volume") {
    ScalarField v1({8, 8, 8}), v2({8, 8, 8});
    Rng rng(4);
    for (float& x : v1.data) x = static_cast<float>(rng.normal());
    for (float& x : v2.data) x = static_cast<float>(rng.normal());
    ScalarField combo({8, 8, 8});
    for (std::size_t i = 0; i < combo.size(); ++i)
        combo.data[i] = 2.0f * v1.data[i] - 3.0f * v2.data[i];
    ScalarField pc = project(combo, 25.0);
    ScalarField p1 = project(v1, 25.0);
    ScalarField p2 = project(v2, 25.0);
    for (std::size_t i = 0; i < pc.size(); ++i)
        CHECK(pc.data[i] == doctest::Approx(2.0f * p1.data[i] - 3.0f * p2.data[i]).epsilon(1e-5));
}

TEST_CASE("project: angles at or beyond 90 degrees rejected") {
    ScalarField v({4, 4, 4}, 1.0f);
    CHECK_THROWS_AS(project(v, 90.0), PreconditionError);
    CHECK_THROWS_AS(project(v, -95.0), PreconditionError);
}

TEST_CASE("default tilt angles: +-60 step 2 gives 61 tilts") {
    std::vector<double> angles = default_tilt_angles();
    REQUIRE(angles.size() == 61);
    CHECK(angles.front() == doctest::Approx(-60.0));
    CHECK(angles.back() == doctest::Approx(60.0));
}

TEST_CASE("simulate: deterministic in seed, independent of layout") {
    Phantom ph = make_phantom(small_spec());
    AcquisitionSpec acq;
    acq.angles_deg = {-30, 0, 30};
    acq.frames_per_tilt = 3;
    acq.electrons_per_pixel_per_frame = 8.0;
    acq.seed = 21;
    MovieTiltSeries s1 = simulate_acquisition(ph, acq);
    MovieTiltSeries s2 = simulate_acquisition(ph, acq);
    validate_series(s1);
    REQUIRE(s1.tilts.size() == 3);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(s1.tilts[t].frames[k].data == s2.tilts[t].frames[k].data);
}

TEST_CASE("simulate: zero drift means one clean component per tilt") {
    Phantom ph = make_phantom(small_spec());
    AcquisitionSpec acq;
    acq.angles_deg = {0};
    acq.frames_per_tilt = 2;
    acq.electrons_per_pixel_per_frame = 1e7; // shot noise negligible
    acq.gaussian_readout_sigma = 0.0;
    acq.seed = 5;
    MovieTiltSeries s = simulate_acquisition(ph, acq);
    const ScalarField& f0 = s.tilts[0].frames[0];
    const ScalarField& f1 = s.tilts[0].frames[1];
    double scale = 0.0;
    for (float v : f0.data) scale = std::max<double>(scale, v);
    for (std::size_t i = 0; i < f0.size(); ++i)
        CHECK(std::abs(f0.data[i] - f1.data[i]) / scale < 2e-3);
}

TEST_CASE("simulate: dose is positive or an error") {
    Phantom ph = make_phantom(small_spec());
    AcquisitionSpec acq;
    acq.angles_deg = {0};
    acq.electrons_per_pixel_per_frame = 0.0;
    CHECK_THROWS_AS(simulate_acquisition(ph, acq), PreconditionError);
}

TEST_CASE("simulate: frame mean converges to the Poisson rate (Monte Carlo)") {
    // One small tilt, many frames; compare the per-pixel frame mean with the
    // known rate field.
    PhantomSpec spec = small_spec();
    spec.shape = {12, 16, 16};
    spec.n_membranes = 0;
    spec.n_filaments = 0;
    spec.n_blobs = 3;
    Phantom ph = make_phantom(spec);

    AcquisitionSpec acq;
    acq.angles_deg = {0};
    acq.frames_per_tilt = 500;
    acq.electrons_per_pixel_per_frame = 20.0;
    acq.gaussian_readout_sigma = 0.4;
    acq.seed = 31;
    MovieTiltSeries s = simulate_acquisition(ph, acq);

    ScalarField clean = project(ph.density, 0.0);
    double peak = clean.max();
    const double n = 500.0;

    std::size_t within3 = 0, total = clean.size();
    for (std::size_t i = 0; i < total; ++i) {
        double lambda = std::max(0.0, clean.data[i] / peak * 20.0);
        double mean = 0.0;
        for (const ScalarField& f : s.tilts[0].frames) mean += f.data[i];
        mean /= n;
        double sigma = std::sqrt(lambda + 0.4 * 0.4);
        double bound3 = 3.0 * sigma / std::sqrt(n);
        if (std::abs(mean - lambda) <= bound3) ++within3;
        CHECK(std::abs(mean - lambda) <= 5.0 * sigma / std::sqrt(n) + 1e-9);
    }
    // ~99.7% of pixels should sit inside the 3-sigma band.
    CHECK(static_cast<double>(within3) / static_cast<double>(total) > 0.99);
}

TEST_CASE("simulate: noise independent across frames of one tilt") {
    PhantomSpec spec;
    spec.shape = {24, 256, 512};
    spec.n_membranes = 1;
    spec.n_filaments = 2;
    spec.n_blobs = 20;
    spec.seed = 13;
    Phantom ph = make_phantom(spec);

    AcquisitionSpec acq;
    acq.angles_deg = {0};
    acq.frames_per_tilt = 2;
    acq.electrons_per_pixel_per_frame = 10.0;
    acq.gaussian_readout_sigma = 0.5;
    acq.seed = 41;
    MovieTiltSeries s = simulate_acquisition(ph, acq);

    ScalarField clean = project(ph.density, 0.0);
    double peak = clean.max();

    // Residuals against the known rate; sample correlation over >= 1e5 px.
    const ScalarField& a = s.tilts[0].frames[0];
    const ScalarField& b = s.tilts[0].frames[1];
    REQUIRE(a.size() >= 100000);
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    const double n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        double lambda = std::max(0.0, clean.data[i] / peak * 10.0);
        double ra = a.data[i] - lambda, rb = b.data[i] - lambda;
        sa += ra;
        sb += rb;
        saa += ra * ra;
        sbb += rb * rb;
        sab += ra * rb;
    }
    double cov = sab / n - (sa / n) * (sb / n);
    double var_a = saa / n - (sa / n) * (sa / n);
    double var_b = sbb / n - (sb / n) * (sb / n);
    double rho = cov / std::sqrt(var_a * var_b);
    CHECK(std::abs(rho) < 0.02);
}
