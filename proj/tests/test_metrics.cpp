#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tomopair/fft.hpp"
#include "tomopair/metrics.hpp"

using namespace tomopair;

namespace {

ScalarField random_volume(const std::vector<std::size_t>& shape, std::uint64_t seed) {
    ScalarField f(shape);
    Rng rng(seed);
    for (float& v : f.data) v = static_cast<float>(rng.normal());
    return f;
}

} // namespace

TEST_CASE("fsc: self-correlation is 1 at every populated shell") {
    ScalarField v = random_volume({32, 32, 32}, 1);
    FscCurve c = fsc(v, v);
    for (const FscShell& s : c.shells)
        if (s.n_samples > 0) CHECK(std::abs(s.correlation - 1.0) < 1e-6);
}

TEST_CASE("fsc: sign flip gives -1") {
    ScalarField v = random_volume({16, 16, 16}, 2);
    ScalarField w = v;
    for (float& x : w.data) x = -x;
    FscCurve c = fsc(v, w);
    for (const FscShell& s : c.shells)
        if (s.n_samples > 0) CHECK(std::abs(s.correlation + 1.0) < 1e-6);
}

TEST_CASE("fsc: independent white noise stays inside the 3/sqrt(n) envelope") {
    ScalarField a = random_volume({64, 64, 64}, 3);
    ScalarField b = random_volume({64, 64, 64}, 4);
    FscCurve c = fsc(a, b);
    std::size_t checked = 0;
    for (const FscShell& s : c.shells) {
        if (s.n_samples < 100 || s.frequency == 0.0) continue;
        ++checked;
        CHECK(std::abs(s.correlation) <
              3.0 / std::sqrt(static_cast<double>(s.n_samples)));
    }
    CHECK(checked > 20);
}

TEST_CASE("fsc: symmetric in its arguments") {
    ScalarField a = random_volume({16, 16, 16}, 5);
    ScalarField b = random_volume({16, 16, 16}, 6);
    FscCurve ab = fsc(a, b), ba = fsc(b, a);
    REQUIRE(ab.shells.size() == ba.shells.size());
    for (std::size_t i = 0; i < ab.shells.size(); ++i)
        CHECK(ab.shells[i].correlation == ba.shells[i].correlation);
}

TEST_CASE("fsc: scale invariant") {
    ScalarField a = random_volume({16, 16, 16}, 7);
    ScalarField b = random_volume({16, 16, 16}, 8);
    for (std::size_t i = 0; i < b.size(); ++i) b.data[i] += 0.5f * a.data[i];
    ScalarField a2 = a, b2 = b;
    for (float& v : a2.data) v *= 3.7f;
    for (float& v : b2.data) v *= 0.21f;
    FscCurve c1 = fsc(a, b), c2 = fsc(a2, b2);
    for (std::size_t i = 0; i < c1.shells.size(); ++i)
        if (c1.shells[i].n_samples > 0)
            CHECK(std::abs(c1.shells[i].correlation - c2.shells[i].correlation) < 1e-6);
}

TEST_CASE("fsc: frequencies ascend and DC shell correlates fully") {
    ScalarField a = random_volume({16, 16, 16}, 9);
    ScalarField b = a;
    for (float& v : b.data) v += 0.01f;
    FscCurve c = fsc(a, b);
    CHECK(c.shells.front().frequency == 0.0);
    for (std::size_t i = 1; i < c.shells.size(); ++i)
        CHECK(c.shells[i].frequency > c.shells[i - 1].frequency);
    CHECK(c.shells.back().frequency <= 0.5 + 1e-12);
}

TEST_CASE("fsc: degenerate and mismatched inputs rejected") {
    ScalarField z({8, 8, 8}, 0.0f);
    ScalarField v = random_volume({8, 8, 8}, 10);
    CHECK_THROWS_AS(fsc(z, v), DegenerateInputError);
    ScalarField w = random_volume({8, 8, 4}, 11);
    CHECK_THROWS_AS(fsc(v, w), PreconditionError);
}

TEST_CASE("fsc: csv export carries one line per shell") {
    ScalarField v = random_volume({8, 8, 8}, 12);
    FscCurve c = fsc(v, v);
    std::string csv = fsc_to_csv(c);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == c.shells.size() + 1);
    CHECK(csv.rfind("frequency,correlation,n_samples\n", 0) == 0);
}

TEST_CASE("mse/psnr: closed forms") {
    ScalarField t({4, 4});
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data[i] = static_cast<float>(i % 2 == 0 ? 0.0 : 10.0); // range 10
    ScalarField p = t;
    CHECK(mse(p, t) == 0.0);
    CHECK(std::isinf(psnr(p, t)));

    for (float& v : p.data) v += 1.0f;
    CHECK(mse(p, t) == doctest::Approx(1.0));
    CHECK(psnr(p, t) == doctest::Approx(20.0));
}

TEST_CASE("mse: brute-force agreement on random fields") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        ScalarField a = random_volume({4, 5}, 100 + seed);
        ScalarField b = random_volume({4, 5}, 200 + seed);
        double brute = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            brute += (static_cast<double>(a.data[i]) - b.data[i]) *
                     (static_cast<double>(a.data[i]) - b.data[i]);
        brute /= static_cast<double>(a.size());
        REQUIRE(std::abs(mse(a, b) - brute) < 1e-7);
    }
}

TEST_CASE("psnr: zero dynamic range rejected") {
    ScalarField t({4, 4}, 2.0f);
    ScalarField p({4, 4}, 1.0f);
    CHECK_THROWS_AS(psnr(p, t), DegenerateInputError);
}

TEST_CASE("wedge: volume built without wedge content scores ~0") {
    ScalarField v = random_volume({32, 32, 32}, 13);
    ComplexGrid g = fft_forward(v);
    const double limit = 60.0 * std::acos(-1.0) / 180.0;
    std::size_t i = 0;
    for (std::size_t z = 0; z < 32; ++z) {
        double fz = static_cast<double>(freq_index(z, 32)) / 32.0;
        for (std::size_t y = 0; y < 32; ++y)
            for (std::size_t x = 0; x < 32; ++x, ++i) {
                double fx = static_cast<double>(freq_index(x, 32)) / 32.0;
                if (std::atan2(std::abs(fz), std::abs(fx)) > limit) g.data[i] = 0.0;
            }
    }
    ScalarField cleaned = fft_inverse_real(g, v.shape);
    double ratio = wedge_inconsistency(cleaned, WedgeMask{60.0});
    CHECK(ratio < 1e-6);
}

TEST_CASE("wedge: isotropic white noise scores ~1") {
    ScalarField v = random_volume({64, 64, 64}, 14);
    double ratio = wedge_inconsistency(v, WedgeMask{60.0});
    CHECK(std::abs(ratio - 1.0) < 0.05);
}

TEST_CASE("wedge: degenerate half angle rejected") {
    ScalarField v = random_volume({8, 8, 8}, 15);
    CHECK_THROWS_AS(wedge_inconsistency(v, WedgeMask{0.0}), PreconditionError);
    CHECK_THROWS_AS(wedge_inconsistency(v, WedgeMask{90.0}), PreconditionError);
}

TEST_CASE("band_mean averages the selected shells") {
    ScalarField v = random_volume({32, 32, 32}, 16);
    FscCurve c = fsc(v, v);
    CHECK(c.band_mean(0.1, 0.3) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(c.band_mean(0.9, 1.0), PreconditionError);
}
