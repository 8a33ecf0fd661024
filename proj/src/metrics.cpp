#include "tomopair/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "tomopair/fft.hpp"

namespace tomopair {

double FscCurve::band_mean(double lo, double hi) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const FscShell& s : shells)
        if (s.frequency >= lo && s.frequency <= hi) {
            sum += s.correlation;
            ++n;
        }
    require(n > 0, "FscCurve::band_mean: no shells in band");
    return sum / static_cast<double>(n);
}

FscCurve fsc(const ScalarField& v1, const ScalarField& v2, double shell_width) {
    require(v1.ndim() == 3 && v2.ndim() == 3, "fsc: volumes must be 3D");
    require(same_shape(v1, v2), "fsc: volumes must share one shape");
    require(shell_width > 0, "fsc: shell width must be positive");

    bool zero1 = true, zero2 = true;
    for (float v : v1.data)
        if (v != 0.0f) { zero1 = false; break; }
    for (float v : v2.data)
        if (v != 0.0f) { zero2 = false; break; }
    if (zero1 || zero2)
        throw DegenerateInputError("fsc: correlation of an all-zero volume is undefined");

    ComplexGrid f1 = fft_forward(v1);
    ComplexGrid f2 = fft_forward(v2);

    const std::size_t nz = f1.shape[0], ny = f1.shape[1], nx = f1.shape[2];
    // Shells indexed by rounded radial frequency in frequency voxels of the
    // largest padded extent.
    const double n_ref = static_cast<double>(std::max({nz, ny, nx}));
    const std::size_t n_shells = static_cast<std::size_t>(n_ref / 2.0 / shell_width) + 1;

    std::vector<double> num(n_shells, 0.0), den1(n_shells, 0.0), den2(n_shells, 0.0);
    std::vector<std::size_t> count(n_shells, 0);

    std::size_t i = 0;
    for (std::size_t z = 0; z < nz; ++z) {
        double fz = static_cast<double>(freq_index(z, nz)) / static_cast<double>(nz);
        for (std::size_t y = 0; y < ny; ++y) {
            double fy = static_cast<double>(freq_index(y, ny)) / static_cast<double>(ny);
            for (std::size_t x = 0; x < nx; ++x, ++i) {
                double fx = static_cast<double>(freq_index(x, nx)) / static_cast<double>(nx);
                double r = std::sqrt(fx * fx + fy * fy + fz * fz);
                std::size_t shell =
                    static_cast<std::size_t>(std::llround(r * n_ref / shell_width));
                if (shell >= n_shells) continue;
                const std::complex<double>&a = f1.data[i], &b = f2.data[i];
                num[shell] += a.real() * b.real() + a.imag() * b.imag();
                den1[shell] += std::norm(a);
                den2[shell] += std::norm(b);
                ++count[shell];
            }
        }
    }

    FscCurve curve;
    curve.shells.reserve(n_shells);
    for (std::size_t s = 0; s < n_shells; ++s) {
        FscShell shell;
        shell.frequency = static_cast<double>(s) * shell_width / n_ref;
        shell.n_samples = count[s];
        double d = std::sqrt(den1[s] * den2[s]);
        shell.correlation = d > 0.0 ? num[s] / d : 0.0;
        curve.shells.push_back(shell);
    }
    return curve;
}

std::string fsc_to_csv(const FscCurve& curve) {
    std::string out = "frequency,correlation,n_samples\n";
    char line[128];
    for (const FscShell& s : curve.shells) {
        std::snprintf(line, sizeof(line), "%.9g,%.9g,%zu\n", s.frequency, s.correlation,
                      s.n_samples);
        out += line;
    }
    return out;
}

double mse(const ScalarField& pred, const ScalarField& truth) {
    require(same_shape(pred, truth), "mse: fields must share one shape");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = static_cast<double>(pred.data[i]) - static_cast<double>(truth.data[i]);
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

double psnr(const ScalarField& pred, const ScalarField& truth) {
    double range = static_cast<double>(truth.max()) - static_cast<double>(truth.min());
    if (range <= 0.0)
        throw DegenerateInputError("psnr: truth has zero dynamic range");
    double e = mse(pred, truth);
    if (e == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(range * range / e);
}

double wedge_inconsistency(const ScalarField& v, const WedgeMask& wedge) {
    require(v.ndim() == 3, "wedge_inconsistency: volume must be 3D");
    require(wedge.half_angle_deg > 0.0 && wedge.half_angle_deg < 90.0,
            "wedge_inconsistency: half angle must lie in (0, 90)");

    ComplexGrid g = fft_forward(v);
    const std::size_t nz = g.shape[0], ny = g.shape[1], nx = g.shape[2];
    const double limit = wedge.half_angle_deg * std::numbers::pi / 180.0;

    double wedge_sum = 0.0, sampled_sum = 0.0;
    std::size_t wedge_n = 0, sampled_n = 0;
    std::size_t i = 0;
    for (std::size_t z = 0; z < nz; ++z) {
        double fz = static_cast<double>(freq_index(z, nz)) / static_cast<double>(nz);
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x, ++i) {
                double fx = static_cast<double>(freq_index(x, nx)) / static_cast<double>(nx);
                if (z == 0 && y == 0 && x == 0) continue; // DC
                // Angle from the fx axis in the beam/detector (fx, fz) plane;
                // the fy (tilt) axis is sampled at every tilt.
                double phi = std::atan2(std::abs(fz), std::abs(fx));
                double p = std::norm(g.data[i]);
                if (phi > limit) {
                    wedge_sum += p;
                    ++wedge_n;
                } else {
                    sampled_sum += p;
                    ++sampled_n;
                }
            }
        }
    }
    require(wedge_n > 0 && sampled_n > 0, "wedge_inconsistency: degenerate wedge geometry");
    double sampled_mean = sampled_sum / static_cast<double>(sampled_n);
    if (sampled_mean <= 0.0)
        throw DegenerateInputError("wedge_inconsistency: sampled region carries no energy");
    return (wedge_sum / static_cast<double>(wedge_n)) / sampled_mean;
}

} // namespace tomopair
