#pragma once

#include <string>
#include <vector>

#include "tomopair/grid.hpp"
#include "tomopair/recon.hpp"

namespace tomopair {

// Quantitative evaluation: Fourier shell correlation between two volumes,
// plain error metrics against simulator ground truth, and the Fourier-domain
// missing-wedge energy ratio.

struct FscShell {
    double frequency = 0.0;   // shell center, cycles/voxel
    double correlation = 0.0; // in [-1, 1]
    std::size_t n_samples = 0;
};

struct FscCurve {
    std::vector<FscShell> shells;

    // Mean correlation over shells with frequency in [lo, hi].
    double band_mean(double lo, double hi) const;
};

// Per shell s: Re(sum F1 conj(F2)) / sqrt(sum |F1|^2 * sum |F2|^2), summed
// over voxels whose radial frequency rounds into shell s. Volumes are padded
// to powers of two (identically for both arguments); shell_width is in
// frequency voxels of the padded grid (default 1).
FscCurve fsc(const ScalarField& v1, const ScalarField& v2, double shell_width = 1.0);

// columns: frequency,correlation,n_samples
std::string fsc_to_csv(const FscCurve& curve);

double mse(const ScalarField& pred, const ScalarField& truth);

// Peak signal-to-noise ratio against the truth's dynamic range, in dB;
// +infinity when pred == truth.
double psnr(const ScalarField& pred, const ScalarField& truth);

// (mean |F|^2 inside the unsampled wedge) / (mean |F|^2 in the sampled
// region), DC excluded. Small for data reconstructed from a +-half_angle
// series; ~1 for isotropic content.
double wedge_inconsistency(const ScalarField& v, const WedgeMask& wedge);

} // namespace tomopair
