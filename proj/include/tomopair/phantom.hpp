#pragma once

#include <cstdint>
#include <vector>

#include "tomopair/grid.hpp"

namespace tomopair {

// Synthetic specimen and acquisition models: the repository's substitute for
// a microscope. Specimens are slab-like volumes containing membranes
// (spherical shells), filaments (cylinders) and compact blobs; the blobs are
// the labeled detection targets.
//
// Geometry conventions shared with the reconstruction module: volumes are
// (nz, ny, nx) with the beam along z and the tilt axis along y; a projection
// at tilt angle 0 integrates straight down the z axis onto a (ny, nx)
// detector.

struct PhantomSpec {
    std::vector<std::size_t> shape; // (nz, ny, nx)
    std::size_t n_membranes = 2;
    std::size_t n_filaments = 3;
    std::size_t n_blobs = 20;
    double blob_radius_min = 3.0; // voxels
    double blob_radius_max = 5.0;
    float density_background = 0.0f;
    float density_membrane = 0.6f;
    float density_filament = 0.8f;
    float density_blob = 1.0f;
    std::uint64_t seed = 1;
};

struct Phantom {
    ScalarField density; // 3D
    LabelField labels;   // blob id per voxel, 0 = background, ids contiguous 1..K
};

// Tilt angles in acquisition order plus the detector/dose model.
struct AcquisitionSpec {
    std::vector<double> angles_deg; // strictly within (-90, +90)
    std::size_t frames_per_tilt = 4;
    double electrons_per_pixel_per_frame = 10.0; // peak dose at the brightest projection pixel
    double gaussian_readout_sigma = 0.5;
    double drift_per_frame_y = 0.0; // pixels; frame k is displaced by k * drift
    double drift_per_frame_x = 0.0;
    std::uint64_t seed = 1;
};

struct MovieTilt {
    double angle_deg = 0.0;
    std::size_t acquisition_index = 0;
    std::vector<ScalarField> frames; // 2D, one shape
};

struct MovieTiltSeries {
    std::vector<MovieTilt> tilts;
};

// -60..+60 step 2 by default; ascending acquisition order.
std::vector<double> default_tilt_angles(double max_angle_deg = 60.0, double step_deg = 2.0);

// Deterministic in spec.seed. Blobs never overlap each other; throws
// DegenerateInputError when they cannot be placed within bounded retries.
Phantom make_phantom(const PhantomSpec& spec);

// Parallel-beam projection of a 3D volume at a tilt about the y axis.
// Linear in the volume; at angle 0 column sums are exact.
ScalarField project(const ScalarField& volume, double angle_deg);

// Noise-free projections for every tilt of an acquisition, in acquisition
// order (shared by the simulator and by zero-noise test oracles).
std::vector<ScalarField> clean_projections(const ScalarField& volume,
                                           const AcquisitionSpec& acq);

// Movie-mode acquisition: per tilt and frame, Poisson shot noise on the
// dose-scaled clean projection plus Gaussian readout noise, with cumulative
// rigid drift k * drift applied to frame k. Noise is independent across
// frames and tilts; the whole series is deterministic in acq.seed.
MovieTiltSeries simulate_acquisition(const Phantom& phantom, const AcquisitionSpec& acq);

// Bilinear sample of f at (y - dy, x - dx) per pixel, clamped at edges:
// displaces image content by (+dy, +dx).
ScalarField shift_image(const ScalarField& f, double dy, double dx);

void validate_series(const MovieTiltSeries& series);

} // namespace tomopair
