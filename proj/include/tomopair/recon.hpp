#pragma once

#include <utility>

#include "tomopair/pairing.hpp"
#include "tomopair/series.hpp"

namespace tomopair {

// Weighted backprojection: ramp-filter each projection row along x, then
// smear it back through the volume along its viewing direction. Same
// geometry as the simulator: beam along z, tilt axis along y, rotation
// center at the grid center ((n-1)/2 per axis).

enum class RampWindow { None, Hann };

// Angular region of Fourier space covered by a +-half_angle tilt series;
// everything at a larger angle from the fx axis (in the fx/fz plane) is the
// missing wedge. Beam = z axis, tilt axis = y axis.
struct WedgeMask {
    double half_angle_deg = 60.0;
};

// Row-by-row |frequency| multiplication along the axis perpendicular to the
// tilt axis. Frequencies are in cycles/pixel (Nyquist = 0.5); the Hann
// window apodizes the ramp to zero at Nyquist. Rows are zero-padded to the
// next power of two.
ScalarField ramp_filter(const ScalarField& projection, RampWindow window);

// Voxel-driven backprojection of the (optionally ramp-filtered) series into
// a (nz, ny, nx) volume, scaled by pi / n_angles.
ScalarField backproject(const TiltSeries& series, const std::vector<std::size_t>& out_shape,
                        bool filtered, RampWindow window = RampWindow::Hann);

// Reconstructs both halves with identical settings.
std::pair<ScalarField, ScalarField> reconstruct_pair(const HalfSeries& half,
                                                     const std::vector<std::size_t>& out_shape,
                                                     RampWindow window = RampWindow::Hann);

} // namespace tomopair
