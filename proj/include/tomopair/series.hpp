#pragma once

#include <vector>

#include "tomopair/grid.hpp"

namespace tomopair {

// One projection per tilt angle. Shared between the pairing schemes (which
// produce half series) and the reconstruction module (which consumes them).
struct TiltEntry {
    double angle_deg = 0.0;
    ScalarField projection; // 2D
    std::size_t acquisition_index = 0;
};

struct TiltSeries {
    std::vector<TiltEntry> tilts;

    std::size_t size() const { return tilts.size(); }
    std::vector<double> angles() const;
};

// Stable sort by angle; acquisition indices travel with their tilts.
TiltSeries sorted_by_angle(const TiltSeries& series);

// Shapes equal across tilts, no duplicate angles.
void validate_tilt_series(const TiltSeries& series);

} // namespace tomopair
