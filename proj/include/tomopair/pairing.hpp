#pragma once

#include <array>
#include <string>
#include <vector>

#include "tomopair/phantom.hpp"
#include "tomopair/series.hpp"

namespace tomopair {

// The five pairing schemes that turn raw acquisitions into (input, target)
// data with independent noise, plus the frame-alignment stand-in they rely
// on. All schemes are deterministic; none draw random numbers.

struct ProjectionPair {
    ScalarField a, b;
    std::string scheme;
    long tilt_a = -1; // acquisition indices of the contributing tilts, -1 if n/a
    long tilt_b = -1;
};

enum class HalfSplit {
    EvenOddAcquisition, // disjoint angle sets partitioning the series
    DoseFraction,       // identical angle lists, frames split per tilt
};

struct HalfSeries {
    TiltSeries a, b;
    HalfSplit kind = HalfSplit::DoseFraction;
};

struct FrameAlignment {
    std::vector<ScalarField> frames;            // resampled onto the reference position
    std::vector<std::array<double, 2>> shifts;  // (dy, dx) displacement of each raw frame
};

// Rigid alignment of a movie stack by cross-correlation against the running
// sum, two refinement passes, parabolic sub-pixel peak interpolation.
// Returned shifts are the displacements of each raw frame relative to the
// reference position; aligned frames are resampled by the negated shift.
FrameAlignment align_frames(const std::vector<ScalarField>& frames);

// First-half / second-half frame averages, no alignment.
ProjectionPair split_halves(const std::vector<ScalarField>& frames);

// Sums of even-indexed and odd-indexed frames. Frames are expected to be
// aligned already; interleaving shares slow per-frame trends (dose, damage)
// equally between the two sums.
ProjectionPair split_even_odd(const std::vector<ScalarField>& frames);

// Neighboring-angle pairs (i, i+1) from a series sorted by angle.
std::vector<ProjectionPair> pair_adjacent_tilts(const TiltSeries& series);

// Splits a single-image-per-tilt series into two series by acquisition
// index parity; the two angle sets are disjoint and cover the input.
HalfSeries split_series_even_odd_acquisition(const TiltSeries& series);

// Per tilt: align frames, then even/odd-sum them. Both output series carry
// the full angle list.
HalfSeries split_series_frames(const MovieTiltSeries& series);

// Align and sum all frames of every tilt: the conventional full-dose series
// (the raw-data route the restored results are compared against).
TiltSeries sum_aligned_series(const MovieTiltSeries& series);

} // namespace tomopair
