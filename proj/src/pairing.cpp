#include "tomopair/pairing.hpp"

#include <algorithm>
#include <cmath>

#include "tomopair/fft.hpp"
#include "tomopair/parallel.hpp"

namespace tomopair {

std::vector<double> TiltSeries::angles() const {
    std::vector<double> out;
    out.reserve(tilts.size());
    for (const TiltEntry& t : tilts) out.push_back(t.angle_deg);
    return out;
}

TiltSeries sorted_by_angle(const TiltSeries& series) {
    TiltSeries out = series;
    std::stable_sort(out.tilts.begin(), out.tilts.end(),
                     [](const TiltEntry& a, const TiltEntry& b) {
                         return a.angle_deg < b.angle_deg;
                     });
    return out;
}

void validate_tilt_series(const TiltSeries& series) {
    require(!series.tilts.empty(), "tilt series is empty");
    const std::vector<std::size_t>& shape = series.tilts.front().projection.shape;
    for (const TiltEntry& t : series.tilts) {
        require(t.projection.ndim() == 2, "tilt projections must be 2D");
        require(t.projection.shape == shape, "tilt projections must share one shape");
    }
    TiltSeries s = sorted_by_angle(series);
    for (std::size_t i = 1; i < s.tilts.size(); ++i)
        require(s.tilts[i].angle_deg > s.tilts[i - 1].angle_deg,
                "tilt angles must be distinct");
}

namespace {

ScalarField mean_of(const std::vector<ScalarField>& frames, std::size_t begin, std::size_t end) {
    ScalarField out(frames[begin].shape);
    out.voxel_size = frames[begin].voxel_size;
    const double inv = 1.0 / static_cast<double>(end - begin);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double s = 0.0;
        for (std::size_t k = begin; k < end; ++k) s += frames[k].data[i];
        out.data[i] = static_cast<float>(s * inv);
    }
    return out;
}

void check_stack(const std::vector<ScalarField>& frames) {
    require(frames.size() >= 2, "pairing needs at least 2 frames");
    for (const ScalarField& f : frames) {
        require(f.ndim() == 2, "frames must be 2D");
        require(f.shape == frames.front().shape, "frames must share one shape");
    }
}

// Cross-correlation displacement of `img` relative to `ref` (img content ==
// ref content displaced by the returned (dy, dx)). Integer peak restricted
// to a plausibility window, then parabolic sub-pixel refinement per axis.
std::array<double, 2> find_shift(const ScalarField& img, const ScalarField& ref) {
    const std::size_t ny = img.shape[0], nx = img.shape[1];

    ScalarField a = img, b = ref;
    const double ma = a.mean(), mb = b.mean();
    for (float& v : a.data) v = static_cast<float>(v - ma);
    for (float& v : b.data) v = static_cast<float>(v - mb);

    ComplexGrid fa = fft_forward(a);
    ComplexGrid fb = fft_forward(b);
    for (std::size_t i = 0; i < fa.size(); ++i) fa.data[i] *= std::conj(fb.data[i]);
    ScalarField corr = fft_inverse_real(fa, fa.shape);

    const long py = static_cast<long>(corr.shape[0]);
    const long px = static_cast<long>(corr.shape[1]);
    const long cap_y = std::min<long>(py / 2 - 1, static_cast<long>(ny) / 4 + 8);
    const long cap_x = std::min<long>(px / 2 - 1, static_cast<long>(nx) / 4 + 8);
    auto at = [&](long dy, long dx) {
        long iy = (dy % py + py) % py;
        long ix = (dx % px + px) % px;
        return static_cast<double>(corr.at2(static_cast<std::size_t>(iy),
                                            static_cast<std::size_t>(ix)));
    };

    long best_y = 0, best_x = 0;
    double best = at(0, 0);
    for (long dy = -cap_y; dy <= cap_y; ++dy)
        for (long dx = -cap_x; dx <= cap_x; ++dx) {
            double v = at(dy, dx);
            if (v > best) {
                best = v;
                best_y = dy;
                best_x = dx;
            }
        }

    auto refine = [&](double cm, double c0, double cp) {
        double denom = cm - 2.0 * c0 + cp;
        if (denom == 0.0) return 0.0;
        double d = 0.5 * (cm - cp) / denom;
        return std::clamp(d, -0.5, 0.5);
    };
    double sub_y = refine(at(best_y - 1, best_x), best, at(best_y + 1, best_x));
    double sub_x = refine(at(best_y, best_x - 1), best, at(best_y, best_x + 1));

    return {static_cast<double>(best_y) + sub_y, static_cast<double>(best_x) + sub_x};
}

} // namespace

FrameAlignment align_frames(const std::vector<ScalarField>& frames) {
    check_stack(frames);
    const std::size_t n = frames.size();

    FrameAlignment out;
    out.frames = frames;
    out.shifts.assign(n, {0.0, 0.0});

    // Pass 1: grow the reference as the running sum of frames aligned so far.
    ScalarField ref = frames[0];
    for (std::size_t i = 1; i < n; ++i) {
        std::array<double, 2> d = find_shift(frames[i], ref);
        out.shifts[i] = d;
        out.frames[i] = shift_image(frames[i], -d[0], -d[1]);
        for (std::size_t j = 0; j < ref.size(); ++j) ref.data[j] += out.frames[i].data[j];
    }

    // Pass 2: re-estimate each frame against the leave-one-out sum.
    for (std::size_t i = 0; i < n; ++i) {
        ScalarField loo(frames[0].shape);
        loo.voxel_size = frames[0].voxel_size;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            for (std::size_t j = 0; j < loo.size(); ++j) loo.data[j] += out.frames[k].data[j];
        }
        std::array<double, 2> d = find_shift(frames[i], loo);
        out.shifts[i] = d;
        if (d[0] != 0.0 || d[1] != 0.0)
            out.frames[i] = shift_image(frames[i], -d[0], -d[1]);
        else
            out.frames[i] = frames[i];
    }

    return out;
}

ProjectionPair split_halves(const std::vector<ScalarField>& frames) {
    check_stack(frames);
    const std::size_t half = frames.size() / 2;
    ProjectionPair pair;
    pair.scheme = "p2p-ip";
    pair.a = mean_of(frames, 0, half);
    pair.b = mean_of(frames, half, frames.size());
    return pair;
}

ProjectionPair split_even_odd(const std::vector<ScalarField>& frames) {
    check_stack(frames);
    ProjectionPair pair;
    pair.scheme = "p2p-df";
    pair.a = ScalarField(frames[0].shape);
    pair.b = ScalarField(frames[0].shape);
    pair.a.voxel_size = pair.b.voxel_size = frames[0].voxel_size;
    for (std::size_t i = 0; i < pair.a.size(); ++i) {
        double even = 0.0, odd = 0.0;
        for (std::size_t k = 0; k < frames.size(); ++k)
            (k % 2 == 0 ? even : odd) += frames[k].data[i];
        pair.a.data[i] = static_cast<float>(even);
        pair.b.data[i] = static_cast<float>(odd);
    }
    return pair;
}

std::vector<ProjectionPair> pair_adjacent_tilts(const TiltSeries& series) {
    require(series.size() >= 2, "pair_adjacent_tilts needs at least 2 tilts");
    validate_tilt_series(series);
    TiltSeries s = sorted_by_angle(series);

    std::vector<ProjectionPair> pairs;
    pairs.reserve(s.size() - 1);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        ProjectionPair p;
        p.scheme = "p2p-tap";
        p.a = s.tilts[i].projection;
        p.b = s.tilts[i + 1].projection;
        p.tilt_a = static_cast<long>(s.tilts[i].acquisition_index);
        p.tilt_b = static_cast<long>(s.tilts[i + 1].acquisition_index);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

HalfSeries split_series_even_odd_acquisition(const TiltSeries& series) {
    validate_tilt_series(series);
    std::vector<bool> seen(series.size(), false);
    for (const TiltEntry& t : series.tilts) {
        require(t.acquisition_index < series.size(), "acquisition index out of range");
        require(!seen[t.acquisition_index], "duplicate acquisition index");
        seen[t.acquisition_index] = true;
    }

    HalfSeries half;
    half.kind = HalfSplit::EvenOddAcquisition;
    for (const TiltEntry& t : series.tilts)
        (t.acquisition_index % 2 == 0 ? half.a : half.b).tilts.push_back(t);
    half.a = sorted_by_angle(half.a);
    half.b = sorted_by_angle(half.b);
    return half;
}

HalfSeries split_series_frames(const MovieTiltSeries& series) {
    validate_series(series);
    for (const MovieTilt& t : series.tilts)
        require(t.frames.size() >= 2, "split_series_frames: every tilt needs >= 2 frames");

    std::vector<TiltEntry> even(series.tilts.size()), odd(series.tilts.size());
    parallel_for_each(series.tilts.size(), [&](std::size_t i) {
        const MovieTilt& t = series.tilts[i];
        FrameAlignment aligned = align_frames(t.frames);
        ProjectionPair pair = split_even_odd(aligned.frames);
        even[i] = {t.angle_deg, std::move(pair.a), t.acquisition_index};
        odd[i] = {t.angle_deg, std::move(pair.b), t.acquisition_index};
    });

    HalfSeries half;
    half.kind = HalfSplit::DoseFraction;
    half.a.tilts = std::move(even);
    half.b.tilts = std::move(odd);
    half.a = sorted_by_angle(half.a);
    half.b = sorted_by_angle(half.b);
    return half;
}

TiltSeries sum_aligned_series(const MovieTiltSeries& series) {
    validate_series(series);
    std::vector<TiltEntry> entries(series.tilts.size());
    parallel_for_each(series.tilts.size(), [&](std::size_t i) {
        const MovieTilt& t = series.tilts[i];
        ScalarField sum(t.frames[0].shape);
        sum.voxel_size = t.frames[0].voxel_size;
        if (t.frames.size() >= 2) {
            FrameAlignment aligned = align_frames(t.frames);
            for (const ScalarField& f : aligned.frames)
                for (std::size_t j = 0; j < sum.size(); ++j) sum.data[j] += f.data[j];
        } else {
            sum = t.frames[0];
        }
        entries[i] = {t.angle_deg, std::move(sum), t.acquisition_index};
    });
    TiltSeries out;
    out.tilts = std::move(entries);
    return sorted_by_angle(out);
}

} // namespace tomopair
