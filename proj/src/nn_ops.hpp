#pragma once

// Internal convolution / pooling / resampling primitives behind the U-Net.
// All kernels are same-padded (zero boundary); layouts are NC[D]HW row-major.
// Parallel loops split over (batch x channel) planes, each plane written by
// exactly one task, so results do not depend on the worker count.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "tomopair/nn.hpp"
#include "tomopair/parallel.hpp"

namespace tomopair::detail {

// dst[y][x] += w * src[y+oy][x+ox] over indices where both sides are valid.
template <typename T>
void axpy_tap_2d(T* dst, const T* src, T w, long H, long W, long oy, long ox) {
    long y0 = std::max(0L, -oy), y1 = std::min(H, H - oy);
    long x0 = std::max(0L, -ox), x1 = std::min(W, W - ox);
    for (long y = y0; y < y1; ++y) {
        T* d = dst + y * W + x0;
        const T* s = src + (y + oy) * W + (x0 + ox);
        long n = x1 - x0;
        for (long i = 0; i < n; ++i) d[i] += w * s[i];
    }
}

template <typename T>
void axpy_tap_3d(T* dst, const T* src, T w, long D, long H, long W, long oz, long oy, long ox) {
    long z0 = std::max(0L, -oz), z1 = std::min(D, D - oz);
    for (long z = z0; z < z1; ++z)
        axpy_tap_2d(dst + z * H * W, src + (z + oz) * H * W, w, H, W, oy, ox);
}

// sum of a[y][x] * b[y+oy][x+ox] over the valid region.
template <typename T>
T dot_tap_2d(const T* a, const T* b, long H, long W, long oy, long ox) {
    long y0 = std::max(0L, -oy), y1 = std::min(H, H - oy);
    long x0 = std::max(0L, -ox), x1 = std::min(W, W - ox);
    T acc = T(0);
    for (long y = y0; y < y1; ++y) {
        const T* pa = a + y * W + x0;
        const T* pb = b + (y + oy) * W + (x0 + ox);
        long n = x1 - x0;
        T row = T(0);
        for (long i = 0; i < n; ++i) row += pa[i] * pb[i];
        acc += row;
    }
    return acc;
}

template <typename T>
T dot_tap_3d(const T* a, const T* b, long D, long H, long W, long oz, long oy, long ox) {
    long z0 = std::max(0L, -oz), z1 = std::min(D, D - oz);
    T acc = T(0);
    for (long z = z0; z < z1; ++z)
        acc += dot_tap_2d(a + z * H * W, b + (z + oz) * H * W, H, W, oy, ox);
    return acc;
}

template <typename T>
std::vector<std::size_t> spatial_of(const TensorT<T>& t) {
    return {t.shape.begin() + 2, t.shape.end()};
}

// Same-padded convolution, weights [out][in][k^d].
template <typename T>
TensorT<T> conv_same(const TensorT<T>& x, const std::vector<T>& w, const std::vector<T>& b,
                     std::size_t out_ch, std::size_t k) {
    const std::size_t n = x.batch(), in_ch = x.channels(), nd = x.spatial_dims();
    const long r = static_cast<long>(k / 2);
    const std::size_t plane = x.spatial_size();

    std::vector<std::size_t> out_shape = x.shape;
    out_shape[1] = out_ch;
    TensorT<T> y(out_shape);

    const long H = static_cast<long>(x.shape[nd == 2 ? 2 : 3]);
    const long W = static_cast<long>(x.shape[nd == 2 ? 3 : 4]);
    const long Dz = nd == 3 ? static_cast<long>(x.shape[2]) : 1;

    parallel_for_each(n * out_ch, [&](std::size_t task) {
        const std::size_t bi = task / out_ch, co = task % out_ch;
        T* out_plane = y.data.data() + (bi * out_ch + co) * plane;
        std::fill(out_plane, out_plane + plane, b[co]);
        for (std::size_t ci = 0; ci < in_ch; ++ci) {
            const T* in_plane = x.data.data() + (bi * in_ch + ci) * plane;
            const T* wk = w.data() + (co * in_ch + ci) * (nd == 2 ? k * k : k * k * k);
            if (nd == 2) {
                for (std::size_t dy = 0; dy < k; ++dy)
                    for (std::size_t dx = 0; dx < k; ++dx)
                        axpy_tap_2d(out_plane, in_plane, wk[dy * k + dx], H, W,
                                    static_cast<long>(dy) - r, static_cast<long>(dx) - r);
            } else {
                for (std::size_t dz = 0; dz < k; ++dz)
                    for (std::size_t dy = 0; dy < k; ++dy)
                        for (std::size_t dx = 0; dx < k; ++dx)
                            axpy_tap_3d(out_plane, in_plane, wk[(dz * k + dy) * k + dx], Dz, H,
                                        W, static_cast<long>(dz) - r, static_cast<long>(dy) - r,
                                        static_cast<long>(dx) - r);
            }
        }
    });
    return y;
}

// Gradient w.r.t. the convolution input.
template <typename T>
TensorT<T> conv_backward_data(const TensorT<T>& dy, const std::vector<T>& w, std::size_t in_ch,
                              std::size_t k) {
    const std::size_t n = dy.batch(), out_ch = dy.channels(), nd = dy.spatial_dims();
    const long r = static_cast<long>(k / 2);
    const std::size_t plane = dy.spatial_size();

    std::vector<std::size_t> in_shape = dy.shape;
    in_shape[1] = in_ch;
    TensorT<T> dx(in_shape);

    const long H = static_cast<long>(dy.shape[nd == 2 ? 2 : 3]);
    const long W = static_cast<long>(dy.shape[nd == 2 ? 3 : 4]);
    const long Dz = nd == 3 ? static_cast<long>(dy.shape[2]) : 1;

    parallel_for_each(n * in_ch, [&](std::size_t task) {
        const std::size_t bi = task / in_ch, ci = task % in_ch;
        T* dx_plane = dx.data.data() + (bi * in_ch + ci) * plane;
        for (std::size_t co = 0; co < out_ch; ++co) {
            const T* dy_plane = dy.data.data() + (bi * out_ch + co) * plane;
            const T* wk = w.data() + (co * in_ch + ci) * (nd == 2 ? k * k : k * k * k);
            if (nd == 2) {
                for (std::size_t dyk = 0; dyk < k; ++dyk)
                    for (std::size_t dxk = 0; dxk < k; ++dxk)
                        axpy_tap_2d(dx_plane, dy_plane, wk[dyk * k + dxk], H, W,
                                    r - static_cast<long>(dyk), r - static_cast<long>(dxk));
            } else {
                for (std::size_t dzk = 0; dzk < k; ++dzk)
                    for (std::size_t dyk = 0; dyk < k; ++dyk)
                        for (std::size_t dxk = 0; dxk < k; ++dxk)
                            axpy_tap_3d(dx_plane, dy_plane, wk[(dzk * k + dyk) * k + dxk], Dz, H,
                                        W, r - static_cast<long>(dzk), r - static_cast<long>(dyk),
                                        r - static_cast<long>(dxk));
            }
        }
    });
    return dx;
}

// Gradients w.r.t. weights and bias, accumulated over the batch in index
// order.
template <typename T>
void conv_backward_params(const TensorT<T>& x, const TensorT<T>& dy, std::size_t k,
                          std::vector<T>& dw, std::vector<T>& db) {
    const std::size_t n = x.batch(), in_ch = x.channels(), out_ch = dy.channels();
    const std::size_t nd = x.spatial_dims();
    const long r = static_cast<long>(k / 2);
    const std::size_t plane = x.spatial_size();
    const std::size_t taps = nd == 2 ? k * k : k * k * k;

    const long H = static_cast<long>(x.shape[nd == 2 ? 2 : 3]);
    const long W = static_cast<long>(x.shape[nd == 2 ? 3 : 4]);
    const long Dz = nd == 3 ? static_cast<long>(x.shape[2]) : 1;

    dw.assign(out_ch * in_ch * taps, T(0));
    db.assign(out_ch, T(0));

    parallel_for_each(out_ch, [&](std::size_t co) {
        for (std::size_t bi = 0; bi < n; ++bi) {
            const T* dy_plane = dy.data.data() + (bi * out_ch + co) * plane;
            double bsum = 0.0;
            for (std::size_t i = 0; i < plane; ++i) bsum += static_cast<double>(dy_plane[i]);
            db[co] += static_cast<T>(bsum);
            for (std::size_t ci = 0; ci < in_ch; ++ci) {
                const T* x_plane = x.data.data() + (bi * in_ch + ci) * plane;
                T* wk = dw.data() + (co * in_ch + ci) * taps;
                if (nd == 2) {
                    for (std::size_t dyk = 0; dyk < k; ++dyk)
                        for (std::size_t dxk = 0; dxk < k; ++dxk)
                            wk[dyk * k + dxk] +=
                                dot_tap_2d(dy_plane, x_plane, H, W,
                                           static_cast<long>(dyk) - r,
                                           static_cast<long>(dxk) - r);
                } else {
                    for (std::size_t dzk = 0; dzk < k; ++dzk)
                        for (std::size_t dyk = 0; dyk < k; ++dyk)
                            for (std::size_t dxk = 0; dxk < k; ++dxk)
                                wk[(dzk * k + dyk) * k + dxk] +=
                                    dot_tap_3d(dy_plane, x_plane, Dz, H, W,
                                               static_cast<long>(dzk) - r,
                                               static_cast<long>(dyk) - r,
                                               static_cast<long>(dxk) - r);
                }
            }
        }
    });
}

template <typename T>
void relu_inplace(TensorT<T>& t) {
    for (T& v : t.data)
        if (v < T(0)) v = T(0);
}

// Masks the gradient by the post-activation sign.
template <typename T>
void relu_backward_inplace(TensorT<T>& grad, const TensorT<T>& activated) {
    for (std::size_t i = 0; i < grad.data.size(); ++i)
        if (activated.data[i] <= T(0)) grad.data[i] = T(0);
}

// 2x max-pooling; argmax records the winning in-plane offset per output
// element (first-scanned wins ties).
template <typename T>
TensorT<T> maxpool2(const TensorT<T>& x, std::vector<std::uint32_t>& argmax) {
    const std::size_t n = x.batch(), c = x.channels(), nd = x.spatial_dims();
    std::vector<std::size_t> out_shape = x.shape;
    for (std::size_t ax = 2; ax < x.shape.size(); ++ax) out_shape[ax] = x.shape[ax] / 2;
    TensorT<T> y(out_shape);
    argmax.assign(y.size(), 0);

    const std::size_t in_plane = x.spatial_size(), out_plane = y.spatial_size();
    parallel_for_each(n * c, [&](std::size_t pc) {
        const T* src = x.data.data() + pc * in_plane;
        T* dst = y.data.data() + pc * out_plane;
        std::uint32_t* arg = argmax.data() + pc * out_plane;
        if (nd == 2) {
            const std::size_t H = x.shape[2], W = x.shape[3], OW = out_shape[3];
            for (std::size_t y2 = 0; y2 < out_shape[2]; ++y2)
                for (std::size_t x2 = 0; x2 < OW; ++x2) {
                    std::size_t best = (2 * y2) * W + 2 * x2;
                    T bv = src[best];
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            std::size_t idx = (2 * y2 + dy) * W + 2 * x2 + dx;
                            if (src[idx] > bv) {
                                bv = src[idx];
                                best = idx;
                            }
                        }
                    dst[y2 * OW + x2] = bv;
                    arg[y2 * OW + x2] = static_cast<std::uint32_t>(best);
                }
            (void)H;
        } else {
            const std::size_t H = x.shape[3], W = x.shape[4];
            const std::size_t OH = out_shape[3], OW = out_shape[4];
            for (std::size_t z2 = 0; z2 < out_shape[2]; ++z2)
                for (std::size_t y2 = 0; y2 < OH; ++y2)
                    for (std::size_t x2 = 0; x2 < OW; ++x2) {
                        std::size_t best = ((2 * z2) * H + 2 * y2) * W + 2 * x2;
                        T bv = src[best];
                        for (std::size_t dz = 0; dz < 2; ++dz)
                            for (std::size_t dy = 0; dy < 2; ++dy)
                                for (std::size_t dx = 0; dx < 2; ++dx) {
                                    std::size_t idx =
                                        ((2 * z2 + dz) * H + 2 * y2 + dy) * W + 2 * x2 + dx;
                                    if (src[idx] > bv) {
                                        bv = src[idx];
                                        best = idx;
                                    }
                                }
                        dst[(z2 * OH + y2) * OW + x2] = bv;
                        arg[(z2 * OH + y2) * OW + x2] = static_cast<std::uint32_t>(best);
                    }
        }
    });
    return y;
}

template <typename T>
TensorT<T> maxpool2_backward(const TensorT<T>& dy, const std::vector<std::uint32_t>& argmax,
                             const std::vector<std::size_t>& in_shape) {
    TensorT<T> dx(in_shape);
    const std::size_t n = dy.batch(), c = dy.channels();
    std::size_t in_plane = 1;
    for (std::size_t ax = 2; ax < in_shape.size(); ++ax) in_plane *= in_shape[ax];
    const std::size_t out_plane = dy.spatial_size();
    parallel_for_each(n * c, [&](std::size_t pc) {
        const T* src = dy.data.data() + pc * out_plane;
        const std::uint32_t* arg = argmax.data() + pc * out_plane;
        T* dst = dx.data.data() + pc * in_plane;
        for (std::size_t i = 0; i < out_plane; ++i) dst[arg[i]] += src[i];
    });
    return dx;
}

// Nearest-neighbor 2x upsampling.
template <typename T>
TensorT<T> upsample2(const TensorT<T>& x) {
    const std::size_t n = x.batch(), c = x.channels(), nd = x.spatial_dims();
    std::vector<std::size_t> out_shape = x.shape;
    for (std::size_t ax = 2; ax < x.shape.size(); ++ax) out_shape[ax] = x.shape[ax] * 2;
    TensorT<T> y(out_shape);
    const std::size_t in_plane = x.spatial_size(), out_plane = y.spatial_size();
    parallel_for_each(n * c, [&](std::size_t pc) {
        const T* src = x.data.data() + pc * in_plane;
        T* dst = y.data.data() + pc * out_plane;
        if (nd == 2) {
            const std::size_t OH = out_shape[2], OW = out_shape[3], W = x.shape[3];
            for (std::size_t yy = 0; yy < OH; ++yy)
                for (std::size_t xx = 0; xx < OW; ++xx)
                    dst[yy * OW + xx] = src[(yy / 2) * W + xx / 2];
        } else {
            const std::size_t OD = out_shape[2], OH = out_shape[3], OW = out_shape[4];
            const std::size_t H = x.shape[3], W = x.shape[4];
            for (std::size_t zz = 0; zz < OD; ++zz)
                for (std::size_t yy = 0; yy < OH; ++yy)
                    for (std::size_t xx = 0; xx < OW; ++xx)
                        dst[(zz * OH + yy) * OW + xx] = src[((zz / 2) * H + yy / 2) * W + xx / 2];
        }
    });
    return y;
}

template <typename T>
TensorT<T> upsample2_backward(const TensorT<T>& dy) {
    const std::size_t n = dy.batch(), c = dy.channels(), nd = dy.spatial_dims();
    std::vector<std::size_t> in_shape = dy.shape;
    for (std::size_t ax = 2; ax < dy.shape.size(); ++ax) in_shape[ax] = dy.shape[ax] / 2;
    TensorT<T> dx(in_shape);
    const std::size_t in_plane = dx.spatial_size(), out_plane = dy.spatial_size();
    parallel_for_each(n * c, [&](std::size_t pc) {
        const T* src = dy.data.data() + pc * out_plane;
        T* dst = dx.data.data() + pc * in_plane;
        if (nd == 2) {
            const std::size_t OH = dy.shape[2], OW = dy.shape[3], W = in_shape[3];
            for (std::size_t yy = 0; yy < OH; ++yy)
                for (std::size_t xx = 0; xx < OW; ++xx)
                    dst[(yy / 2) * W + xx / 2] += src[yy * OW + xx];
        } else {
            const std::size_t OD = dy.shape[2], OH = dy.shape[3], OW = dy.shape[4];
            const std::size_t H = in_shape[3], W = in_shape[4];
            for (std::size_t zz = 0; zz < OD; ++zz)
                for (std::size_t yy = 0; yy < OH; ++yy)
                    for (std::size_t xx = 0; xx < OW; ++xx)
                        dst[((zz / 2) * H + yy / 2) * W + xx / 2] +=
                            src[(zz * OH + yy) * OW + xx];
        }
    });
    return dx;
}

// Channel concatenation [a, b].
template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    std::vector<std::size_t> out_shape = a.shape;
    out_shape[1] = a.channels() + b.channels();
    TensorT<T> y(out_shape);
    const std::size_t n = a.batch(), plane = a.spatial_size();
    const std::size_t ca = a.channels(), cb = b.channels();
    for (std::size_t bi = 0; bi < n; ++bi) {
        std::copy(a.data.begin() + bi * ca * plane, a.data.begin() + (bi + 1) * ca * plane,
                  y.data.begin() + bi * (ca + cb) * plane);
        std::copy(b.data.begin() + bi * cb * plane, b.data.begin() + (bi + 1) * cb * plane,
                  y.data.begin() + (bi * (ca + cb) + ca) * plane);
    }
    return y;
}

template <typename T>
void split_channels(const TensorT<T>& d, std::size_t ca, TensorT<T>& da, TensorT<T>& db) {
    std::vector<std::size_t> sa = d.shape, sb = d.shape;
    sa[1] = ca;
    sb[1] = d.channels() - ca;
    da = TensorT<T>(sa);
    db = TensorT<T>(sb);
    const std::size_t n = d.batch(), plane = d.spatial_size(), cb = sb[1];
    for (std::size_t bi = 0; bi < n; ++bi) {
        std::copy(d.data.begin() + bi * (ca + cb) * plane,
                  d.data.begin() + (bi * (ca + cb) + ca) * plane,
                  da.data.begin() + bi * ca * plane);
        std::copy(d.data.begin() + (bi * (ca + cb) + ca) * plane,
                  d.data.begin() + (bi + 1) * (ca + cb) * plane,
                  db.data.begin() + bi * cb * plane);
    }
}

} // namespace tomopair::detail
