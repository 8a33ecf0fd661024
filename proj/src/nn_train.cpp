#include <cmath>
#include <cstdio>

#include "nn_ops.hpp"
#include "tomopair/nn.hpp"
#include "tomopair/parallel.hpp"

namespace tomopair {

namespace {

void shuffle_indices(std::vector<std::size_t>& idx, Rng rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = rng.uniform_int(i);
        std::swap(idx[i - 1], idx[j]);
    }
}

// Batch tensor from standardized patches.
Tensor batch_tensor(const std::vector<const ScalarField*>& fields, const NormStats& norm,
                    bool standardize) {
    const ScalarField& first = *fields.front();
    std::vector<std::size_t> shape = {fields.size(), 1};
    shape.insert(shape.end(), first.shape.begin(), first.shape.end());
    Tensor t(shape);
    const double inv = standardize ? 1.0 / norm.std : 1.0;
    const double mean = standardize ? norm.mean : 0.0;
    std::size_t per = first.size();
    for (std::size_t i = 0; i < fields.size(); ++i)
        for (std::size_t j = 0; j < per; ++j)
            t.data[i * per + j] = static_cast<float>((fields[i]->data[j] - mean) * inv);
    return t;
}

} // namespace

TrainResult train(const PairDataset& pairs, const UNetConfig& ucfg, const TrainConfig& tcfg) {
    ucfg.validate();
    const std::size_t n = pairs.items.size();
    require(n >= 10, "train: need at least 10 pairs so the validation split is meaningful");
    require(tcfg.validation_fraction > 0.0 && tcfg.validation_fraction < 1.0,
            "train: validation_fraction must lie in (0, 1)");
    require(tcfg.epochs >= 1 && tcfg.batch_size >= 1, "train: epochs and batch_size must be >= 1");

    const std::vector<std::size_t>& patch_shape = pairs.items.front().first.shape;
    require(patch_shape.size() == ucfg.spatial_dims, "train: patch rank does not match network");
    const std::size_t granule = static_cast<std::size_t>(1) << ucfg.depth;
    for (std::size_t e : patch_shape)
        require(e % granule == 0, "train: patch extents must be divisible by 2^depth");
    for (const auto& [a, b] : pairs.items) {
        require(a.shape == patch_shape && b.shape == patch_shape,
                "train: all patches must share one shape");
        a.require_finite("train");
        b.require_finite("train");
    }

    Rng root(tcfg.seed);

    // Validation split: ceil(fraction * n), at least 1.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    shuffle_indices(perm, root.derive(0));
    std::size_t n_val = static_cast<std::size_t>(
        std::ceil(tcfg.validation_fraction * static_cast<double>(n)));
    n_val = std::max<std::size_t>(1, std::min(n_val, n - 1));
    std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + static_cast<long>(n_val));
    std::vector<std::size_t> train_idx(perm.begin() + static_cast<long>(n_val), perm.end());

    // Standardization stats pooled over the training split (inputs and, for
    // the denoising regime, targets — both sides are draws of one signal).
    double sum = 0.0, sumsq = 0.0;
    std::size_t count = 0;
    auto accumulate = [&](const ScalarField& f) {
        for (float v : f.data) {
            sum += v;
            sumsq += static_cast<double>(v) * v;
        }
        count += f.size();
    };
    for (std::size_t i : train_idx) {
        accumulate(pairs.items[i].first);
        if (tcfg.standardize_targets) accumulate(pairs.items[i].second);
    }
    NormStats norm;
    norm.mean = sum / static_cast<double>(count);
    norm.std = std::sqrt(std::max(0.0, sumsq / static_cast<double>(count) - norm.mean * norm.mean));
    if (norm.degenerate())
        throw DegenerateInputError("train: training patches are constant");

    Rng init_rng = root.derive(1);
    UNetParams params = unet_init(ucfg, init_rng);
    params.norm = norm;
    params.standardized_output = tcfg.standardize_targets;
    AdamState adam = adam_init(params);

    TrainResult result;
    result.n_train = train_idx.size();
    result.n_val = n_val;

    auto eval_loss = [&](const std::vector<std::size_t>& idx) {
        double loss = 0.0;
        for (std::size_t start = 0; start < idx.size(); start += tcfg.batch_size) {
            std::size_t stop = std::min(idx.size(), start + tcfg.batch_size);
            std::vector<const ScalarField*> xs, ts;
            for (std::size_t i = start; i < stop; ++i) {
                xs.push_back(&pairs.items[idx[i]].first);
                ts.push_back(&pairs.items[idx[i]].second);
            }
            Tensor x = batch_tensor(xs, norm, true);
            Tensor t = batch_tensor(ts, norm, tcfg.standardize_targets);
            Tensor pred = unet_forward(x, params);
            loss += mse_loss(pred, t) * static_cast<double>(stop - start);
        }
        return loss / static_cast<double>(idx.size());
    };

    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        std::vector<std::size_t> order = train_idx;
        shuffle_indices(order, root.derive(2 + epoch));

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
            std::size_t stop = std::min(order.size(), start + tcfg.batch_size);
            std::vector<const ScalarField*> xs, ts;
            for (std::size_t i = start; i < stop; ++i) {
                xs.push_back(&pairs.items[order[i]].first);
                ts.push_back(&pairs.items[order[i]].second);
            }
            Tensor x = batch_tensor(xs, norm, true);
            Tensor t = batch_tensor(ts, norm, tcfg.standardize_targets);
            double loss = 0.0;
            UNetGradsT<float> grads = unet_backward(x, t, params, &loss);
            adam_step(params, grads, adam, tcfg.learning_rate, tcfg.beta1, tcfg.beta2,
                      tcfg.epsilon);
            epoch_loss += loss * static_cast<double>(stop - start);
        }
        result.history.train_loss.push_back(epoch_loss /
                                            static_cast<double>(train_idx.size()));
        result.history.val_loss.push_back(eval_loss(val_idx));
        if (tcfg.verbose)
            std::printf("epoch %3zu  train %.6f  val %.6f\n", epoch + 1,
                        result.history.train_loss.back(), result.history.val_loss.back());
    }

    result.params = std::move(params);
    return result;
}

std::size_t receptive_field_margin(const UNetConfig& cfg) {
    cfg.validate();
    // Each conv widens the field by floor(k/2) at its working scale; pooling
    // and upsampling add up to one coarse voxel of misalignment per level.
    const std::size_t half = cfg.kernel / 2;
    std::size_t margin = 0;
    for (std::size_t L = 0; L < cfg.depth; ++L)
        margin += 2 * half * (static_cast<std::size_t>(1) << L) * 2; // enc + dec at level L
    margin += 2 * half * (static_cast<std::size_t>(1) << cfg.depth); // bottleneck
    margin += static_cast<std::size_t>(1) << cfg.depth;
    const std::size_t granule = static_cast<std::size_t>(1) << cfg.depth;
    return ((margin + granule - 1) / granule) * granule;
}

namespace {

std::size_t round_up(std::size_t v, std::size_t g) { return ((v + g - 1) / g) * g; }

// Reflect-pad at the high end of every axis to a multiple of `granule`.
ScalarField pad_to_granule(const ScalarField& f, std::size_t granule) {
    std::vector<std::size_t> padded(f.ndim());
    bool needed = false;
    for (std::size_t ax = 0; ax < f.ndim(); ++ax) {
        padded[ax] = round_up(f.shape[ax], granule);
        if (padded[ax] != f.shape[ax]) needed = true;
    }
    if (!needed) return f;

    ScalarField out(padded);
    out.voxel_size = f.voxel_size;
    auto reflect = [](std::size_t i, std::size_t n) {
        if (i < n) return i;
        std::size_t over = i - n + 1;
        return over >= n ? std::size_t(0) : n - 1 - over;
    };
    if (f.ndim() == 2) {
        for (std::size_t y = 0; y < padded[0]; ++y)
            for (std::size_t x = 0; x < padded[1]; ++x)
                out.at2(y, x) = f.at2(reflect(y, f.shape[0]), reflect(x, f.shape[1]));
    } else {
        for (std::size_t z = 0; z < padded[0]; ++z)
            for (std::size_t y = 0; y < padded[1]; ++y)
                for (std::size_t x = 0; x < padded[2]; ++x)
                    out.at3(z, y, x) = f.at3(reflect(z, f.shape[0]), reflect(y, f.shape[1]),
                                             reflect(x, f.shape[2]));
    }
    return out;
}

} // namespace

ScalarField predict(const ScalarField& f, const UNetParams& params,
                    std::vector<std::size_t> tile, std::size_t overlap) {
    const UNetConfig& cfg = params.config;
    cfg.validate();
    require(f.ndim() == cfg.spatial_dims, "predict: field rank does not match network");
    if (params.norm.degenerate())
        throw DegenerateInputError("predict: model carries degenerate normalization stats");

    const std::size_t granule = static_cast<std::size_t>(1) << cfg.depth;
    ScalarField padded = pad_to_granule(f, granule);

    if (tile.empty()) tile = padded.shape;
    require(tile.size() == f.ndim(), "predict: tile rank mismatch");
    for (std::size_t& t : tile) {
        require(t >= granule, "predict: tile smaller than 2^depth");
        t = round_up(t, granule);
    }

    const std::size_t margin = receptive_field_margin(cfg);
    std::vector<std::size_t> cores_per_axis(f.ndim());
    std::size_t n_tiles = 1;
    bool tiled = false;
    for (std::size_t ax = 0; ax < f.ndim(); ++ax) {
        cores_per_axis[ax] = (padded.shape[ax] + tile[ax] - 1) / tile[ax];
        n_tiles *= cores_per_axis[ax];
        if (cores_per_axis[ax] > 1) tiled = true;
    }
    if (tiled) {
        if (overlap == 0) overlap = margin;
        require(overlap >= margin,
                "predict: overlap smaller than the receptive-field margin (" +
                    std::to_string(margin) + ")");
        overlap = round_up(overlap, granule);
    }

    ScalarField out(padded.shape);
    out.voxel_size = f.voxel_size;

    parallel_for_each(n_tiles, [&](std::size_t tidx) {
        // Decompose the tile index into per-axis core positions.
        std::vector<std::size_t> core_lo(f.ndim()), core_hi(f.ndim());
        std::vector<std::size_t> ext_lo(f.ndim()), ext_hi(f.ndim());
        std::size_t rem = tidx;
        for (std::size_t ax = f.ndim(); ax-- > 0;) {
            std::size_t pos = rem % cores_per_axis[ax];
            rem /= cores_per_axis[ax];
            core_lo[ax] = pos * tile[ax];
            core_hi[ax] = std::min(padded.shape[ax], core_lo[ax] + tile[ax]);
            ext_lo[ax] = core_lo[ax] >= overlap ? core_lo[ax] - overlap : 0;
            ext_hi[ax] = std::min(padded.shape[ax], core_hi[ax] + overlap);
        }

        std::vector<std::size_t> ext_shape(f.ndim());
        for (std::size_t ax = 0; ax < f.ndim(); ++ax) ext_shape[ax] = ext_hi[ax] - ext_lo[ax];
        std::vector<std::size_t> tshape = {1, 1};
        tshape.insert(tshape.end(), ext_shape.begin(), ext_shape.end());
        Tensor x(tshape);

        const double inv = 1.0 / params.norm.std;
        if (f.ndim() == 2) {
            std::size_t i = 0;
            for (std::size_t y = ext_lo[0]; y < ext_hi[0]; ++y)
                for (std::size_t xx = ext_lo[1]; xx < ext_hi[1]; ++xx, ++i)
                    x.data[i] =
                        static_cast<float>((padded.at2(y, xx) - params.norm.mean) * inv);
        } else {
            std::size_t i = 0;
            for (std::size_t z = ext_lo[0]; z < ext_hi[0]; ++z)
                for (std::size_t y = ext_lo[1]; y < ext_hi[1]; ++y)
                    for (std::size_t xx = ext_lo[2]; xx < ext_hi[2]; ++xx, ++i)
                        x.data[i] = static_cast<float>((padded.at3(z, y, xx) - params.norm.mean) *
                                                       inv);
        }

        Tensor pred = unet_forward(x, params);

        auto denorm = [&](float v) {
            return params.standardized_output
                       ? static_cast<float>(v * params.norm.std + params.norm.mean)
                       : v;
        };
        if (f.ndim() == 2) {
            for (std::size_t y = core_lo[0]; y < core_hi[0]; ++y)
                for (std::size_t xx = core_lo[1]; xx < core_hi[1]; ++xx)
                    out.at2(y, xx) = denorm(
                        pred.data[(y - ext_lo[0]) * ext_shape[1] + (xx - ext_lo[1])]);
        } else {
            for (std::size_t z = core_lo[0]; z < core_hi[0]; ++z)
                for (std::size_t y = core_lo[1]; y < core_hi[1]; ++y)
                    for (std::size_t xx = core_lo[2]; xx < core_hi[2]; ++xx)
                        out.at3(z, y, xx) = denorm(
                            pred.data[((z - ext_lo[0]) * ext_shape[1] + (y - ext_lo[1])) *
                                          ext_shape[2] +
                                      (xx - ext_lo[2])]);
        }
    });

    if (padded.shape == f.shape) return out;
    ScalarField cropped(f.shape);
    cropped.voxel_size = f.voxel_size;
    if (f.ndim() == 2) {
        for (std::size_t y = 0; y < f.shape[0]; ++y)
            for (std::size_t x = 0; x < f.shape[1]; ++x) cropped.at2(y, x) = out.at2(y, x);
    } else {
        for (std::size_t z = 0; z < f.shape[0]; ++z)
            for (std::size_t y = 0; y < f.shape[1]; ++y)
                for (std::size_t x = 0; x < f.shape[2]; ++x)
                    cropped.at3(z, y, x) = out.at3(z, y, x);
    }
    return cropped;
}

ScalarField restore_pair(const ScalarField& a, const ScalarField& b, const UNetParams& params,
                         std::vector<std::size_t> tile, std::size_t overlap) {
    require(same_shape(a, b), "restore_pair: fields must share one shape");
    ScalarField pa = predict(a, params, tile, overlap);
    ScalarField pb = predict(b, params, tile, overlap);
    ScalarField out(pa.shape);
    out.voxel_size = pa.voxel_size;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = static_cast<float>(
            0.5 * (static_cast<double>(pa.data[i]) + static_cast<double>(pb.data[i])));
    return out;
}

} // namespace tomopair
