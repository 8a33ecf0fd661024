#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tomopair/grid.hpp"

namespace tomopair {

// From-scratch trainable U-Net (2D and 3D): depth-two encoder/decoder with
// two conv+ReLU blocks per level, 2x max-pooling, nearest-neighbor
// upsampling with skip concatenation, and a linear single-voxel-kernel head.
// Trained with per-element MSE and Adam in the noisy-pair (Noise2Noise)
// regime. All operations are deterministic in their seeds and independent of
// the worker thread count.
//
// The forward/backward path is templated on the scalar type: float is the
// production path, double backs the finite-difference gradient tests.

template <typename T>
struct TensorT {
    std::vector<std::size_t> shape; // (batch, channels, spatial...)
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<std::size_t> shape_, T fill = T(0));

    std::size_t size() const { return data.size(); }
    std::size_t batch() const { return shape[0]; }
    std::size_t channels() const { return shape[1]; }
    std::size_t spatial_dims() const { return shape.size() - 2; }
    std::size_t spatial_size() const;
};

using Tensor = TensorT<float>;

struct UNetConfig {
    std::size_t spatial_dims = 2;
    std::size_t depth = 2;          // number of pooling levels
    std::size_t kernel = 3;         // odd
    std::size_t base_channels = 16; // doubles per level; 8 is the 3D default

    void validate() const;
};

UNetConfig default_unet_2d();
UNetConfig default_unet_3d();

// One convolution of the fixed enumeration order.
struct ConvShape {
    std::string name;
    std::size_t in_ch = 0, out_ch = 0, kernel = 3;
};

// enc{L}.conv{1,2}, mid.conv{1,2}, dec{L}.conv{1,2} (L descending), head.
// Decoder inputs concatenate [upsampled, skip] in that channel order.
std::vector<ConvShape> unet_layout(const UNetConfig& cfg);

template <typename T>
struct UNetParamsT {
    UNetConfig config;
    NormStats norm;                   // input standardization frozen at training time
    bool standardized_output = true;  // whether predictions live in standardized space
    std::vector<std::vector<T>> weights; // per layout conv: [out][in][k^d] row-major
    std::vector<std::vector<T>> biases;  // per layout conv: [out]
};

using UNetParams = UNetParamsT<float>;

// He-uniform weights, zero biases; deterministic in rng.
UNetParams unet_init(const UNetConfig& cfg, Rng& rng);

UNetParamsT<double> to_double(const UNetParams& p);

template <typename T>
struct UNetGradsT {
    std::vector<std::vector<T>> weights, biases;
};

// Spatial extents must be divisible by 2^depth; output has one channel and
// the input's spatial shape, no nonlinearity on the last layer.
template <typename T>
TensorT<T> unet_forward(const TensorT<T>& x, const UNetParamsT<T>& params);

// Mean over all elements of (pred - target)^2, accumulated in double.
template <typename T>
double mse_loss(const TensorT<T>& pred, const TensorT<T>& target);

// d(mse)/d(pred) = 2 (pred - target) / N.
template <typename T>
TensorT<T> mse_loss_grad(const TensorT<T>& pred, const TensorT<T>& target);

// Analytic gradients of mse_loss(unet_forward(x), target) for every
// parameter, in layout order. loss_out (optional) receives the loss.
template <typename T>
UNetGradsT<T> unet_backward(const TensorT<T>& x, const TensorT<T>& target,
                            const UNetParamsT<T>& params, double* loss_out = nullptr);

struct AdamState {
    std::vector<std::vector<float>> m, v;
    std::uint64_t step = 0;
};

AdamState adam_init(const UNetParams& params);

// Standard Adam with bias correction; increments state.step.
void adam_step(UNetParams& params, const UNetGradsT<float>& grads, AdamState& state,
               double learning_rate, double beta1, double beta2, double epsilon);

// Registered noisy patch pairs (input, target).
struct PairDataset {
    std::vector<std::pair<ScalarField, ScalarField>> items;
};

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 4;
    double learning_rate = 4e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    double validation_fraction = 0.10;
    std::uint64_t seed = 1;
    // Standardize targets with the same stats as inputs (on for noisy-pair
    // denoising; off when targets are already {0,1} masks).
    bool standardize_targets = true;
    bool verbose = false;
};

struct TrainHistory {
    std::vector<double> train_loss, val_loss; // one entry per epoch
};

struct TrainResult {
    UNetParams params;
    TrainHistory history;
    std::size_t n_train = 0, n_val = 0;
};

// Holds out ceil(validation_fraction * n) pairs (at least 1), standardizes
// with stats pooled over the training split, runs Adam over shuffled
// mini-batches. Deterministic in cfg.seed.
TrainResult train(const PairDataset& pairs, const UNetConfig& ucfg, const TrainConfig& tcfg);

// Half width of the output region a border can influence: the margin tiled
// prediction must overlap. 24 voxels for depth 2, kernel 3.
std::size_t receptive_field_margin(const UNetConfig& cfg);

// Tiled prediction over a field of any extent (reflect-padded internally to
// the pooling granularity). Tiles of core extent `tile` are expanded by
// `overlap` on every side; only tile cores are written, so seams vanish when
// overlap >= receptive_field_margin. Standardization and its inverse are
// applied around the network using the stats stored in params.
ScalarField predict(const ScalarField& f, const UNetParams& params,
                    std::vector<std::size_t> tile = {}, std::size_t overlap = 0);

// (predict(a) + predict(b)) / 2, averaged in raw intensity space.
ScalarField restore_pair(const ScalarField& a, const ScalarField& b, const UNetParams& params,
                         std::vector<std::size_t> tile = {}, std::size_t overlap = 0);

// Versioned binary model container: "TPNN" magic, format version, UNetConfig,
// output-space flag, normalization stats, then the parameter arrays in
// layout order (see save_model in nn.cpp for the exact byte layout).
void save_model(const UNetParams& params, const std::string& path);
UNetParams load_model(const std::string& path);
std::vector<std::uint8_t> model_to_bytes(const UNetParams& params);
UNetParams model_from_bytes(const std::vector<std::uint8_t>& bytes);

} // namespace tomopair
