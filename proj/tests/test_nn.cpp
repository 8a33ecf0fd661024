#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tomopair/nn.hpp"
#include "tomopair/parallel.hpp"

using namespace tomopair;

namespace {

UNetConfig tiny_2d() { return UNetConfig{2, 2, 3, 2}; }
UNetConfig tiny_3d() { return UNetConfig{3, 2, 3, 1}; }

TensorT<double> random_tensor(const std::vector<std::size_t>& shape, std::uint64_t seed,
                              double scale = 1.0) {
    TensorT<double> t(shape);
    Rng rng(seed);
    for (double& v : t.data) v = rng.normal() * scale;
    return t;
}

// Central finite differences over every parameter, double path. The network
// state is prepared so no pre-activation sits within reach of the +-h
// perturbation of the ReLU kink (biases of magnitude ~1 against damped
// weights); at the kink the central difference probes the corner rather than
// a derivative and the comparison is meaningless.
double fd_worst_rel_error(const UNetConfig& cfg, const std::vector<std::size_t>& spatial,
                          std::uint64_t seed, double h = 1e-3) {
    Rng rng(seed);
    UNetParams pf = unet_init(cfg, rng);
    for (auto& w : pf.weights)
        for (float& v : w) v = static_cast<float>(v * 0.25);
    std::size_t flip = 0;
    for (auto& b : pf.biases)
        for (float& v : b)
            v = static_cast<float>((flip++ % 2 == 0 ? 1.0 : -1.0) *
                                   (0.7 + 0.3 * rng.uniform()));
    UNetParamsT<double> p = to_double(pf);

    std::vector<std::size_t> shape = {1, 1};
    shape.insert(shape.end(), spatial.begin(), spatial.end());
    TensorT<double> x = random_tensor(shape, seed + 1, 0.6);
    TensorT<double> target = random_tensor(shape, seed + 2);

    UNetGradsT<double> grads = unet_backward(x, target, p);

    auto loss_at = [&]() { return mse_loss(unet_forward(x, p), target); };
    double worst = 0.0;
    auto check_array = [&](std::vector<double>& arr, const std::vector<double>& g) {
        for (std::size_t i = 0; i < arr.size(); ++i) {
            double saved = arr[i];
            arr[i] = saved + h;
            double lp = loss_at();
            arr[i] = saved - h;
            double lm = loss_at();
            arr[i] = saved;
            double fd = (lp - lm) / (2.0 * h);
            double rel = std::abs(g[i] - fd) / (std::abs(g[i]) + 1e-8);
            worst = std::max(worst, rel);
        }
    };
    for (std::size_t li = 0; li < p.weights.size(); ++li) {
        check_array(p.weights[li], grads.weights[li]);
        check_array(p.biases[li], grads.biases[li]);
    }
    return worst;
}

PairDataset noisy_pairs(std::size_t count, std::size_t extent, double sigma,
                        std::uint64_t seed) {
    PairDataset ds;
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        ScalarField clean({extent, extent});
        // smooth random signal: a few gaussian bumps
        for (int b = 0; b < 4; ++b) {
            double cy = rng.uniform() * extent, cx = rng.uniform() * extent;
            double s = 3.0 + 3.0 * rng.uniform();
            for (std::size_t y = 0; y < extent; ++y)
                for (std::size_t x = 0; x < extent; ++x)
                    clean.at2(y, x) += static_cast<float>(
                        std::exp(-((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (2 * s * s)));
        }
        ScalarField a = clean, b = clean;
        for (float& v : a.data) v += static_cast<float>(sigma * rng.normal());
        for (float& v : b.data) v += static_cast<float>(sigma * rng.normal());
        ds.items.emplace_back(std::move(a), std::move(b));
    }
    return ds;
}

} // namespace

TEST_CASE("layout: depth-2 channel plan and enumeration order") {
    std::vector<ConvShape> layout = unet_layout(UNetConfig{2, 2, 3, 16});
    REQUIRE(layout.size() == 11);
    CHECK(layout[0].name == "enc0.conv1");
    CHECK(layout[0].in_ch == 1);
    CHECK(layout[0].out_ch == 16);
    CHECK(layout[4].name == "mid.conv1");
    CHECK(layout[4].out_ch == 64);
    CHECK(layout[6].name == "dec1.conv1");
    CHECK(layout[6].in_ch == 96); // 64 upsampled + 32 skip
    CHECK(layout[10].name == "head");
    CHECK(layout[10].kernel == 1);
    CHECK(layout[10].out_ch == 1);
}

TEST_CASE("forward: zero parameters give zero output") {
    UNetConfig cfg = tiny_2d();
    Rng rng(1);
    UNetParams p = unet_init(cfg, rng);
    for (auto& w : p.weights) std::fill(w.begin(), w.end(), 0.0f);
    for (auto& b : p.biases) std::fill(b.begin(), b.end(), 0.0f);
    Tensor x({1, 1, 16, 16});
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = static_cast<float>(i % 7) - 3.0f;
    Tensor y = unet_forward(x, p);
    REQUIRE(y.shape == x.shape);
    for (float v : y.data) CHECK(v == 0.0f);
}

TEST_CASE("forward: linear head can output negative values") {
    UNetConfig cfg = tiny_2d();
    Rng rng(2);
    UNetParams p = unet_init(cfg, rng);
    for (auto& w : p.weights) std::fill(w.begin(), w.end(), 0.0f);
    for (auto& b : p.biases) std::fill(b.begin(), b.end(), 0.0f);
    p.biases.back()[0] = -2.5f; // head bias
    Tensor x({1, 1, 16, 16}, 1.0f);
    Tensor y = unet_forward(x, p);
    for (float v : y.data) CHECK(v == -2.5f);
}

TEST_CASE("forward: output shape equals input shape in 2D and 3D") {
    Rng rng(3);
    UNetParams p2 = unet_init(tiny_2d(), rng);
    Tensor x2({2, 1, 16, 24}, 0.5f);
    CHECK(unet_forward(x2, p2).shape == x2.shape);

    UNetParams p3 = unet_init(tiny_3d(), rng);
    Tensor x3({1, 1, 8, 12, 16}, 0.5f);
    CHECK(unet_forward(x3, p3).shape == x3.shape);
}

TEST_CASE("forward: indivisible extents rejected") {
    Rng rng(4);
    UNetParams p = unet_init(tiny_2d(), rng);
    Tensor x({1, 1, 18, 16}, 0.0f);
    CHECK_THROWS_AS(unet_forward(x, p), PreconditionError);
}

TEST_CASE("mse: simple closed forms and brute force agreement") {
    Tensor a({1, 1, 2, 4});
    Tensor b({1, 1, 2, 4});
    for (std::size_t i = 0; i < 8; ++i) a.data[i] = b.data[i] = static_cast<float>(i);
    CHECK(mse_loss(a, b) == 0.0);

    for (float& v : a.data) v += 1.0f;
    CHECK(mse_loss(a, b) == doctest::Approx(1.0));

    Rng rng(5);
    for (std::size_t i = 0; i < 8; ++i) {
        a.data[i] = static_cast<float>(rng.normal());
        b.data[i] = static_cast<float>(rng.normal());
    }
    double brute = 0.0;
    for (std::size_t i = 0; i < 8; ++i)
        brute += (static_cast<double>(a.data[i]) - b.data[i]) *
                 (static_cast<double>(a.data[i]) - b.data[i]);
    brute /= 8.0;
    CHECK(std::abs(mse_loss(a, b) - brute) < 1e-7);

    Tensor c({1, 1, 2, 2});
    CHECK_THROWS_AS(mse_loss(a, c), PreconditionError);
}

TEST_CASE("backward: finite-difference agreement on the tiny 2D config") {
    double worst = fd_worst_rel_error(tiny_2d(), {16, 16}, 101);
    CHECK(worst < 1e-4);
}

TEST_CASE("backward: finite-difference agreement on the tiny 3D config") {
    double worst = fd_worst_rel_error(tiny_3d(), {8, 8, 8}, 202);
    CHECK(worst < 1e-4);
}

TEST_CASE("backward: directional derivative on the natural init") {
    // He-init, zero biases: mixed active/clamped masks within planes. The
    // full gradient is compared against one finite difference along a random
    // parameter direction.
    UNetConfig cfg = tiny_2d();
    Rng rng(55);
    UNetParamsT<double> p = to_double(unet_init(cfg, rng));
    TensorT<double> x = random_tensor({2, 1, 16, 16}, 56);
    TensorT<double> t = random_tensor({2, 1, 16, 16}, 57);

    UNetGradsT<double> g = unet_backward(x, t, p);

    Rng dir(58);
    UNetGradsT<double> v;
    double dot = 0.0;
    for (std::size_t li = 0; li < p.weights.size(); ++li) {
        std::vector<double> vw(p.weights[li].size()), vb(p.biases[li].size());
        for (std::size_t i = 0; i < vw.size(); ++i) {
            vw[i] = dir.normal();
            dot += vw[i] * g.weights[li][i];
        }
        for (std::size_t i = 0; i < vb.size(); ++i) {
            vb[i] = dir.normal();
            dot += vb[i] * g.biases[li][i];
        }
        v.weights.push_back(std::move(vw));
        v.biases.push_back(std::move(vb));
    }

    const double h = 1e-6;
    auto shifted = [&](double s) {
        UNetParamsT<double> q = p;
        for (std::size_t li = 0; li < q.weights.size(); ++li) {
            for (std::size_t i = 0; i < q.weights[li].size(); ++i)
                q.weights[li][i] += s * v.weights[li][i];
            for (std::size_t i = 0; i < q.biases[li].size(); ++i)
                q.biases[li][i] += s * v.biases[li][i];
        }
        return mse_loss(unet_forward(x, q), t);
    };
    double fd = (shifted(h) - shifted(-h)) / (2.0 * h);
    CHECK(std::abs(fd - dot) / (std::abs(dot) + 1e-12) < 1e-6);
}

TEST_CASE("backward: zero everything gives zero gradients") {
    UNetConfig cfg = tiny_2d();
    Rng rng(6);
    UNetParams pf = unet_init(cfg, rng);
    for (auto& w : pf.weights) std::fill(w.begin(), w.end(), 0.0f);
    UNetParamsT<double> p = to_double(pf);
    TensorT<double> x({1, 1, 16, 16}, 0.0);
    TensorT<double> t({1, 1, 16, 16}, 0.0);
    UNetGradsT<double> g = unet_backward(x, t, p);
    for (const auto& w : g.weights)
        for (double v : w) CHECK(v == 0.0);
    for (const auto& b : g.biases)
        for (double v : b) CHECK(v == 0.0);
}

TEST_CASE("backward: head bias gradient equals twice the mean residual") {
    UNetConfig cfg = tiny_2d();
    Rng rng(7);
    UNetParams pf = unet_init(cfg, rng);
    UNetParamsT<double> p = to_double(pf);
    TensorT<double> x = random_tensor({1, 1, 16, 16}, 8);
    TensorT<double> t = random_tensor({1, 1, 16, 16}, 9);

    TensorT<double> pred = unet_forward(x, p);
    double mean_residual = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) mean_residual += pred.data[i] - t.data[i];
    mean_residual /= static_cast<double>(pred.size());

    UNetGradsT<double> g = unet_backward(x, t, p);
    CHECK(g.biases.back()[0] == doctest::Approx(2.0 * mean_residual).epsilon(1e-9));
}

TEST_CASE("translation covariance: shifting by the pooling period shifts the output") {
    UNetConfig cfg = tiny_2d();
    Rng rng(10);
    UNetParamsT<double> p = to_double(unet_init(cfg, rng));

    TensorT<double> x = random_tensor({1, 1, 64, 64}, 11, 0.5);
    TensorT<double> xs({1, 1, 64, 64});
    const long shift = 4; // pooling period for depth 2
    for (long y = 0; y < 64; ++y)
        for (long xx = 0; xx < 64; ++xx)
            xs.data[((y + shift) % 64) * 64 + (xx + shift) % 64] = x.data[y * 64 + xx];

    TensorT<double> y0 = unet_forward(x, p);
    TensorT<double> y1 = unet_forward(xs, p);
    const long margin = 28; // receptive field + shift
    for (long y = margin; y < 64 - margin; ++y)
        for (long xx = margin; xx < 64 - margin; ++xx) {
            double a = y0.data[y * 64 + xx];
            double b = y1.data[(y + shift) * 64 + (xx + shift)];
            CHECK(std::abs(a - b) < 1e-5);
        }
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    Rng rng(12);
    UNetParams p = unet_init(tiny_2d(), rng);
    UNetParams before = p;
    AdamState st = adam_init(p);
    UNetGradsT<float> g;
    for (const auto& w : p.weights) g.weights.emplace_back(w.size(), 0.0f);
    for (const auto& b : p.biases) g.biases.emplace_back(b.size(), 0.0f);
    adam_step(p, g, st, 1e-3, 0.9, 0.999, 1e-7);
    for (std::size_t i = 0; i < p.weights.size(); ++i) CHECK(p.weights[i] == before.weights[i]);
}

TEST_CASE("adam: beta1=beta2=0 first step is signed normalized descent") {
    Rng rng(13);
    UNetParams p = unet_init(tiny_2d(), rng);
    UNetParams before = p;
    AdamState st = adam_init(p);
    UNetGradsT<float> g;
    Rng grng(14);
    for (const auto& w : p.weights) {
        std::vector<float> gw(w.size());
        for (float& v : gw) v = static_cast<float>(grng.normal());
        g.weights.push_back(std::move(gw));
    }
    for (const auto& b : p.biases) g.biases.emplace_back(b.size(), 0.25f);
    const double lr = 1e-3, eps = 1e-7;
    adam_step(p, g, st, lr, 0.0, 0.0, eps);
    for (std::size_t li = 0; li < p.weights.size(); ++li)
        for (std::size_t i = 0; i < p.weights[li].size(); ++i) {
            double gi = g.weights[li][i];
            double expected = before.weights[li][i] - lr * gi / (std::abs(gi) + eps);
            CHECK(p.weights[li][i] == doctest::Approx(expected).epsilon(1e-6));
        }
}

TEST_CASE("adam: constant gradient settles at step size lr") {
    Rng rng(15);
    UNetParams p = unet_init(tiny_2d(), rng);
    AdamState st = adam_init(p);
    UNetGradsT<float> g;
    for (const auto& w : p.weights) g.weights.emplace_back(w.size(), 0.37f);
    for (const auto& b : p.biases) g.biases.emplace_back(b.size(), 0.37f);
    const double lr = 1e-3;
    float prev = p.weights[0][0];
    double step_size = 0.0;
    for (int i = 0; i < 300; ++i) {
        adam_step(p, g, st, lr, 0.9, 0.999, 1e-7);
        step_size = std::abs(p.weights[0][0] - prev);
        prev = p.weights[0][0];
    }
    CHECK(step_size == doctest::Approx(lr).epsilon(0.02));
}

TEST_CASE("train: validation split is ceil(0.1 n)") {
    PairDataset ds;
    Rng rng(16);
    for (int i = 0; i < 1000; ++i) {
        ScalarField a({8, 8}), b({8, 8});
        for (float& v : a.data) v = static_cast<float>(rng.normal());
        for (float& v : b.data) v = static_cast<float>(rng.normal());
        ds.items.emplace_back(std::move(a), std::move(b));
    }
    TrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.batch_size = 64;
    tcfg.seed = 3;
    TrainResult r = train(ds, tiny_2d(), tcfg);
    CHECK(r.n_train == 900);
    CHECK(r.n_val == 100);
    CHECK(r.history.train_loss.size() == 1);
    CHECK(r.history.val_loss.size() == 1);
}

TEST_CASE("train: deterministic in seed") {
    PairDataset ds = noisy_pairs(12, 16, 0.3, 17);
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.batch_size = 4;
    tcfg.seed = 5;
    TrainResult r1 = train(ds, tiny_2d(), tcfg);
    TrainResult r2 = train(ds, tiny_2d(), tcfg);
    for (std::size_t i = 0; i < r1.params.weights.size(); ++i)
        CHECK(r1.params.weights[i] == r2.params.weights[i]);
    CHECK(r1.history.val_loss == r2.history.val_loss);
}

TEST_CASE("train: noisy-pair loss drops") {
    PairDataset ds = noisy_pairs(50, 32, 0.5, 18);
    TrainConfig tcfg;
    tcfg.epochs = 8;
    tcfg.batch_size = 4;
    tcfg.learning_rate = 1e-3;
    tcfg.seed = 7;
    UNetConfig cfg{2, 2, 3, 4};
    TrainResult r = train(ds, cfg, tcfg);
    CHECK(r.history.val_loss.back() < r.history.val_loss.front() * 0.9);
}

TEST_CASE("train: too few pairs rejected") {
    PairDataset ds = noisy_pairs(8, 16, 0.3, 19);
    CHECK_THROWS_AS(train(ds, tiny_2d(), TrainConfig{}), PreconditionError);
}

TEST_CASE("predict: tiled equals untiled when overlap covers the margin") {
    UNetConfig cfg = tiny_2d();
    Rng rng(20);
    UNetParams p = unet_init(cfg, rng);
    p.norm = {0.0, 1.0};

    ScalarField f({128, 128});
    Rng frng(21);
    for (float& v : f.data) v = static_cast<float>(frng.normal() * 0.5);

    ScalarField whole = predict(f, p);
    ScalarField tiled = predict(f, p, {64, 64}, receptive_field_margin(cfg));
    double worst = 0.0;
    for (std::size_t i = 0; i < whole.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(whole.data[i]) - tiled.data[i]));
    CHECK(worst < 1e-5);
}

TEST_CASE("predict: margin is 24 for depth 2 kernel 3") {
    CHECK(receptive_field_margin(tiny_2d()) == 24);
}

TEST_CASE("predict: arbitrary extents survive via reflect padding") {
    UNetConfig cfg = tiny_2d();
    Rng rng(22);
    UNetParams p = unet_init(cfg, rng);
    p.norm = {0.0, 1.0};
    ScalarField f({30, 45}, 0.25f);
    ScalarField out = predict(f, p);
    CHECK(out.shape == f.shape);
    out.require_finite("test");
}

TEST_CASE("predict: undersized tile and overlap rejected") {
    UNetConfig cfg = tiny_2d();
    Rng rng(23);
    UNetParams p = unet_init(cfg, rng);
    p.norm = {0.0, 1.0};
    ScalarField f({64, 64}, 0.5f);
    CHECK_THROWS_AS(predict(f, p, {2, 2}), PreconditionError);
    CHECK_THROWS_AS(predict(f, p, {16, 16}, 8), PreconditionError);
}

TEST_CASE("restore_pair: symmetric average of the two predictions") {
    UNetConfig cfg = tiny_2d();
    Rng rng(24);
    UNetParams p = unet_init(cfg, rng);
    p.norm = {0.0, 1.0};
    ScalarField a({32, 32}), b({32, 32});
    Rng frng(25);
    for (float& v : a.data) v = static_cast<float>(frng.normal());
    for (float& v : b.data) v = static_cast<float>(frng.normal());

    ScalarField ab = restore_pair(a, b, p);
    ScalarField ba = restore_pair(b, a, p);
    CHECK(ab.data == ba.data);

    ScalarField manual(ab.shape);
    ScalarField pa = predict(a, p), pb = predict(b, p);
    for (std::size_t i = 0; i < manual.size(); ++i)
        manual.data[i] = 0.5f * (pa.data[i] + pb.data[i]);
    for (std::size_t i = 0; i < ab.size(); ++i)
        CHECK(std::abs(ab.data[i] - manual.data[i]) < 1e-7);

    ScalarField same = restore_pair(a, a, p);
    for (std::size_t i = 0; i < same.size(); ++i)
        CHECK(same.data[i] == doctest::Approx(pa.data[i]).epsilon(1e-7));
}

TEST_CASE("model io: bytes round-trip bitwise") {
    Rng rng(26);
    UNetParams p = unet_init(UNetConfig{3, 2, 3, 2}, rng);
    p.norm = {1.25, 3.5};
    p.standardized_output = false;
    std::vector<std::uint8_t> bytes = model_to_bytes(p);
    UNetParams q = model_from_bytes(bytes);
    CHECK(q.config.spatial_dims == 3);
    CHECK(q.config.base_channels == 2);
    CHECK(q.norm.mean == p.norm.mean);
    CHECK(q.norm.std == p.norm.std);
    CHECK(q.standardized_output == false);
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
        CHECK(q.weights[i] == p.weights[i]);
        CHECK(q.biases[i] == p.biases[i]);
    }
    CHECK(model_to_bytes(q) == bytes);

    bytes[0] = 'X';
    CHECK_THROWS_AS(model_from_bytes(bytes), IoError);
}

TEST_CASE("training is independent of the thread count") {
    PairDataset ds = noisy_pairs(12, 16, 0.3, 27);
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.batch_size = 3;
    tcfg.seed = 9;
    set_thread_count(1);
    TrainResult r1 = train(ds, tiny_2d(), tcfg);
    set_thread_count(2);
    TrainResult r2 = train(ds, tiny_2d(), tcfg);
    set_thread_count(1);
    for (std::size_t i = 0; i < r1.params.weights.size(); ++i)
        CHECK(r1.params.weights[i] == r2.params.weights[i]);
}
