#include "tomopair/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "nn_ops.hpp"

namespace tomopair {

template <typename T>
TensorT<T>::TensorT(std::vector<std::size_t> shape_, T fill) : shape(std::move(shape_)) {
    require(shape.size() >= 3 && shape.size() <= 5, "Tensor: rank must be 3..5 (n, c, spatial)");
    std::size_t n = 1;
    for (std::size_t e : shape) {
        require(e > 0, "Tensor: zero extent");
        n *= e;
    }
    data.assign(n, fill);
}

template <typename T>
std::size_t TensorT<T>::spatial_size() const {
    std::size_t n = 1;
    for (std::size_t ax = 2; ax < shape.size(); ++ax) n *= shape[ax];
    return n;
}

template struct TensorT<float>;
template struct TensorT<double>;

void UNetConfig::validate() const {
    require(spatial_dims == 2 || spatial_dims == 3, "UNetConfig: spatial_dims must be 2 or 3");
    require(depth >= 1, "UNetConfig: depth must be >= 1");
    require(kernel >= 1 && kernel % 2 == 1, "UNetConfig: kernel must be odd");
    require(base_channels >= 1, "UNetConfig: base_channels must be >= 1");
}

UNetConfig default_unet_2d() { return UNetConfig{2, 2, 3, 16}; }
UNetConfig default_unet_3d() { return UNetConfig{3, 2, 3, 8}; }

std::vector<ConvShape> unet_layout(const UNetConfig& cfg) {
    cfg.validate();
    const std::size_t C = cfg.base_channels, D = cfg.depth, k = cfg.kernel;
    std::vector<ConvShape> layout;
    auto ch = [&](std::size_t level) { return C << level; };

    for (std::size_t L = 0; L < D; ++L) {
        std::size_t in = L == 0 ? 1 : ch(L - 1);
        layout.push_back({"enc" + std::to_string(L) + ".conv1", in, ch(L), k});
        layout.push_back({"enc" + std::to_string(L) + ".conv2", ch(L), ch(L), k});
    }
    layout.push_back({"mid.conv1", ch(D - 1), ch(D), k});
    layout.push_back({"mid.conv2", ch(D), ch(D), k});
    for (std::size_t i = 0; i < D; ++i) {
        std::size_t L = D - 1 - i;
        layout.push_back(
            {"dec" + std::to_string(L) + ".conv1", ch(L + 1) + ch(L), ch(L), k});
        layout.push_back({"dec" + std::to_string(L) + ".conv2", ch(L), ch(L), k});
    }
    layout.push_back({"head", ch(0), 1, 1});
    return layout;
}

UNetParams unet_init(const UNetConfig& cfg, Rng& rng) {
    UNetParams p;
    p.config = cfg;
    std::vector<ConvShape> layout = unet_layout(cfg);
    const std::size_t nd = cfg.spatial_dims;
    for (const ConvShape& cs : layout) {
        std::size_t taps = 1;
        for (std::size_t i = 0; i < nd; ++i) taps *= cs.kernel;
        std::size_t fan_in = cs.in_ch * taps;
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::vector<float> w(cs.out_ch * cs.in_ch * taps);
        for (float& v : w) v = static_cast<float>((rng.uniform() * 2.0 - 1.0) * limit);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(cs.out_ch, 0.0f);
    }
    return p;
}

UNetParamsT<double> to_double(const UNetParams& p) {
    UNetParamsT<double> d;
    d.config = p.config;
    d.norm = p.norm;
    d.standardized_output = p.standardized_output;
    for (const auto& w : p.weights) d.weights.emplace_back(w.begin(), w.end());
    for (const auto& b : p.biases) d.biases.emplace_back(b.begin(), b.end());
    return d;
}

namespace {

// Everything backward needs: conv inputs, post-activation conv outputs,
// pooling argmaxes and pre-pool shapes.
template <typename T>
struct Tape {
    std::vector<TensorT<T>> conv_in, conv_out;
    std::vector<std::vector<std::uint32_t>> pool_argmax;
    std::vector<std::vector<std::size_t>> pool_in_shape;
};

template <typename T>
void check_input(const TensorT<T>& x, const UNetConfig& cfg) {
    require(x.spatial_dims() == cfg.spatial_dims, "unet: tensor rank does not match config");
    require(x.channels() == 1, "unet: input must have one channel");
    const std::size_t granule = static_cast<std::size_t>(1) << cfg.depth;
    for (std::size_t ax = 2; ax < x.shape.size(); ++ax)
        require(x.shape[ax] % granule == 0,
                "unet: spatial extents must be divisible by 2^depth");
}

template <typename T>
TensorT<T> run_forward(const TensorT<T>& x, const UNetParamsT<T>& p, Tape<T>* tape) {
    const UNetConfig& cfg = p.config;
    check_input(x, cfg);
    std::vector<ConvShape> layout = unet_layout(cfg);
    require(p.weights.size() == layout.size() && p.biases.size() == layout.size(),
            "unet: parameter count does not match layout");

    auto conv_block = [&](const TensorT<T>& in, std::size_t li, bool relu) {
        const ConvShape& cs = layout[li];
        require(in.channels() == cs.in_ch, "unet: channel mismatch at " + cs.name);
        if (tape) tape->conv_in.push_back(in);
        TensorT<T> out = detail::conv_same(in, p.weights[li], p.biases[li], cs.out_ch, cs.kernel);
        if (relu) detail::relu_inplace(out);
        if (tape) tape->conv_out.push_back(out);
        return out;
    };

    const std::size_t D = cfg.depth;
    if (tape) {
        tape->pool_argmax.resize(D);
        tape->pool_in_shape.resize(D);
    }

    TensorT<T> cur = x;
    std::vector<TensorT<T>> skips;
    std::size_t li = 0;
    for (std::size_t L = 0; L < D; ++L) {
        cur = conv_block(cur, li++, true);
        cur = conv_block(cur, li++, true);
        skips.push_back(cur);
        std::vector<std::uint32_t> argmax;
        TensorT<T> pooled = detail::maxpool2(cur, argmax);
        if (tape) {
            tape->pool_argmax[L] = std::move(argmax);
            tape->pool_in_shape[L] = cur.shape;
        }
        cur = std::move(pooled);
    }
    cur = conv_block(cur, li++, true);
    cur = conv_block(cur, li++, true);
    for (std::size_t i = 0; i < D; ++i) {
        std::size_t L = D - 1 - i;
        TensorT<T> up = detail::upsample2(cur);
        TensorT<T> cat = detail::concat_channels(up, skips[L]);
        cur = conv_block(cat, li++, true);
        cur = conv_block(cur, li++, true);
    }
    return conv_block(cur, li, false); // linear head
}

} // namespace

template <typename T>
TensorT<T> unet_forward(const TensorT<T>& x, const UNetParamsT<T>& params) {
    return run_forward<T>(x, params, nullptr);
}

template TensorT<float> unet_forward<float>(const TensorT<float>&, const UNetParamsT<float>&);
template TensorT<double> unet_forward<double>(const TensorT<double>&,
                                              const UNetParamsT<double>&);

template <typename T>
double mse_loss(const TensorT<T>& pred, const TensorT<T>& target) {
    require(pred.shape == target.shape, "mse_loss: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

template double mse_loss<float>(const TensorT<float>&, const TensorT<float>&);
template double mse_loss<double>(const TensorT<double>&, const TensorT<double>&);

template <typename T>
TensorT<T> mse_loss_grad(const TensorT<T>& pred, const TensorT<T>& target) {
    require(pred.shape == target.shape, "mse_loss_grad: shape mismatch");
    TensorT<T> g(pred.shape);
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        g.data[i] = static_cast<T>(scale * (static_cast<double>(pred.data[i]) -
                                            static_cast<double>(target.data[i])));
    return g;
}

template TensorT<float> mse_loss_grad<float>(const TensorT<float>&, const TensorT<float>&);
template TensorT<double> mse_loss_grad<double>(const TensorT<double>&, const TensorT<double>&);

template <typename T>
UNetGradsT<T> unet_backward(const TensorT<T>& x, const TensorT<T>& target,
                            const UNetParamsT<T>& params, double* loss_out) {
    const UNetConfig& cfg = params.config;
    std::vector<ConvShape> layout = unet_layout(cfg);
    const std::size_t D = cfg.depth;

    Tape<T> tape;
    TensorT<T> pred = run_forward<T>(x, params, &tape);
    if (loss_out) *loss_out = mse_loss(pred, target);

    UNetGradsT<T> grads;
    grads.weights.resize(layout.size());
    grads.biases.resize(layout.size());

    auto conv_back = [&](std::size_t li, TensorT<T>& d, bool relu_before) {
        if (relu_before) detail::relu_backward_inplace(d, tape.conv_out[li]);
        detail::conv_backward_params(tape.conv_in[li], d, layout[li].kernel, grads.weights[li],
                                     grads.biases[li]);
        d = detail::conv_backward_data(d, params.weights[li], layout[li].in_ch,
                                       layout[li].kernel);
    };

    // Head (linear, no activation mask).
    std::size_t li = layout.size() - 1;
    TensorT<T> d = mse_loss_grad(pred, target);
    conv_back(li, d, false);

    // Decoder levels in reverse creation order (finest first).
    std::vector<TensorT<T>> skip_grads(D);
    for (std::size_t L = 0; L < D; ++L) {
        li -= 1;
        conv_back(li, d, true); // dec{L}.conv2
        li -= 1;
        conv_back(li, d, true); // dec{L}.conv1; d is now the concat gradient
        TensorT<T> d_up, d_skip;
        const std::size_t up_ch = cfg.base_channels << (L + 1);
        detail::split_channels(d, up_ch, d_up, d_skip);
        skip_grads[L] = std::move(d_skip);
        d = detail::upsample2_backward(d_up);
    }

    // Bottleneck.
    li -= 1;
    conv_back(li, d, true);
    li -= 1;
    conv_back(li, d, true);

    // Encoder levels, coarsest first.
    for (std::size_t i = 0; i < D; ++i) {
        std::size_t L = D - 1 - i;
        d = detail::maxpool2_backward(d, tape.pool_argmax[L], tape.pool_in_shape[L]);
        for (std::size_t j = 0; j < d.size(); ++j) d.data[j] += skip_grads[L].data[j];
        li -= 1;
        conv_back(li, d, true); // enc{L}.conv2
        li -= 1;
        conv_back(li, d, true); // enc{L}.conv1
    }
    require(li == 0, "unet_backward: layout walk mismatch");
    return grads;
}

template UNetGradsT<float> unet_backward<float>(const TensorT<float>&, const TensorT<float>&,
                                                const UNetParamsT<float>&, double*);
template UNetGradsT<double> unet_backward<double>(const TensorT<double>&, const TensorT<double>&,
                                                  const UNetParamsT<double>&, double*);

AdamState adam_init(const UNetParams& params) {
    AdamState s;
    for (const auto& w : params.weights) s.m.emplace_back(w.size(), 0.0f);
    for (const auto& b : params.biases) s.m.emplace_back(b.size(), 0.0f);
    s.v = s.m;
    s.step = 0;
    return s;
}

void adam_step(UNetParams& params, const UNetGradsT<float>& grads, AdamState& state,
               double learning_rate, double beta1, double beta2, double epsilon) {
    require(grads.weights.size() == params.weights.size() &&
                grads.biases.size() == params.biases.size(),
            "adam_step: gradient layout mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

    auto update = [&](std::vector<float>& p, const std::vector<float>& g, std::vector<float>& m,
                      std::vector<float>& v) {
        require(p.size() == g.size(), "adam_step: size mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            double gi = g[i];
            double mi = beta1 * m[i] + (1.0 - beta1) * gi;
            double vi = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            double mhat = mi / bc1;
            double vhat = vi / bc2;
            p[i] = static_cast<float>(p[i] - learning_rate * mhat / (std::sqrt(vhat) + epsilon));
        }
    };

    const std::size_t n = params.weights.size();
    for (std::size_t i = 0; i < n; ++i)
        update(params.weights[i], grads.weights[i], state.m[i], state.v[i]);
    for (std::size_t i = 0; i < n; ++i)
        update(params.biases[i], grads.biases[i], state.m[n + i], state.v[n + i]);
}

namespace {

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::vector<std::uint8_t>& buf, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<std::uint8_t>& buf, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(buf, u);
}

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw IoError("model: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
        pos += 8;
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    float f32() {
        std::uint32_t u = u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
};

constexpr std::uint32_t kModelVersion = 1;

} // namespace

// Byte layout (all little-endian):
//   "TPNN" | u32 version | u32 spatial_dims | u32 depth | u32 kernel |
//   u32 base_channels | u32 standardized_output | f64 mean | f64 std |
//   u32 n_convs | per conv: u32 out, u32 in, u32 kernel,
//                 f32 weights[out*in*kernel^dims], f32 bias[out]
std::vector<std::uint8_t> model_to_bytes(const UNetParams& params) {
    params.config.validate();
    std::vector<ConvShape> layout = unet_layout(params.config);
    require(params.weights.size() == layout.size(), "model: parameter/layout mismatch");

    std::vector<std::uint8_t> buf;
    buf.push_back('T');
    buf.push_back('P');
    buf.push_back('N');
    buf.push_back('N');
    put_u32(buf, kModelVersion);
    put_u32(buf, static_cast<std::uint32_t>(params.config.spatial_dims));
    put_u32(buf, static_cast<std::uint32_t>(params.config.depth));
    put_u32(buf, static_cast<std::uint32_t>(params.config.kernel));
    put_u32(buf, static_cast<std::uint32_t>(params.config.base_channels));
    put_u32(buf, params.standardized_output ? 1 : 0);
    put_f64(buf, params.norm.mean);
    put_f64(buf, params.norm.std);
    put_u32(buf, static_cast<std::uint32_t>(layout.size()));
    for (std::size_t li = 0; li < layout.size(); ++li) {
        const ConvShape& cs = layout[li];
        std::size_t taps = 1;
        for (std::size_t i = 0; i < params.config.spatial_dims; ++i) taps *= cs.kernel;
        require(params.weights[li].size() == cs.out_ch * cs.in_ch * taps &&
                    params.biases[li].size() == cs.out_ch,
                "model: array size mismatch at " + cs.name);
        put_u32(buf, static_cast<std::uint32_t>(cs.out_ch));
        put_u32(buf, static_cast<std::uint32_t>(cs.in_ch));
        put_u32(buf, static_cast<std::uint32_t>(cs.kernel));
        for (float v : params.weights[li]) put_f32(buf, v);
        for (float v : params.biases[li]) put_f32(buf, v);
    }
    return buf;
}

UNetParams model_from_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || bytes[0] != 'T' || bytes[1] != 'P' || bytes[2] != 'N' ||
        bytes[3] != 'N')
        throw IoError("model: missing TPNN magic");
    Reader r{bytes, 4};
    std::uint32_t version = r.u32();
    if (version != kModelVersion)
        throw IoError("model: unsupported format version " + std::to_string(version));

    UNetParams p;
    p.config.spatial_dims = r.u32();
    p.config.depth = r.u32();
    p.config.kernel = r.u32();
    p.config.base_channels = r.u32();
    p.standardized_output = r.u32() != 0;
    p.norm.mean = r.f64();
    p.norm.std = r.f64();
    p.config.validate();

    std::vector<ConvShape> layout = unet_layout(p.config);
    std::uint32_t n_convs = r.u32();
    if (n_convs != layout.size()) throw IoError("model: conv count does not match config");
    for (const ConvShape& cs : layout) {
        std::uint32_t out = r.u32(), in = r.u32(), k = r.u32();
        if (out != cs.out_ch || in != cs.in_ch || k != cs.kernel)
            throw IoError("model: conv shape mismatch at " + cs.name);
        std::size_t taps = 1;
        for (std::size_t i = 0; i < p.config.spatial_dims; ++i) taps *= cs.kernel;
        std::vector<float> w(static_cast<std::size_t>(out) * in * taps);
        for (float& v : w) v = r.f32();
        std::vector<float> b(out);
        for (float& v : b) v = r.f32();
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    if (r.pos != bytes.size()) throw IoError("model: trailing bytes");
    return p;
}

void save_model(const UNetParams& params, const std::string& path) {
    std::vector<std::uint8_t> bytes = model_to_bytes(params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("model: cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("model: write failed for '" + path + "'");
}

UNetParams load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("model: cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return model_from_bytes(bytes);
}

} // namespace tomopair
