#include "config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

namespace tomopair {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

std::vector<std::size_t> get_extents(const json& obj, const char* key,
                                     std::vector<std::size_t> fallback) {
    if (!obj.contains(key)) return fallback;
    std::vector<std::size_t> out;
    for (const auto& v : obj.at(key)) {
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
            throw ConfigError(std::string(key) + ": extents must be positive integers");
        out.push_back(v.get<std::size_t>());
    }
    return out;
}

} // namespace

std::size_t PipelineConfig::patch_count() const {
    if (pairing.patch_count > 0) return pairing.patch_count;
    return is_t2t() ? 1200 : 1000;
}

std::vector<std::size_t> PipelineConfig::patch_size() const {
    if (!pairing.patch_size.empty()) return pairing.patch_size;
    return is_t2t() ? std::vector<std::size_t>{64, 64, 64} : std::vector<std::size_t>{128, 128};
}

UNetConfig PipelineConfig::network() const {
    UNetConfig cfg = unet;
    cfg.spatial_dims = is_t2t() ? 3 : 2;
    if (!unet_explicit) cfg.base_channels = is_t2t() ? 8 : 16;
    return cfg;
}

std::vector<std::size_t> PipelineConfig::reconstruction_shape() const {
    return recon_shape.empty() ? phantom.shape : recon_shape;
}

double PipelineConfig::wedge_angle() const {
    if (wedge_half_angle > 0.0) return wedge_half_angle;
    double max_abs = 0.0;
    for (double a : acquisition.angles_deg) max_abs = std::max(max_abs, std::abs(a));
    return max_abs > 0.0 ? max_abs : 60.0;
}

bool valid_scheme(const std::string& scheme) {
    return scheme == "p2p-ip" || scheme == "p2p-tap" || scheme == "p2p-df" ||
           scheme == "t2t-eoa" || scheme == "t2t-df";
}

PipelineConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(doc, "config",
               {"version", "seed", "threads", "out_dir", "scheme", "phantom", "acquisition",
                "pairing", "unet", "train", "reconstruction", "metrics", "detection"});

    PipelineConfig cfg;
    cfg.version = get_or<int>(doc, "version", -1);
    if (cfg.version != 1) throw ConfigError("config: expected \"version\": 1");
    cfg.seed = get_or<std::uint64_t>(doc, "seed", 1);
    cfg.threads = get_or<std::size_t>(doc, "threads", 1);
    cfg.out_dir = get_or<std::string>(doc, "out_dir", "out");
    cfg.scheme = get_or<std::string>(doc, "scheme", "t2t-df");
    if (!valid_scheme(cfg.scheme))
        throw ConfigError("config: unknown scheme '" + cfg.scheme + "'");

    if (doc.contains("phantom")) {
        const json& p = doc.at("phantom");
        check_keys(p, "phantom",
                   {"shape", "membranes", "filaments", "blobs", "blob_radius", "densities"});
        cfg.phantom.shape = get_extents(p, "shape", {48, 64, 64});
        if (cfg.phantom.shape.size() != 3) throw ConfigError("phantom.shape must have 3 axes");
        cfg.phantom.n_membranes = get_or<std::size_t>(p, "membranes", 2);
        cfg.phantom.n_filaments = get_or<std::size_t>(p, "filaments", 3);
        cfg.phantom.n_blobs = get_or<std::size_t>(p, "blobs", 20);
        if (p.contains("blob_radius")) {
            auto r = p.at("blob_radius");
            if (!r.is_array() || r.size() != 2)
                throw ConfigError("phantom.blob_radius must be [min, max]");
            cfg.phantom.blob_radius_min = r[0].get<double>();
            cfg.phantom.blob_radius_max = r[1].get<double>();
        }
        if (p.contains("densities")) {
            const json& d = p.at("densities");
            check_keys(d, "phantom.densities", {"background", "membrane", "filament", "blob"});
            cfg.phantom.density_background = get_or<float>(d, "background", 0.0f);
            cfg.phantom.density_membrane = get_or<float>(d, "membrane", 0.6f);
            cfg.phantom.density_filament = get_or<float>(d, "filament", 0.8f);
            cfg.phantom.density_blob = get_or<float>(d, "blob", 1.0f);
        }
    } else {
        cfg.phantom.shape = {48, 64, 64};
    }
    cfg.phantom.seed = cfg.seed;

    {
        const json a = doc.contains("acquisition") ? doc.at("acquisition") : json::object();
        check_keys(a, "acquisition",
                   {"angles", "tilt_max", "tilt_step", "frames_per_tilt", "dose_per_frame",
                    "readout_sigma", "drift_per_frame"});
        if (a.contains("angles")) {
            for (const auto& v : a.at("angles"))
                cfg.acquisition.angles_deg.push_back(v.get<double>());
        } else {
            cfg.acquisition.angles_deg = default_tilt_angles(
                get_or<double>(a, "tilt_max", 60.0), get_or<double>(a, "tilt_step", 2.0));
        }
        cfg.acquisition.frames_per_tilt = get_or<std::size_t>(a, "frames_per_tilt", 4);
        cfg.acquisition.electrons_per_pixel_per_frame = get_or<double>(a, "dose_per_frame", 10.0);
        cfg.acquisition.gaussian_readout_sigma = get_or<double>(a, "readout_sigma", 0.5);
        if (a.contains("drift_per_frame")) {
            auto d = a.at("drift_per_frame");
            if (!d.is_array() || d.size() != 2)
                throw ConfigError("acquisition.drift_per_frame must be [dy, dx]");
            cfg.acquisition.drift_per_frame_y = d[0].get<double>();
            cfg.acquisition.drift_per_frame_x = d[1].get<double>();
        }
        cfg.acquisition.seed = cfg.seed + 1;
    }

    if (doc.contains("pairing")) {
        const json& p = doc.at("pairing");
        check_keys(p, "pairing", {"patch_count", "patch_size"});
        cfg.pairing.patch_count = get_or<std::size_t>(p, "patch_count", 0);
        cfg.pairing.patch_size = get_extents(p, "patch_size", {});
    }

    if (doc.contains("unet")) {
        const json& u = doc.at("unet");
        check_keys(u, "unet", {"depth", "kernel", "base_channels"});
        cfg.unet.depth = get_or<std::size_t>(u, "depth", 2);
        cfg.unet.kernel = get_or<std::size_t>(u, "kernel", 3);
        cfg.unet.base_channels = get_or<std::size_t>(u, "base_channels", 16);
        cfg.unet_explicit = true;
    }

    if (doc.contains("train")) {
        const json& t = doc.at("train");
        check_keys(t, "train",
                   {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon",
                    "validation_fraction"});
        cfg.train.epochs = get_or<std::size_t>(t, "epochs", 20);
        cfg.train.batch_size = get_or<std::size_t>(t, "batch_size", 4);
        cfg.train.learning_rate = get_or<double>(t, "learning_rate", 4e-4);
        cfg.train.beta1 = get_or<double>(t, "beta1", 0.9);
        cfg.train.beta2 = get_or<double>(t, "beta2", 0.999);
        cfg.train.epsilon = get_or<double>(t, "epsilon", 1e-7);
        cfg.train.validation_fraction = get_or<double>(t, "validation_fraction", 0.10);
    } else {
        cfg.train.epochs = 20;
    }
    cfg.train.seed = cfg.seed + 2;

    if (doc.contains("reconstruction")) {
        const json& r = doc.at("reconstruction");
        check_keys(r, "reconstruction", {"shape", "window"});
        cfg.recon_shape = get_extents(r, "shape", {});
        if (!cfg.recon_shape.empty() && cfg.recon_shape.size() != 3)
            throw ConfigError("reconstruction.shape must have 3 axes");
        std::string w = get_or<std::string>(r, "window", "hann");
        if (w == "hann")
            cfg.window = RampWindow::Hann;
        else if (w == "none")
            cfg.window = RampWindow::None;
        else
            throw ConfigError("reconstruction.window must be 'hann' or 'none'");
    }

    if (doc.contains("metrics")) {
        const json& m = doc.at("metrics");
        check_keys(m, "metrics", {"fsc_shell_width", "wedge_half_angle"});
        cfg.fsc_shell_width = get_or<double>(m, "fsc_shell_width", 1.0);
        cfg.wedge_half_angle = get_or<double>(m, "wedge_half_angle", 0.0);
    }

    if (doc.contains("detection")) {
        const json& d = doc.at("detection");
        check_keys(d, "detection",
                   {"enabled", "train_patches", "patch_size", "size_thresholds", "split_axis",
                    "split_fraction", "base_channels", "epochs", "batch_size",
                    "learning_rate"});
        cfg.detection.enabled = get_or<bool>(d, "enabled", true);
        cfg.detection.train_patches = get_or<std::size_t>(d, "train_patches", 300);
        cfg.detection.patch_size = get_extents(d, "patch_size", {16, 16, 16});
        cfg.detection.size_thresholds =
            get_extents(d, "size_thresholds", {1, 5, 10, 20, 40, 80});
        cfg.detection.split_axis = get_or<std::size_t>(d, "split_axis", 1);
        cfg.detection.split_fraction = get_or<double>(d, "split_fraction", 0.5);
        cfg.detection.unet.base_channels = get_or<std::size_t>(d, "base_channels", 4);
        cfg.detection.train.epochs = get_or<std::size_t>(d, "epochs", 10);
        cfg.detection.train.batch_size = get_or<std::size_t>(d, "batch_size", 4);
        cfg.detection.train.learning_rate = get_or<double>(d, "learning_rate", 1e-3);
    }
    cfg.detection.train.seed = cfg.seed + 3;
    cfg.detection.train.standardize_targets = false;

    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

// threads and out_dir are resource knobs, not result-determining inputs;
// they stay out of the canonical form so reruns hash identically.
std::string canonical_config(const PipelineConfig& cfg) {
    json doc;
    doc["version"] = cfg.version;
    doc["seed"] = cfg.seed;
    doc["scheme"] = cfg.scheme;
    doc["phantom"] = {{"shape", cfg.phantom.shape},
                      {"membranes", cfg.phantom.n_membranes},
                      {"filaments", cfg.phantom.n_filaments},
                      {"blobs", cfg.phantom.n_blobs},
                      {"blob_radius", {cfg.phantom.blob_radius_min, cfg.phantom.blob_radius_max}},
                      {"densities",
                       {{"background", cfg.phantom.density_background},
                        {"membrane", cfg.phantom.density_membrane},
                        {"filament", cfg.phantom.density_filament},
                        {"blob", cfg.phantom.density_blob}}}};
    doc["acquisition"] = {{"angles", cfg.acquisition.angles_deg},
                          {"frames_per_tilt", cfg.acquisition.frames_per_tilt},
                          {"dose_per_frame", cfg.acquisition.electrons_per_pixel_per_frame},
                          {"readout_sigma", cfg.acquisition.gaussian_readout_sigma},
                          {"drift_per_frame",
                           {cfg.acquisition.drift_per_frame_y, cfg.acquisition.drift_per_frame_x}}};
    doc["pairing"] = {{"patch_count", cfg.patch_count()}, {"patch_size", cfg.patch_size()}};
    UNetConfig net = cfg.network();
    doc["unet"] = {{"spatial_dims", net.spatial_dims},
                   {"depth", net.depth},
                   {"kernel", net.kernel},
                   {"base_channels", net.base_channels}};
    doc["train"] = {{"epochs", cfg.train.epochs},
                    {"batch_size", cfg.train.batch_size},
                    {"learning_rate", cfg.train.learning_rate},
                    {"beta1", cfg.train.beta1},
                    {"beta2", cfg.train.beta2},
                    {"epsilon", cfg.train.epsilon},
                    {"validation_fraction", cfg.train.validation_fraction}};
    doc["reconstruction"] = {{"shape", cfg.reconstruction_shape()},
                             {"window", cfg.window == RampWindow::Hann ? "hann" : "none"}};
    doc["metrics"] = {{"fsc_shell_width", cfg.fsc_shell_width},
                      {"wedge_half_angle", cfg.wedge_angle()}};
    doc["detection"] = {{"enabled", cfg.detection.enabled},
                        {"train_patches", cfg.detection.train_patches},
                        {"patch_size", cfg.detection.patch_size},
                        {"size_thresholds", cfg.detection.size_thresholds},
                        {"split_axis", cfg.detection.split_axis},
                        {"split_fraction", cfg.detection.split_fraction},
                        {"base_channels", cfg.detection.unet.base_channels},
                        {"epochs", cfg.detection.train.epochs},
                        {"batch_size", cfg.detection.train.batch_size},
                        {"learning_rate", cfg.detection.train.learning_rate}};
    return doc.dump(2) + "\n";
}

} // namespace tomopair
