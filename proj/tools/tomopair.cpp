#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <json.hpp>
#include <string>

#include "../src/cli/manifest.hpp"
#include "../src/cli/pipelines.hpp"
#include "tomopair/parallel.hpp"

namespace {

using namespace tomopair;

// flag > env > config > default
const char* env_or_null(const char* name) { return std::getenv(name); }

void emit_error(const char* category, const std::string& message) {
    nlohmann::json err = {{"error", {{"category", category}, {"message", message}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string scheme;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t threads = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config (JSON)");
        cmd->add_option("--out-dir", out_dir, "output directory");
        cmd->add_option("--scheme", scheme, "p2p-ip|p2p-tap|p2p-df|t2t-eoa|t2t-df");
        cmd->add_option("--seed", seed, "master seed")->each([this](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--threads", threads, "worker threads (never changes results)");
    }

    PipelineConfig resolve() const {
        std::string path = config_path;
        if (path.empty())
            if (const char* env = env_or_null("TOMOPAIR_CONFIG")) path = env;

        PipelineConfig cfg = path.empty() ? parse_config("{\"version\":1}") : load_config(path);

        if (const char* env = env_or_null("TOMOPAIR_SEED")) cfg.seed = std::stoull(env);
        if (const char* env = env_or_null("TOMOPAIR_THREADS")) cfg.threads = std::stoull(env);
        if (const char* env = env_or_null("TOMOPAIR_OUT_DIR")) cfg.out_dir = env;
        if (const char* env = env_or_null("TOMOPAIR_SCHEME")) cfg.scheme = env;

        if (seed_set) cfg.seed = seed;
        if (threads > 0) cfg.threads = threads;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!scheme.empty()) cfg.scheme = scheme;

        if (!valid_scheme(cfg.scheme)) throw ConfigError("unknown scheme '" + cfg.scheme + "'");

        // Seed overrides re-derive the per-stage seeds the config parser set.
        cfg.phantom.seed = cfg.seed;
        cfg.acquisition.seed = cfg.seed + 1;
        cfg.train.seed = cfg.seed + 2;
        cfg.detection.train.seed = cfg.seed + 3;
        return cfg;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"noisy-pair denoising toolkit for simulated cryo-ET data"};
    app.require_subcommand(1);

    CommonFlags simulate_flags, pair_flags, reconstruct_flags, train_flags, restore_flags,
        pipeline_flags;
    CLI::App* c_simulate = app.add_subcommand("simulate", "generate phantom + movie tilt series");
    simulate_flags.attach(c_simulate);
    CLI::App* c_pair = app.add_subcommand("pair", "build noise-independent pairs per scheme");
    pair_flags.attach(c_pair);
    CLI::App* c_reconstruct =
        app.add_subcommand("reconstruct", "weighted backprojection of series/halves");
    reconstruct_flags.attach(c_reconstruct);
    CLI::App* c_train = app.add_subcommand("train", "train the denoising network");
    train_flags.attach(c_train);
    CLI::App* c_restore = app.add_subcommand("restore", "apply the trained network");
    restore_flags.attach(c_restore);
    CLI::App* c_pipeline = app.add_subcommand("pipeline", "run the whole scheme end to end");
    pipeline_flags.attach(c_pipeline);

    FilterOptions filter_opt;
    CommonFlags filter_flags;
    CLI::App* c_filter = app.add_subcommand("filter", "median / diffusion baseline filters");
    filter_flags.attach(c_filter);
    c_filter->add_option("--input", filter_opt.input, "input MRC")->required();
    c_filter->add_option("--output", filter_opt.output, "output MRC name")->required();
    c_filter->add_option("--method", filter_opt.method, "median|nad");
    c_filter->add_option("--radius", filter_opt.radius, "median radius");
    c_filter->add_option("--steps", filter_opt.steps, "nad steps");
    c_filter->add_option("--dt", filter_opt.dt, "nad time step");
    c_filter->add_option("--lambda", filter_opt.lambda, "nad contrast parameter");

    FscOptions fsc_opt;
    CommonFlags fsc_flags;
    CLI::App* c_fsc = app.add_subcommand("fsc", "Fourier shell correlation of two volumes");
    fsc_flags.attach(c_fsc);
    c_fsc->add_option("--a", fsc_opt.volume_a, "first volume")->required();
    c_fsc->add_option("--b", fsc_opt.volume_b, "second volume")->required();
    c_fsc->add_option("--csv", fsc_opt.out_csv, "output CSV name");
    c_fsc->add_option("--svg", fsc_opt.out_svg, "output SVG name");
    c_fsc->add_option("--shell-width", fsc_opt.shell_width, "shell width (frequency voxels)");

    SegmentOptions segment_opt;
    CommonFlags segment_flags;
    CLI::App* c_segment = app.add_subcommand("segment", "predict + Otsu threshold a volume");
    segment_flags.attach(c_segment);
    c_segment->add_option("--model", segment_opt.model, "segmentation model")->required();
    c_segment->add_option("--input", segment_opt.input, "volume MRC")->required();
    c_segment->add_option("--prediction", segment_opt.out_prediction, "prediction MRC name");
    c_segment->add_option("--mask", segment_opt.out_mask, "mask MRC name");

    EvaluateOptions eval_opt;
    CommonFlags eval_flags;
    std::vector<std::size_t> eval_thresholds;
    CLI::App* c_evaluate = app.add_subcommand("evaluate", "error metrics / wedge ratio / PR sweep");
    eval_flags.attach(c_evaluate);
    c_evaluate->add_option("--prediction", eval_opt.prediction, "restored volume");
    c_evaluate->add_option("--truth", eval_opt.truth, "ground-truth volume");
    c_evaluate->add_option("--volume", eval_opt.volume, "volume for wedge ratio / PR sweep");
    c_evaluate->add_option("--wedge-angle", eval_opt.wedge_half_angle, "wedge half angle (deg)");
    c_evaluate->add_option("--seg-model", eval_opt.seg_model, "segmentation model for PR sweep");
    c_evaluate->add_option("--labels", eval_opt.labels, "ground-truth label volume");
    c_evaluate->add_option("--size-thresholds", eval_thresholds, "detection size thresholds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        emit_error("usage", e.what());
        return 2;
    }

    const CommonFlags* active = nullptr;
    if (c_simulate->parsed()) active = &simulate_flags;
    if (c_pair->parsed()) active = &pair_flags;
    if (c_reconstruct->parsed()) active = &reconstruct_flags;
    if (c_train->parsed()) active = &train_flags;
    if (c_restore->parsed()) active = &restore_flags;
    if (c_pipeline->parsed()) active = &pipeline_flags;
    if (c_filter->parsed()) active = &filter_flags;
    if (c_fsc->parsed()) active = &fsc_flags;
    if (c_segment->parsed()) active = &segment_flags;
    if (c_evaluate->parsed()) active = &eval_flags;

    PipelineConfig cfg;
    try {
        cfg = active->resolve();
    } catch (const ConfigError& e) {
        emit_error("config", e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error("config", e.what());
        return 2;
    }
    set_thread_count(cfg.threads);

    try {
        if (c_simulate->parsed()) cmd_simulate(cfg);
        if (c_pair->parsed()) cmd_pair(cfg);
        if (c_reconstruct->parsed()) cmd_reconstruct(cfg);
        if (c_train->parsed()) cmd_train(cfg);
        if (c_restore->parsed()) cmd_restore(cfg);
        if (c_pipeline->parsed()) cmd_pipeline(cfg);
        if (c_filter->parsed()) cmd_filter(filter_opt, cfg.out_dir, cfg.seed);
        if (c_fsc->parsed()) cmd_fsc(fsc_opt, cfg.out_dir, cfg.seed);
        if (c_segment->parsed()) cmd_segment(segment_opt, cfg.out_dir, cfg.seed);
        if (c_evaluate->parsed()) {
            if (!eval_thresholds.empty()) eval_opt.size_thresholds = eval_thresholds;
            cmd_evaluate(eval_opt, cfg.out_dir, cfg.seed);
        }
    } catch (const ConfigError& e) {
        emit_error("config", e.what());
        return 2;
    } catch (const PreconditionError& e) {
        emit_error("precondition", e.what());
        return 1;
    } catch (const DegenerateInputError& e) {
        emit_error("degenerate-input", e.what());
        return 1;
    } catch (const IoError& e) {
        emit_error("io", e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error("runtime", e.what());
        return 1;
    }
    return 0;
}
