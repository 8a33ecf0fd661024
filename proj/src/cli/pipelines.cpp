#include "pipelines.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "manifest.hpp"
#include "svgplot.hpp"
#include "tomopair/baselines.hpp"
#include "tomopair/downstream.hpp"
#include "tomopair/metrics.hpp"
#include "tomopair/mrc.hpp"
#include "tomopair/parallel.hpp"
#include "tomopair/pairing.hpp"
#include "tomopair/recon.hpp"

namespace tomopair {

using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "'");
}

std::string join(const std::string& dir, const std::string& name) { return dir + "/" + name; }

// Stack of equally shaped 2D images as one nz=count volume.
void write_stack(const std::vector<ScalarField>& images, const std::string& path) {
    require(!images.empty(), "write_stack: empty stack");
    const std::size_t ny = images[0].shape[0], nx = images[0].shape[1];
    ScalarField vol({images.size(), ny, nx});
    vol.voxel_size = {1.0, images[0].voxel_size[0], images[0].voxel_size[1]};
    for (std::size_t i = 0; i < images.size(); ++i) {
        require(images[i].shape == images[0].shape, "write_stack: shape mismatch");
        std::copy(images[i].data.begin(), images[i].data.end(),
                  vol.data.begin() + static_cast<long>(i * ny * nx));
    }
    write_mrc(vol, path);
}

std::vector<ScalarField> read_stack(const std::string& path) {
    ScalarField vol = read_mrc(path);
    std::vector<ScalarField> images;
    const std::size_t ny = vol.shape[1], nx = vol.shape[2];
    for (std::size_t i = 0; i < vol.shape[0]; ++i) {
        ScalarField img({ny, nx});
        img.voxel_size = {vol.voxel_size[1], vol.voxel_size[2]};
        std::copy(vol.data.begin() + static_cast<long>(i * ny * nx),
                  vol.data.begin() + static_cast<long>((i + 1) * ny * nx), img.data.begin());
        images.push_back(std::move(img));
    }
    return images;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' (run the previous stage first?)");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IoError("bad JSON in '" + path + "': " + e.what());
    }
    return doc;
}

void write_json(const json& doc, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << doc.dump(2) << "\n";
}

MovieTiltSeries load_acquisition(const PipelineConfig& cfg) {
    json doc = load_json(join(cfg.out_dir, "acquisition.json"));
    MovieTiltSeries series;
    std::vector<double> angles = doc.at("angles").get<std::vector<double>>();
    std::vector<std::string> movies = doc.at("movies").get<std::vector<std::string>>();
    require(angles.size() == movies.size(), "acquisition.json: angles/movies mismatch");
    for (std::size_t t = 0; t < angles.size(); ++t) {
        MovieTilt tilt;
        tilt.angle_deg = angles[t];
        tilt.acquisition_index = t;
        tilt.frames = read_stack(join(cfg.out_dir, movies[t]));
        series.tilts.push_back(std::move(tilt));
    }
    validate_series(series);
    return series;
}

TiltSeries series_from(const std::vector<ScalarField>& images, const std::vector<double>& angles,
                       const std::vector<std::size_t>& acq) {
    TiltSeries s;
    for (std::size_t i = 0; i < images.size(); ++i)
        s.tilts.push_back({angles[i], images[i], acq.empty() ? i : acq[i]});
    return s;
}

// Per-tilt pairs for a p2p scheme, in sorted-angle order.
struct P2pData {
    std::vector<ProjectionPair> pairs;
    std::vector<ScalarField> tilt_sums; // aligned full-dose sums, one per tilt
    std::vector<double> angles;         // per tilt, sorted
};

P2pData make_p2p_pairs(const std::string& scheme, const MovieTiltSeries& movie) {
    P2pData out;
    TiltSeries sums = sum_aligned_series(movie);
    out.angles = sums.angles();
    for (const TiltEntry& t : sums.tilts) out.tilt_sums.push_back(t.projection);

    if (scheme == "p2p-tap") {
        out.pairs = pair_adjacent_tilts(sums);
        return out;
    }

    // per-tilt frame pairing, kept in sorted-angle order
    TiltSeries sorted_ref = sums; // angle order reference
    std::vector<ProjectionPair> pairs(sorted_ref.size());
    // map angle -> movie tilt (angles validated distinct)
    for (std::size_t i = 0; i < sorted_ref.size(); ++i) {
        const MovieTilt* src = nullptr;
        for (const MovieTilt& t : movie.tilts)
            if (t.angle_deg == sorted_ref.tilts[i].angle_deg) src = &t;
        require(src != nullptr, "pairing: tilt lookup failed");
        if (scheme == "p2p-ip") {
            pairs[i] = split_halves(src->frames);
        } else { // p2p-df
            FrameAlignment aligned = align_frames(src->frames);
            pairs[i] = split_even_odd(aligned.frames);
        }
        pairs[i].tilt_a = pairs[i].tilt_b = static_cast<long>(src->acquisition_index);
    }
    out.pairs = std::move(pairs);
    return out;
}

HalfSeries make_t2t_halves(const std::string& scheme, const MovieTiltSeries& movie) {
    if (scheme == "t2t-df") return split_series_frames(movie);
    return split_series_even_odd_acquisition(sum_aligned_series(movie));
}

PairDataset dataset_from_pairs(const std::vector<ProjectionPair>& pairs, std::size_t total,
                               const std::vector<std::size_t>& size, std::uint64_t seed,
                               bool both_orderings) {
    require(!pairs.empty(), "training: no pairs available");
    PairDataset ds;
    Rng root(seed);
    std::size_t per = (total + pairs.size() - 1) / pairs.size();
    for (std::size_t i = 0; i < pairs.size() && ds.items.size() < total; ++i) {
        std::size_t want = std::min(per, total - ds.items.size());
        Rng rng = root.derive(i);
        auto patches = extract_patch_pairs(pairs[i].a, pairs[i].b, want, size, rng);
        for (auto& pr : patches) {
            if (both_orderings) ds.items.emplace_back(pr.second, pr.first);
            ds.items.push_back(std::move(pr));
            if (ds.items.size() >= total) break;
        }
    }
    return ds;
}

PairDataset dataset_from_volumes(const ScalarField& a, const ScalarField& b, std::size_t total,
                                 const std::vector<std::size_t>& size, std::uint64_t seed) {
    Rng rng(seed);
    PairDataset ds;
    ds.items = extract_patch_pairs(a, b, total, size, rng);
    return ds;
}

// Patch extents never exceed the data (demo configs use small fields).
std::vector<std::size_t> clamp_patch(std::vector<std::size_t> patch,
                                     const std::vector<std::size_t>& field,
                                     std::size_t granule) {
    require(patch.size() == field.size(), "patch rank does not match data rank");
    for (std::size_t i = 0; i < patch.size(); ++i) {
        patch[i] = std::min(patch[i], field[i]);
        patch[i] = std::max<std::size_t>(granule, (patch[i] / granule) * granule);
        require(patch[i] <= field[i], "field smaller than one pooling granule");
    }
    return patch;
}

ScalarField standardized(const ScalarField& f) { return apply_norm(f, compute_norm_stats(f)); }

double standardized_mse(const ScalarField& a, const ScalarField& b) {
    return mse(standardized(a), standardized(b));
}

std::vector<PlotSeries> fsc_plot_series(const std::vector<std::pair<std::string, FscCurve>>& curves) {
    std::vector<PlotSeries> out;
    for (const auto& [label, curve] : curves) {
        PlotSeries s;
        s.label = label;
        for (const FscShell& shell : curve.shells)
            if (shell.n_samples > 0) s.points.emplace_back(shell.frequency, shell.correlation);
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace

void cmd_simulate(const PipelineConfig& cfg) {
    ensure_dir(cfg.out_dir);
    Manifest manifest("simulate", canonical_config(cfg), cfg.seed);
    ManifestGuard guard(manifest);

    Phantom phantom = make_phantom(cfg.phantom);
    MovieTiltSeries movie = simulate_acquisition(phantom, cfg.acquisition);

    std::string density_path = join(cfg.out_dir, "phantom_density.mrc");
    std::string labels_path = join(cfg.out_dir, "phantom_labels.mrc");
    manifest.declare(density_path);
    manifest.declare(labels_path);
    write_mrc(phantom.density, density_path);
    ScalarField labels_field(phantom.labels.shape);
    for (std::size_t i = 0; i < labels_field.size(); ++i)
        labels_field.data[i] = static_cast<float>(phantom.labels.data[i]);
    write_mrc(labels_field, labels_path);

    json doc;
    std::vector<double> angles;
    std::vector<std::string> movie_names;
    for (std::size_t t = 0; t < movie.tilts.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "movie_t%03zu.mrc", t);
        std::string path = join(cfg.out_dir, name);
        manifest.declare(path);
        write_stack(movie.tilts[t].frames, path);
        angles.push_back(movie.tilts[t].angle_deg);
        movie_names.push_back(name);
    }
    doc["angles"] = angles;
    doc["frames_per_tilt"] = cfg.acquisition.frames_per_tilt;
    doc["movies"] = movie_names;
    std::string acq_path = join(cfg.out_dir, "acquisition.json");
    manifest.declare(acq_path);
    write_json(doc, acq_path);

    guard.commit(cfg.out_dir);
}

void cmd_pair(const PipelineConfig& cfg) {
    ensure_dir(cfg.out_dir);
    Manifest manifest("pair", canonical_config(cfg), cfg.seed);
    ManifestGuard guard(manifest);
    MovieTiltSeries movie = load_acquisition(cfg);

    if (cfg.is_t2t()) {
        HalfSeries halves = make_t2t_halves(cfg.scheme, movie);
        json doc;
        doc["scheme"] = cfg.scheme;
        doc["a"] = "half_a.mrc";
        doc["b"] = "half_b.mrc";
        doc["angles_a"] = halves.a.angles();
        doc["angles_b"] = halves.b.angles();
        std::vector<std::size_t> acq_a, acq_b;
        for (const TiltEntry& t : halves.a.tilts) acq_a.push_back(t.acquisition_index);
        for (const TiltEntry& t : halves.b.tilts) acq_b.push_back(t.acquisition_index);
        doc["acq_a"] = acq_a;
        doc["acq_b"] = acq_b;

        std::vector<ScalarField> sa, sb;
        for (const TiltEntry& t : halves.a.tilts) sa.push_back(t.projection);
        for (const TiltEntry& t : halves.b.tilts) sb.push_back(t.projection);
        std::string pa = join(cfg.out_dir, "half_a.mrc"), pb = join(cfg.out_dir, "half_b.mrc");
        manifest.declare(pa);
        manifest.declare(pb);
        write_stack(sa, pa);
        write_stack(sb, pb);
        std::string jp = join(cfg.out_dir, "halves.json");
        manifest.declare(jp);
        write_json(doc, jp);
    } else {
        P2pData data = make_p2p_pairs(cfg.scheme, movie);
        std::vector<ScalarField> as, bs;
        for (const ProjectionPair& p : data.pairs) {
            as.push_back(p.a);
            bs.push_back(p.b);
        }
        std::string pa = join(cfg.out_dir, "pairs_a.mrc"), pb = join(cfg.out_dir, "pairs_b.mrc");
        std::string pt = join(cfg.out_dir, "tilt_sums.mrc");
        manifest.declare(pa);
        manifest.declare(pb);
        manifest.declare(pt);
        write_stack(as, pa);
        write_stack(bs, pb);
        write_stack(data.tilt_sums, pt);
        json doc;
        doc["scheme"] = cfg.scheme;
        doc["a"] = "pairs_a.mrc";
        doc["b"] = "pairs_b.mrc";
        doc["tilt_sums"] = "tilt_sums.mrc";
        doc["angles"] = data.angles;
        std::string jp = join(cfg.out_dir, "pairs.json");
        manifest.declare(jp);
        write_json(doc, jp);
    }
    guard.commit(cfg.out_dir);
}

void cmd_reconstruct(const PipelineConfig& cfg) {
    ensure_dir(cfg.out_dir);
    Manifest manifest("reconstruct", canonical_config(cfg), cfg.seed);
    ManifestGuard guard(manifest);
    std::vector<std::size_t> shape = cfg.reconstruction_shape();

    // Raw tomogram from aligned full sums.
    MovieTiltSeries movie = load_acquisition(cfg);
    TiltSeries raw = sum_aligned_series(movie);
    std::string raw_path = join(cfg.out_dir, "tomo_raw.mrc");
    manifest.declare(raw_path);
    write_mrc(backproject(raw, shape, true, cfg.window), raw_path);

    // Half tomograms when the pairing stage produced halves.
    std::string halves_path = join(cfg.out_dir, "halves.json");
    if (std::filesystem::exists(halves_path)) {
        json doc = load_json(halves_path);
        HalfSeries halves;
        halves.kind = doc.at("scheme").get<std::string>() == "t2t-df"
                          ? HalfSplit::DoseFraction
                          : HalfSplit::EvenOddAcquisition;
        halves.a = series_from(read_stack(join(cfg.out_dir, doc.at("a").get<std::string>())),
                               doc.at("angles_a").get<std::vector<double>>(),
                               doc.at("acq_a").get<std::vector<std::size_t>>());
        halves.b = series_from(read_stack(join(cfg.out_dir, doc.at("b").get<std::string>())),
                               doc.at("angles_b").get<std::vector<double>>(),
                               doc.at("acq_b").get<std::vector<std::size_t>>());
        auto [ra, rb] = reconstruct_pair(halves, shape, cfg.window);
        std::string pa = join(cfg.out_dir, "tomo_a.mrc"), pb = join(cfg.out_dir, "tomo_b.mrc");
        manifest.declare(pa);
        manifest.declare(pb);
        write_mrc(ra, pa);
        write_mrc(rb, pb);
    }

    // Restored-tilt reconstruction when a restore stage produced tilts.
    std::string restored_path = join(cfg.out_dir, "restored_tilts.json");
    if (std::filesystem::exists(restored_path)) {
        json doc = load_json(restored_path);
        TiltSeries series =
            series_from(read_stack(join(cfg.out_dir, doc.at("stack").get<std::string>())),
                        doc.at("angles").get<std::vector<double>>(), {});
        std::string out_path = join(cfg.out_dir, "tomo_restored_tilts.mrc");
        manifest.declare(out_path);
        write_mrc(backproject(series, shape, true, cfg.window), out_path);
    }

    guard.commit(cfg.out_dir);
}

namespace {

TrainResult train_for_scheme(const PipelineConfig& cfg, Manifest& manifest) {
    UNetConfig net = cfg.network();
    PairDataset dataset;
    if (cfg.is_t2t()) {
        ScalarField ra = read_mrc(join(cfg.out_dir, "tomo_a.mrc"));
        ScalarField rb = read_mrc(join(cfg.out_dir, "tomo_b.mrc"));
        auto size = clamp_patch(cfg.patch_size(), ra.shape,
                                static_cast<std::size_t>(1) << net.depth);
        dataset = dataset_from_volumes(ra, rb, cfg.patch_count(), size, cfg.seed + 10);
    } else {
        json doc = load_json(join(cfg.out_dir, "pairs.json"));
        std::vector<ScalarField> as = read_stack(join(cfg.out_dir, doc.at("a").get<std::string>()));
        std::vector<ScalarField> bs = read_stack(join(cfg.out_dir, doc.at("b").get<std::string>()));
        require(as.size() == bs.size(), "pairs.json: stack size mismatch");
        std::vector<ProjectionPair> pairs(as.size());
        for (std::size_t i = 0; i < as.size(); ++i) {
            pairs[i].a = as[i];
            pairs[i].b = bs[i];
        }
        auto size = clamp_patch(cfg.patch_size(), as[0].shape,
                                static_cast<std::size_t>(1) << net.depth);
        dataset = dataset_from_pairs(pairs, cfg.patch_count(), size, cfg.seed + 10,
                                     cfg.scheme == "p2p-tap");
    }

    TrainConfig tcfg = cfg.train;
    TrainResult result = train(dataset, net, tcfg);

    std::string model_path = join(cfg.out_dir, "model.tpnn");
    manifest.declare(model_path);
    save_model(result.params, model_path);

    std::string hist = "epoch,train_loss,val_loss\n";
    char line[96];
    for (std::size_t e = 0; e < result.history.train_loss.size(); ++e) {
        std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g\n", e + 1,
                      result.history.train_loss[e], result.history.val_loss[e]);
        hist += line;
    }
    std::string hist_path = join(cfg.out_dir, "train_history.csv");
    manifest.declare(hist_path);
    write_text_file(hist_path, hist);
    return result;
}

} // namespace

void cmd_train(const PipelineConfig& cfg) {
    ensure_dir(cfg.out_dir);
    Manifest manifest("train", canonical_config(cfg), cfg.seed);
    ManifestGuard guard(manifest);
    train_for_scheme(cfg, manifest);
    guard.commit(cfg.out_dir);
}

namespace {

// Restored tilt stack for the p2p schemes: pair-average for ip/df, single
// prediction per tilt for tap.
std::vector<ScalarField> restore_tilts(const PipelineConfig& cfg, const UNetParams& model) {
    json doc = load_json(join(cfg.out_dir, "pairs.json"));
    if (cfg.scheme == "p2p-tap") {
        std::vector<ScalarField> tilts =
            read_stack(join(cfg.out_dir, doc.at("tilt_sums").get<std::string>()));
        std::vector<ScalarField> restored(tilts.size());
        for (std::size_t i = 0; i < tilts.size(); ++i) restored[i] = predict(tilts[i], model);
        return restored;
    }
    std::vector<ScalarField> as = read_stack(join(cfg.out_dir, doc.at("a").get<std::string>()));
    std::vector<ScalarField> bs = read_stack(join(cfg.out_dir, doc.at("b").get<std::string>()));
    std::vector<ScalarField> restored(as.size());
    for (std::size_t i = 0; i < as.size(); ++i) restored[i] = restore_pair(as[i], bs[i], model);
    return restored;
}

} // namespace

void cmd_restore(const PipelineConfig& cfg) {
    ensure_dir(cfg.out_dir);
    Manifest manifest("restore", canonical_config(cfg), cfg.seed);
    ManifestGuard guard(manifest);
    UNetParams model = load_model(join(cfg.out_dir, "model.tpnn"));

    if (cfg.is_t2t()) {
        ScalarField ra = read_mrc(join(cfg.out_dir, "tomo_a.mrc"));
        ScalarField rb = read_mrc(join(cfg.out_dir, "tomo_b.mrc"));
        ScalarField pa = predict(ra, model);
        ScalarField pb = predict(rb, model);
        ScalarField avg(pa.shape);
        avg.voxel_size = pa.voxel_size;
        for (std::size_t i = 0; i < avg.size(); ++i)
            avg.data[i] = 0.5f * (pa.data[i] + pb.data[i]);
        for (auto& [name, field] :
             std::vector<std::pair<std::string, const ScalarField*>>{
                 {"restored_half_a.mrc", &pa},
                 {"restored_half_b.mrc", &pb},
                 {"restored_tomogram.mrc", &avg}}) {
            std::string path = join(cfg.out_dir, name);
            manifest.declare(path);
            write_mrc(*field, path);
        }
    } else {
        std::vector<ScalarField> restored = restore_tilts(cfg, model);
        json pairs_doc = load_json(join(cfg.out_dir, "pairs.json"));
        std::vector<double> angles = pairs_doc.at("angles").get<std::vector<double>>();
        json doc;
        doc["stack"] = "restored_tilts.mrc";
        if (cfg.scheme == "p2p-tap") {
            doc["angles"] = angles;
        } else {
            doc["angles"] = angles; // pair i corresponds to tilt i for ip/df
        }
        std::string stack_path = join(cfg.out_dir, "restored_tilts.mrc");
        manifest.declare(stack_path);
        write_stack(restored, stack_path);
        std::string jp = join(cfg.out_dir, "restored_tilts.json");
        manifest.declare(jp);
        write_json(doc, jp);
    }
    guard.commit(cfg.out_dir);
}

void cmd_filter(const FilterOptions& opt, const std::string& out_dir, std::uint64_t seed) {
    ensure_dir(out_dir);
    Manifest manifest("filter", opt.method, seed);
    ManifestGuard guard(manifest);
    ScalarField input = read_mrc(opt.input);
    ScalarField field = input.shape[0] == 1 ? squeeze_to_2d(input) : input;

    ScalarField out;
    if (opt.method == "median") {
        out = median_filter(field, opt.radius);
    } else if (opt.method == "nad") {
        double dt = opt.dt > 0 ? opt.dt : 1.0 / (2.0 * static_cast<double>(field.ndim()));
        out = nad_filter(field, opt.steps, dt, opt.lambda);
    } else {
        throw ConfigError("filter: unknown method '" + opt.method + "'");
    }

    std::string path = join(out_dir, opt.output);
    manifest.declare(path);
    write_mrc(out, path);
    guard.commit(out_dir);
}

void cmd_fsc(const FscOptions& opt, const std::string& out_dir, std::uint64_t seed) {
    ensure_dir(out_dir);
    Manifest manifest("fsc", opt.volume_a + "|" + opt.volume_b, seed);
    ManifestGuard guard(manifest);
    ScalarField a = read_mrc(opt.volume_a);
    ScalarField b = read_mrc(opt.volume_b);
    FscCurve curve = fsc(a, b, opt.shell_width);

    std::string csv_path = join(out_dir, opt.out_csv);
    manifest.declare(csv_path);
    write_text_file(csv_path, fsc_to_csv(curve));

    if (!opt.out_svg.empty()) {
        std::string svg_path = join(out_dir, opt.out_svg);
        manifest.declare(svg_path);
        write_text_file(svg_path, render_line_plot("Fourier shell correlation",
                                                   "frequency (cycles/voxel)", "FSC",
                                                   fsc_plot_series({{"fsc", curve}})));
    }
    guard.commit(out_dir);
}

void cmd_segment(const SegmentOptions& opt, const std::string& out_dir, std::uint64_t seed) {
    ensure_dir(out_dir);
    Manifest manifest("segment", opt.model + "|" + opt.input, seed);
    ManifestGuard guard(manifest);
    UNetParams model = load_model(opt.model);
    ScalarField volume = read_mrc(opt.input);

    ScalarField prediction = predict(volume, model);
    float threshold = otsu_threshold(prediction);
    BinaryMask mask = threshold_mask(prediction, threshold);

    std::string pred_path = join(out_dir, opt.out_prediction);
    std::string mask_path = join(out_dir, opt.out_mask);
    manifest.declare(pred_path);
    manifest.declare(mask_path);
    write_mrc(prediction, pred_path);
    write_mrc(mask_to_field(mask), mask_path);
    guard.commit(out_dir);
}

namespace {

LabelField labels_from_field(const ScalarField& f) {
    LabelField labels(f.shape);
    for (std::size_t i = 0; i < f.size(); ++i)
        labels.data[i] = static_cast<std::int32_t>(std::llround(f.data[i]));
    return labels;
}

} // namespace

void cmd_evaluate(const EvaluateOptions& opt, const std::string& out_dir, std::uint64_t seed) {
    ensure_dir(out_dir);
    Manifest manifest("evaluate", opt.prediction + "|" + opt.volume, seed);
    ManifestGuard guard(manifest);
    json report;

    if (!opt.prediction.empty() && !opt.truth.empty()) {
        ScalarField pred = read_mrc(opt.prediction);
        ScalarField truth = read_mrc(opt.truth);
        double e = mse(pred, truth);
        report["mse"] = e;
        report["psnr_db"] = e == 0.0 ? json("inf") : json(psnr(pred, truth));
        report["mse_standardized"] = standardized_mse(pred, truth);
    }

    if (!opt.volume.empty()) {
        ScalarField v = read_mrc(opt.volume);
        report["wedge_half_angle"] = opt.wedge_half_angle;
        report["wedge_inconsistency"] = wedge_inconsistency(v, WedgeMask{opt.wedge_half_angle});
    }

    if (!opt.seg_model.empty()) {
        require(!opt.volume.empty() && !opt.labels.empty(),
                "evaluate: PR sweep needs --volume and --labels");
        UNetParams model = load_model(opt.seg_model);
        ScalarField volume = read_mrc(opt.volume);
        LabelField labels = labels_from_field(read_mrc(opt.labels));
        DetectionReport det = pr_sweep(volume, model, labels, opt.size_thresholds);
        std::string csv_path = join(out_dir, "pr.csv");
        manifest.declare(csv_path);
        write_text_file(csv_path, report_to_csv(det));
        report["best_f1"] = det.best_f1();

        PlotSeries pr;
        pr.label = "PR";
        for (const DetectionScore& e : det.entries) pr.points.emplace_back(e.recall, e.precision);
        std::string svg_path = join(out_dir, "pr.svg");
        manifest.declare(svg_path);
        write_text_file(svg_path,
                        render_line_plot("Precision-recall over size thresholds", "recall",
                                         "precision", {pr}));
    }

    std::string path = join(out_dir, "evaluate.json");
    manifest.declare(path);
    write_json(report, path);
    guard.commit(out_dir);
}

void cmd_pipeline(const PipelineConfig& cfg) {
    ensure_dir(cfg.out_dir);
    Manifest manifest("pipeline", canonical_config(cfg), cfg.seed);
    ManifestGuard guard(manifest);
    const std::vector<std::size_t> shape = cfg.reconstruction_shape();
    json report;
    report["scheme"] = cfg.scheme;

    // Simulate.
    Phantom phantom = make_phantom(cfg.phantom);
    MovieTiltSeries movie = simulate_acquisition(phantom, cfg.acquisition);
    std::string density_path = join(cfg.out_dir, "phantom_density.mrc");
    manifest.declare(density_path);
    write_mrc(phantom.density, density_path);

    // Raw route shared by all schemes.
    TiltSeries raw_series = sum_aligned_series(movie);
    ScalarField tomo_raw = backproject(raw_series, shape, true, cfg.window);
    std::string raw_path = join(cfg.out_dir, "tomo_raw.mrc");
    manifest.declare(raw_path);
    write_mrc(tomo_raw, raw_path);
    const double wedge_deg = cfg.wedge_angle();
    report["wedge_raw"] = wedge_inconsistency(tomo_raw, WedgeMask{wedge_deg});

    UNetConfig net = cfg.network();
    const std::size_t granule = static_cast<std::size_t>(1) << net.depth;

    if (cfg.is_t2t()) {
        HalfSeries halves = make_t2t_halves(cfg.scheme, movie);
        auto [ra, rb] = reconstruct_pair(halves, shape, cfg.window);

        auto size = clamp_patch(cfg.patch_size(), ra.shape, granule);
        PairDataset dataset =
            dataset_from_volumes(ra, rb, cfg.patch_count(), size, cfg.seed + 10);
        TrainConfig tcfg = cfg.train;
        TrainResult trained = train(dataset, net, tcfg);
        std::string model_path = join(cfg.out_dir, "model.tpnn");
        manifest.declare(model_path);
        save_model(trained.params, model_path);

        ScalarField pa = predict(ra, trained.params);
        ScalarField pb = predict(rb, trained.params);
        ScalarField restored(pa.shape);
        restored.voxel_size = pa.voxel_size;
        for (std::size_t i = 0; i < restored.size(); ++i)
            restored.data[i] = 0.5f * (pa.data[i] + pb.data[i]);
        std::string restored_path = join(cfg.out_dir, "restored_tomogram.mrc");
        manifest.declare(restored_path);
        write_mrc(restored, restored_path);

        report["wedge_restored"] = wedge_inconsistency(restored, WedgeMask{wedge_deg});
        report["mse_standardized_raw_vs_truth"] = standardized_mse(tomo_raw, phantom.density);
        report["mse_standardized_restored_vs_truth"] =
            standardized_mse(restored, phantom.density);

        // Half-map FSC: raw halves, restored halves, NAD-filtered halves.
        FscCurve fsc_raw = fsc(ra, rb, cfg.fsc_shell_width);
        FscCurve fsc_restored = fsc(pa, pb, cfg.fsc_shell_width);
        double dt = 1.0 / 6.0;
        FscCurve fsc_nad = fsc(nad_filter(ra, 20, dt, 0.0), nad_filter(rb, 20, dt, 0.0),
                               cfg.fsc_shell_width);
        for (auto& [name, curve] :
             std::vector<std::pair<std::string, const FscCurve*>>{{"fsc_raw.csv", &fsc_raw},
                                                                  {"fsc_restored.csv",
                                                                   &fsc_restored},
                                                                  {"fsc_nad.csv", &fsc_nad}}) {
            std::string path = join(cfg.out_dir, name);
            manifest.declare(path);
            write_text_file(path, fsc_to_csv(*curve));
        }
        std::string svg_path = join(cfg.out_dir, "fsc.svg");
        manifest.declare(svg_path);
        write_text_file(
            svg_path,
            render_line_plot("Half-map FSC", "frequency (cycles/voxel)", "FSC",
                             fsc_plot_series({{"raw", fsc_raw},
                                              {"nad", fsc_nad},
                                              {"restored", fsc_restored}})));
        report["fsc_band_mean_raw"] = fsc_raw.band_mean(0.1, 0.3);
        report["fsc_band_mean_restored"] = fsc_restored.band_mean(0.1, 0.3);

        if (cfg.detection.enabled) {
            // The same automated analysis on the raw and the restored volume.
            RegionSplit raw_split = split_for_training(tomo_raw, phantom.labels,
                                                       cfg.detection.split_axis,
                                                       cfg.detection.split_fraction);
            RegionSplit res_split = split_for_training(restored, phantom.labels,
                                                       cfg.detection.split_axis,
                                                       cfg.detection.split_fraction);
            auto run_side = [&](const RegionSplit& split, const std::string& tag) {
                TrainResult seg = train_segmenter(
                    {{split.train_volume, mask_from_labels(split.train_labels)}},
                    cfg.detection.unet, cfg.detection.train, cfg.detection.train_patches,
                    cfg.detection.patch_size);
                DetectionReport det = pr_sweep(split.test_volume, seg.params, split.test_labels,
                                               cfg.detection.size_thresholds);
                std::string path = join(cfg.out_dir, "pr_" + tag + ".csv");
                manifest.declare(path);
                write_text_file(path, report_to_csv(det));
                report["best_f1_" + tag] = det.best_f1();
                return det;
            };
            DetectionReport det_raw = run_side(raw_split, "raw");
            DetectionReport det_res = run_side(res_split, "restored");
            PlotSeries sr, ss;
            sr.label = "raw";
            ss.label = "restored";
            for (const DetectionScore& e : det_raw.entries)
                sr.points.emplace_back(e.recall, e.precision);
            for (const DetectionScore& e : det_res.entries)
                ss.points.emplace_back(e.recall, e.precision);
            std::string svg = join(cfg.out_dir, "pr.svg");
            manifest.declare(svg);
            write_text_file(svg, render_line_plot("Detection precision-recall", "recall",
                                                  "precision", {sr, ss}));
        }
    } else {
        P2pData data = make_p2p_pairs(cfg.scheme, movie);
        auto size = clamp_patch(cfg.patch_size(), data.pairs.front().a.shape, granule);
        PairDataset dataset = dataset_from_pairs(data.pairs, cfg.patch_count(), size,
                                                 cfg.seed + 10, cfg.scheme == "p2p-tap");
        TrainConfig tcfg = cfg.train;
        TrainResult trained = train(dataset, net, tcfg);
        std::string model_path = join(cfg.out_dir, "model.tpnn");
        manifest.declare(model_path);
        save_model(trained.params, model_path);

        std::vector<ScalarField> restored(data.angles.size());
        if (cfg.scheme == "p2p-tap") {
            for (std::size_t i = 0; i < data.tilt_sums.size(); ++i)
                restored[i] = predict(data.tilt_sums[i], trained.params);
        } else {
            for (std::size_t i = 0; i < data.pairs.size(); ++i)
                restored[i] = restore_pair(data.pairs[i].a, data.pairs[i].b, trained.params);
        }
        std::string stack_path = join(cfg.out_dir, "restored_tilts.mrc");
        manifest.declare(stack_path);
        write_stack(restored, stack_path);

        // Tomogram from the restored tilts, compared against the raw route.
        TiltSeries restored_series = series_from(restored, data.angles, {});
        ScalarField tomo_restored = backproject(restored_series, shape, true, cfg.window);
        std::string tr_path = join(cfg.out_dir, "tomo_restored_tilts.mrc");
        manifest.declare(tr_path);
        write_mrc(tomo_restored, tr_path);
        report["wedge_restored_tilt_route"] =
            wedge_inconsistency(tomo_restored, WedgeMask{wedge_deg});

        // Projection-level restoration quality against the noise-free signal.
        ScalarField clean0 = project(phantom.density, data.angles[data.angles.size() / 2]);
        report["mse_standardized_restored_center_tilt"] =
            standardized_mse(restored[data.angles.size() / 2], clean0);
        report["mse_standardized_raw_center_tilt"] =
            standardized_mse(data.tilt_sums[data.angles.size() / 2], clean0);
    }

    std::string report_path = join(cfg.out_dir, "report.json");
    manifest.declare(report_path);
    write_json(report, report_path);
    guard.commit(cfg.out_dir);
}

} // namespace tomopair
