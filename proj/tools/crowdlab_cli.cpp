// crowdlab command-line interface: reproducible prepare/train/predict/report
// runs over the counting and anomaly pipelines.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crowdlab/anomaly.hpp"
#include "crowdlab/config.hpp"
#include "crowdlab/dataset_io.hpp"
#include "crowdlab/density.hpp"
#include "crowdlab/image_io.hpp"
#include "crowdlab/metrics.hpp"
#include "crowdlab/report.hpp"
#include "crowdlab/stage1.hpp"
#include "crowdlab/stage2.hpp"
#include "crowdlab/video.hpp"

namespace fs = std::filesystem;
using namespace crowdlab;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string run_dir; // explicit run directory (otherwise timestamp-hash)
};

RunConfig load_config(const GlobalOpts& g) {
    require(!g.config_path.empty(), "MalformedConfig", "--config is required");
    RunConfig cfg = RunConfig::load(g.config_path);
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.raw["seed"] = *g.seed;
    }
    if (!g.out_dir.empty()) cfg.output_path = g.out_dir;
    return cfg;
}

fs::path make_run_dir(const RunConfig& cfg, const GlobalOpts& g) {
    fs::path dir;
    if (!g.run_dir.empty()) {
        dir = g.run_dir;
    } else {
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        const auto stamp = std::chrono::duration_cast<std::chrono::seconds>(now).count();
        dir = cfg.output_path / (std::to_string(stamp) + "-" + cfg.hash());
    }
    fs::create_directories(dir / "logs");
    fs::create_directories(dir / "checkpoints");
    fs::create_directories(dir / "reports");
    std::ofstream(dir / "config.json") << cfg.raw.dump(2) << "\n";
    std::cout << "run_dir: " << dir.string() << "\n";
    return dir;
}

fs::path cache_root(const RunConfig& cfg, const fs::path& run_dir) {
    if (const char* env = std::getenv("CROWDLAB_CACHE")) return fs::path(env);
    (void)cfg;
    return run_dir.parent_path() / "cache";
}

void write_run_report(const fs::path& run_dir, const RunConfig& cfg,
                      const nlohmann::json& extra) {
    nlohmann::json j;
    j["config_hash"] = cfg.hash();
    j["version"] = "crowdlab 0.1.0";
    j["artifacts"] = nlohmann::json::array();
    for (const auto& sub : {"logs", "checkpoints", "reports"})
        for (const auto& e : fs::directory_iterator(run_dir / sub))
            j["artifacts"].push_back(e.path().string());
    j.update(extra);
    std::ofstream(run_dir / "report.json") << j.dump(2) << "\n";
}

std::vector<TensorF> load_manifest_images(const DatasetManifest& manifest,
                                          const fs::path& manifest_path,
                                          std::size_t channels) {
    std::vector<TensorF> images;
    const fs::path base = manifest_path.parent_path();
    for (const auto& rec : manifest.records) {
        fs::path p = rec.image_path;
        if (p.is_relative()) p = base / p;
        require(fs::exists(p), "MissingFile", "image not found: " + p.string());
        images.push_back(load_image(p, channels));
    }
    return images;
}

// --- prepare ----------------------------------------------------------------

int cmd_prepare(const GlobalOpts& g) {
    RunConfig cfg = load_config(g);
    const fs::path run_dir = make_run_dir(cfg, g);
    DatasetManifest manifest = load_manifest(cfg.data_path);

    // Content-addressed cache: manifest bytes + the keys that shape the output.
    std::string key;
    {
        std::ifstream in(cfg.data_path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        key = ss.str() + "|sigma=" + std::to_string(cfg.density_sigma) +
              "|stride=" + std::to_string(cfg.fen.stride());
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char ch : key) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        key = buf;
    }
    const fs::path cache_dir = cache_root(cfg, run_dir);
    fs::create_directories(cache_dir);
    const fs::path cache_file = cache_dir / ("density_" + key + ".csa");
    if (fs::exists(cache_file)) {
        std::cout << "cache hit: " << cache_file.string() << "\n";
    } else {
        CheckpointArchive archive;
        for (const auto& rec : manifest.records) {
            DensityMap dm =
                generate_density_map(rec.points, rec.height, rec.width, cfg.density_sigma);
            std::vector<float> data(dm.values.begin(), dm.values.end());
            const std::string stem = fs::path(rec.image_path).stem().string();
            archive.add("density/" + stem,
                        {static_cast<std::uint32_t>(dm.height),
                         static_cast<std::uint32_t>(dm.width)},
                        std::move(data));
        }
        archive.metadata()["sigma"] = std::to_string(cfg.density_sigma);
        write_checkpoint(archive, cache_file);
        std::cout << "cache write: " << cache_file.string() << "\n";
    }
    write_run_report(run_dir, cfg, {{"cache_file", cache_file.string()},
                                    {"records", manifest.records.size()}});
    return 0;
}

// --- training commands --------------------------------------------------------

int cmd_pretrain_rotation(const GlobalOpts& g) {
    RunConfig cfg = load_config(g);
    const fs::path run_dir = make_run_dir(cfg, g);
    DatasetManifest manifest = load_manifest(cfg.data_path);
    auto images = load_manifest_images(manifest, cfg.data_path, cfg.fen.input_channels);

    Rng rng(cfg.seed);
    RotationHeadConfig head_cfg;
    auto [checkpoint, log] = train_stage1(images, cfg.fen, head_cfg, cfg.stage1, rng);
    checkpoint.metadata()["seed"] = std::to_string(cfg.seed);
    write_checkpoint(checkpoint, run_dir / "checkpoints" / "stage1.csa");
    log.write_csv(run_dir / "logs" / "stage1.csv", "rot_acc");
    write_run_report(run_dir, cfg,
                     {{"final_loss", log.records.empty() ? 0.0 : log.records.back().loss}});
    return 0;
}

int cmd_train_density(const GlobalOpts& g, const std::string& stage1_path) {
    RunConfig cfg = load_config(g);
    const fs::path run_dir = make_run_dir(cfg, g);
    require(!stage1_path.empty(), "MissingCheckpoint", "--stage1 checkpoint is required");
    CheckpointArchive stage1 = read_checkpoint(stage1_path);
    DatasetManifest manifest = load_manifest(cfg.data_path);
    auto images = load_manifest_images(manifest, cfg.data_path, cfg.fen.input_channels);

    Rng rng(cfg.seed);
    DensityHeadConfig head_cfg;
    auto [checkpoint, log] =
        train_stage2(stage1, images, cfg.fen, head_cfg, cfg.stage2, rng);
    checkpoint.metadata()["seed"] = std::to_string(cfg.seed);
    write_checkpoint(checkpoint, run_dir / "checkpoints" / "stage2.csa");
    log.write_csv(run_dir / "logs" / "stage2.csv", "unused");
    write_run_report(run_dir, cfg,
                     {{"final_loss", log.records.empty() ? 0.0 : log.records.back().loss}});
    return 0;
}

int cmd_predict_count(const GlobalOpts& g, const std::string& checkpoint_path,
                      double scale, const std::string& calibrate) {
    RunConfig cfg = load_config(g);
    const fs::path run_dir = make_run_dir(cfg, g);
    CheckpointArchive checkpoint = read_checkpoint(checkpoint_path);
    DatasetManifest manifest = load_manifest(cfg.data_path);
    auto images = load_manifest_images(manifest, cfg.data_path, cfg.fen.input_channels);

    Rng rng(cfg.seed);
    Fen<float> fen(cfg.fen, rng);
    fen.load(checkpoint);
    DensityHeadConfig head_cfg;
    DensityHead<float> head(head_cfg, cfg.fen.output_channels(), rng);
    {
        std::vector<nn::Param<float>*> ps;
        head.collect(ps);
        nn::load_params(ps, checkpoint);
    }

    const std::size_t stride = cfg.fen.stride();
    auto crop_to_stride = [&](const TensorF& img) {
        const std::size_t h = img.dim(0) / stride * stride;
        const std::size_t w = img.dim(1) / stride * stride;
        require(h > 0 && w > 0, "ShapeError", "image smaller than the FEN stride");
        if (h == img.dim(0) && w == img.dim(1)) return img;
        TensorF out({h, w, img.dim(2)});
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < w; ++c)
                for (std::size_t ch = 0; ch < img.dim(2); ++ch)
                    out.at(r, c, ch) = img.at(r, c, ch);
        return out;
    };

    if (calibrate == "first") {
        require(!manifest.records.empty() && !manifest.records.front().points.empty(),
                "ZeroPrediction", "calibrate=first needs a labeled first record");
        auto [dm, raw] = predict_count(fen, head, crop_to_stride(images[0]), 1.0);
        scale = calibrate_scale_labeled(
            static_cast<double>(manifest.records.front().points.size()), raw);
    } else if (calibrate == "prior") {
        std::vector<double> sums;
        for (const auto& img : images) {
            auto [dm, raw] = predict_count(fen, head, crop_to_stride(img), 1.0);
            sums.push_back(raw);
        }
        scale = calibrate_scale_prior(cfg.prior, sums);
    }

    const bool labeled = [&] {
        for (const auto& r : manifest.records)
            if (!r.points.empty()) return true;
        return false;
    }();

    std::ofstream csv(run_dir / "reports" / "counts.csv");
    csv << (labeled ? "image,count,gt\n" : "image,count\n");
    std::vector<CountPair> pairs;
    for (std::size_t i = 0; i < images.size(); ++i) {
        auto [dm, count] = predict_count(fen, head, crop_to_stride(images[i]), scale);
        const std::string stem = fs::path(manifest.records[i].image_path).stem().string();
        save_density_png(dm, run_dir / "reports" / (stem + "_density.png"));
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", count);
        if (labeled) {
            const double gt = static_cast<double>(manifest.records[i].points.size());
            csv << manifest.records[i].image_path << "," << buf << "," << gt << "\n";
            pairs.push_back({count, gt});
        } else {
            csv << manifest.records[i].image_path << "," << buf << "\n";
        }
    }
    nlohmann::json extra{{"scale", scale}};
    if (labeled && !pairs.empty()) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "# mae,%.9g\n# mse,%.9g\n", mae(pairs), mse(pairs));
        csv << buf;
        extra["mae"] = mae(pairs);
        extra["mse"] = mse(pairs);
    }
    csv.close();
    write_run_report(run_dir, cfg, extra);
    return 0;
}

// --- anomaly pipeline ---------------------------------------------------------

void save_clip_dataset(const ClipDatasetArrays& ds, const fs::path& archive_path,
                       const fs::path& labels_csv) {
    CheckpointArchive archive;
    for (std::size_t i = 0; i < ds.clips.size(); ++i) {
        const auto& clip = ds.clips[i];
        const std::size_t t = clip.frames.size();
        const std::size_t h = clip.frames[0].dim(0), w = clip.frames[0].dim(1),
                          c = clip.frames[0].dim(2);
        std::vector<float> frames;
        frames.reserve(t * h * w * c);
        for (const auto& f : clip.frames)
            frames.insert(frames.end(), f.vec().begin(), f.vec().end());
        std::vector<float> mask(clip.valid.begin(), clip.valid.end());
        const std::string id = "clip" + std::to_string(i);
        archive.add("clips/" + id + "/frames",
                    {static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(h),
                     static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(c)},
                    std::move(frames));
        archive.add("clips/" + id + "/mask", {static_cast<std::uint32_t>(t)}, std::move(mask));
    }
    write_checkpoint(archive, archive_path);
    std::ofstream csv(labels_csv);
    csv << "id,label,source\n";
    for (std::size_t i = 0; i < ds.clips.size(); ++i)
        csv << "clip" << i << "," << ds.clips[i].label << "," << ds.clips[i].source << "\n";
}

ClipDatasetArrays load_clip_dataset(const fs::path& archive_path, const fs::path& labels_csv) {
    CheckpointArchive archive = read_checkpoint(archive_path);
    std::ifstream csv(labels_csv);
    require(csv.good(), "MissingFile", "labels CSV not found: " + labels_csv.string());
    std::string line;
    std::getline(csv, line); // header
    ClipDatasetArrays ds;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, label, source;
        std::getline(ss, id, ',');
        std::getline(ss, label, ',');
        std::getline(ss, source, ',');
        const TensorF frames = archive.tensor("clips/" + id + "/frames");
        const TensorF mask = archive.tensor("clips/" + id + "/mask");
        FrameSequence seq;
        const std::size_t t = frames.dim(0), h = frames.dim(1), w = frames.dim(2),
                          c = frames.dim(3);
        for (std::size_t s = 0; s < t; ++s) {
            TensorF f({h, w, c});
            std::copy(frames.vec().begin() + s * f.size(),
                      frames.vec().begin() + (s + 1) * f.size(), f.vec().begin());
            seq.frames.push_back(std::move(f));
            seq.valid.push_back(mask[s] != 0.0f ? 1 : 0);
        }
        seq.label = std::stoi(label);
        seq.source = source;
        ds.clips.push_back(std::move(seq));
    }
    return ds;
}

int cmd_extract_frames(const GlobalOpts& g, const std::string& violent_dir,
                       const std::string& nonviolent_dir) {
    RunConfig cfg = load_config(g);
    const fs::path run_dir = make_run_dir(cfg, g);
    PngDirDecoder png_decoder;
    std::vector<const ClipDecoder*> decoders{&png_decoder};
    ProcessReport report;
    auto violent = process_videos(violent_dir, 1, cfg.max_frames, decoders, &report);
    auto nonviolent = process_videos(nonviolent_dir, 0, cfg.max_frames, decoders, &report);
    ClipDatasetArrays ds = assemble_and_shuffle(std::move(violent), std::move(nonviolent),
                                                cfg.seed);
    save_clip_dataset(ds, run_dir / "checkpoints" / "clips.csa",
                      run_dir / "logs" / "labels.csv");
    nlohmann::json extra{{"clips", ds.clips.size()}, {"skipped", report.skipped}};
    for (const auto& s : report.skipped)
        std::cerr << "warning: skipped undecodable entry " << s << "\n";
    write_run_report(run_dir, cfg, extra);
    return 0;
}

int cmd_train_anomaly(const GlobalOpts& g, const std::string& clips_path,
                      const std::string& labels_path, const std::string& pretrained_path) {
    RunConfig cfg = load_config(g);
    const fs::path run_dir = make_run_dir(cfg, g);
    ClipDatasetArrays ds = load_clip_dataset(clips_path, labels_path);

    Rng rng(cfg.seed);
    std::optional<CheckpointArchive> pretrained;
    if (!pretrained_path.empty()) pretrained = read_checkpoint(pretrained_path);
    AnomalyModel<float> model(cfg.vgg, cfg.wdrb, cfg.lstm, rng, cfg.anomaly.share_streams,
                              pretrained ? &*pretrained : nullptr);
    auto [checkpoint, log] = train_anomaly(model, ds, cfg.anomaly, rng);
    checkpoint.metadata()["seed"] = std::to_string(cfg.seed);
    write_checkpoint(checkpoint, run_dir / "checkpoints" / "anomaly.csa");
    log.write_csv(run_dir / "logs" / "anomaly.csv", "acc");
    write_run_report(run_dir, cfg,
                     {{"final_acc", log.records.empty() ? 0.0 : log.records.back().accuracy}});
    return 0;
}

int cmd_eval_anomaly(const GlobalOpts& g, const std::string& checkpoint_path,
                     const std::string& clips_path, const std::string& labels_path) {
    RunConfig cfg = load_config(g);
    const fs::path run_dir = make_run_dir(cfg, g);
    ClipDatasetArrays ds = load_clip_dataset(clips_path, labels_path);
    Rng rng(cfg.seed);
    AnomalyModel<float> model(cfg.vgg, cfg.wdrb, cfg.lstm, rng, cfg.anomaly.share_streams);
    model.load(read_checkpoint(checkpoint_path));
    AnomalyEvaluation eval = evaluate_anomaly(model, ds);
    nlohmann::json j;
    j["confusion"] = {{eval.confusion.tn, eval.confusion.fp},
                      {eval.confusion.fn, eval.confusion.tp}};
    j["precision"] = eval.metrics.precision;
    j["recall"] = eval.metrics.recall;
    j["f1"] = eval.metrics.f1;
    j["degenerate"] = eval.metrics.degenerate;
    std::ofstream(run_dir / "reports" / "eval.json") << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    write_run_report(run_dir, cfg, {{"f1", eval.metrics.f1}});
    return 0;
}

int cmd_report(const std::string& run_dir_str) {
    const fs::path run_dir = run_dir_str;
    const fs::path logs = run_dir / "logs";
    require(fs::is_directory(logs), "MissingLogs", "no logs directory in " + run_dir.string());
    nlohmann::json summary;
    bool any = false;
    for (const auto& e : fs::directory_iterator(logs)) {
        if (e.path().extension() != ".csv") continue;
        CsvLog log;
        try {
            log = read_csv_log(e.path());
        } catch (const Error&) {
            continue; // non-numeric CSVs (e.g. label tables) are not curves
        }
        if (log.columns.empty() || log.rows.empty()) continue;
        any = true;
        std::vector<double> x;
        for (const auto& row : log.rows) x.push_back(row[0]);
        const std::string stem = e.path().stem().string();
        for (std::size_t col = 1; col < log.columns.size(); ++col) {
            std::vector<double> y;
            for (const auto& row : log.rows) y.push_back(row[col]);
            const std::string name = stem + "_" + log.columns[col];
            write_curve_svg(run_dir / "reports" / (name + ".svg"), name, x, y,
                            log.columns[col]);
            summary[stem][log.columns[col] + "_final"] = y.back();
        }
    }
    require(any, "MissingLogs", "no curve logs found in " + logs.string());
    if (fs::exists(run_dir / "reports" / "eval.json")) {
        std::ifstream in(run_dir / "reports" / "eval.json");
        nlohmann::json eval;
        in >> eval;
        summary["eval"] = eval;
    }
    std::ofstream(run_dir / "reports" / "summary.json") << summary.dump(2) << "\n";
    std::cout << summary.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"crowd scene analysis toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "run config JSON");
    std::uint64_t seed_flag = 0;
    auto* seed_opt = app.add_option("--seed", seed_flag, "seed override");
    app.add_option("--out", g.out_dir, "output root override");
    app.add_option("--run-dir", g.run_dir, "explicit run directory");

    auto* prepare = app.add_subcommand("prepare", "cache density maps for a manifest");
    auto* pretrain = app.add_subcommand("pretrain-rotation", "stage-1 rotation pretext");
    auto* train_density = app.add_subcommand("train-density", "stage-2 distribution matching");
    std::string stage1_path;
    train_density->add_option("--stage1", stage1_path, "stage-1 checkpoint");
    auto* predict = app.add_subcommand("predict-count", "density + count prediction");
    std::string ckpt_path, calibrate;
    double scale = 1.0;
    predict->add_option("--checkpoint", ckpt_path, "stage-2 checkpoint")->required();
    predict->add_option("--scale", scale, "count scale");
    predict->add_option("--calibrate", calibrate, "scale source: first|prior");
    auto* extract = app.add_subcommand("extract-frames", "build the clip dataset");
    std::string violent_dir, nonviolent_dir;
    extract->add_option("--violent-dir", violent_dir, "violent clips")->required();
    extract->add_option("--nonviolent-dir", nonviolent_dir, "non-violent clips")->required();
    auto* train_anom = app.add_subcommand("train-anomaly", "train the violence classifier");
    std::string clips_path, labels_path, pretrained_path;
    train_anom->add_option("--clips", clips_path, "clips archive")->required();
    train_anom->add_option("--labels", labels_path, "labels CSV")->required();
    train_anom->add_option("--pretrained-vgg", pretrained_path, "frozen VGG weights");
    auto* eval_anom = app.add_subcommand("eval-anomaly", "evaluate the violence classifier");
    std::string eval_ckpt, eval_clips, eval_labels;
    eval_anom->add_option("--checkpoint", eval_ckpt, "anomaly checkpoint")->required();
    eval_anom->add_option("--clips", eval_clips, "clips archive")->required();
    eval_anom->add_option("--labels", eval_labels, "labels CSV")->required();
    auto* report = app.add_subcommand("report", "emit curves and summary for a run");
    std::string report_dir;
    report->add_option("--run-dir", report_dir, "run directory")->required();

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();
    CLI11_PARSE(app, argc, argv);
    if (seed_opt->count() > 0) g.seed = seed_flag;

    try {
        if (prepare->parsed()) return cmd_prepare(g);
        if (pretrain->parsed()) return cmd_pretrain_rotation(g);
        if (train_density->parsed()) return cmd_train_density(g, stage1_path);
        if (predict->parsed()) return cmd_predict_count(g, ckpt_path, scale, calibrate);
        if (extract->parsed()) return cmd_extract_frames(g, violent_dir, nonviolent_dir);
        if (train_anom->parsed())
            return cmd_train_anomaly(g, clips_path, labels_path, pretrained_path);
        if (eval_anom->parsed()) return cmd_eval_anomaly(g, eval_ckpt, eval_clips, eval_labels);
        if (report->parsed()) return cmd_report(report_dir);
    } catch (const Error& e) {
        std::cerr << "error[" << e.code() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error[Internal]: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
