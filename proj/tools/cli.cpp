#include "cli.hpp"

#include "hazesplat/config.hpp"
#include "hazesplat/image.hpp"
#include "hazesplat/normalize.hpp"
#include "hazesplat/scatter.hpp"
#include "hazesplat/scenegen.hpp"
#include "hazesplat/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace hazesplat::cli {

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename Body>
int guarded(CLI::App& app, const std::vector<std::string>& args, Body&& body) {
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }
    try {
        body();
        return kOk;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kInvariant;
    }
}

std::string fmt(double v, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

// PPM files of a directory in name order.
std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .ppm images in " + dir.string());
    return files;
}

Rgb parse_rgb(const std::vector<double>& v) {
    if (v.size() == 1) return {static_cast<float>(v[0]), static_cast<float>(v[0]), static_cast<float>(v[0])};
    if (v.size() == 3) return {static_cast<float>(v[0]), static_cast<float>(v[1]), static_cast<float>(v[2])};
    throw UsageError("colours take one gray value or three channel values");
}

// Training flags that map onto config keys. Values are kept as text and go
// through the same parser as the config file.
struct ConfigFlags {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::vector<std::string> sets;
    std::vector<std::pair<CLI::Option*, std::string>> bound;

    void add(CLI::App& app) {
        app.add_option("--config", config_path, "key = value config file");
        const std::pair<const char*, const char*> flags[] = {
            {"--steps", "total_steps"},           {"--seed", "seed"},
            {"--strategy", "strategy"},           {"--densify-stop", "densify_stop"},
            {"--lambda-ssim", "lambda_ssim"},     {"--lambda-dcp", "lambda_dcp"},
            {"--lambda-depth", "lambda_depth"},   {"--lambda-grad", "lambda_grad"},
            {"--val-interval", "val_interval"},   {"--cap-max", "cap_max"},
            {"--init-points", "init_points"},     {"--gamma", "gamma"},
        };
        for (const auto& [flag, key] : flags) bound.emplace_back(app.add_option(flag, values[key]), key);
        app.add_option("--set", sets, "extra key=value overrides");
    }

    PipelineConfig resolve() const {
        PipelineConfig cfg;
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        for (const auto& [opt, key] : bound)
            if (opt->count() > 0) set_config_value(cfg, key, values.at(key));
        for (const std::string& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
            apply_config_text(cfg, s.substr(0, eq) + " = " + s.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    }
};

struct RunSummary {
    Checkpoint best;
    std::size_t final_gaussians = 0;
};

RunSummary write_run(const TrainResult& result, const fs::path& out) {
    make_dir(out);
    write_text(out / "metrics.csv", metrics_csv(result.metrics));
    for (const Checkpoint& c : result.checkpoints)
        save_checkpoint(c, out / ("ckpt_" + std::to_string(c.step) + ".bin"));
    const Checkpoint& best = select_best_checkpoint(result.checkpoints);
    save_checkpoint(best, out / "best.bin");
    return {best, result.gaussian_counts.back()};
}

DataOverrides overrides_from(const std::string& images, const std::string& structure) {
    return {images.empty() ? fs::path() : fs::path(images), structure.empty() ? fs::path() : fs::path(structure)};
}

}  // namespace

int cmd_gen(const std::vector<std::string>& args) {
    CLI::App app{"Generate a synthetic multi-view dataset", "gen"};
    std::string preset = "checker-wall";
    std::string out;
    int n_train = 8;
    int n_val = 2;
    int size = 64;
    double radius = 3.0;
    double focal = 60.0;
    std::vector<double> haze;
    double jitter = 0.0;
    std::vector<double> background{1.0};
    std::uint64_t seed = 0;
    app.add_option("--preset", preset, "checker-wall, cluster or random-<k>");
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--train", n_train, "training views");
    app.add_option("--val", n_val, "validation views");
    app.add_option("--size", size, "image width and height");
    app.add_option("--radius", radius, "orbit radius");
    app.add_option("--focal", focal, "focal length in pixels");
    auto* haze_opt = app.add_option("--haze", haze, "airlight,beta")->delimiter(',')->expected(2);
    auto* jitter_opt = app.add_option("--jitter", jitter, "training-view colour jitter amplitude");
    app.add_option("--background", background, "gray value or r,g,b")->delimiter(',');
    app.add_option("--seed", seed);
    return guarded(app, args, [&] {
        if (n_train < 1 || n_val < 1 || size < 1 || !(radius > 0.0) || !(focal > 0.0))
            throw UsageError("view counts, size, radius and focal must be positive");
        DatasetOptions options;
        options.seed = seed;
        options.background = parse_rgb(background);
        if (haze_opt->count() > 0) options.haze = HazeModel{parse_rgb({haze[0]}), haze[1]};
        if (jitter_opt->count() > 0) options.jitter = jitter;
        const GaussianCloud scene = make_scene(preset, seed);
        const Orbit orbit = make_orbit(n_train, n_val, radius, size, focal);
        generate_dataset(scene, orbit, options, out);
        std::cout << (fs::path(out) / kManifestName).string() << "\n";
    });
}

int cmd_haze(const std::vector<std::string>& args) {
    CLI::App app{"Apply homogeneous haze to images given per-image depth", "haze"};
    std::string images, depth, out;
    std::vector<double> airlight{1.0};
    double beta = 1.0;
    app.add_option("--images", images, "directory of clean .ppm images")->required();
    app.add_option("--depth", depth, "directory of <name>.pfm depth maps")->required();
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--airlight", airlight, "gray value or r,g,b")->delimiter(',');
    app.add_option("--beta", beta, "scattering coefficient");
    return guarded(app, args, [&] {
        const HazeModel model{parse_rgb(airlight), beta};
        model.validate();
        make_dir(out);
        for (const fs::path& p : list_images(images)) {
            const ImageBuffer clean = read_image(p);
            const ImageBuffer d = read_image(fs::path(depth) / (p.stem().string() + ".pfm"));
            write_image(apply_haze(clean, transmission_from_depth(d, beta), model), fs::path(out) / p.filename());
        }
    });
}

int cmd_dehaze(const std::vector<std::string>& args) {
    CLI::App app{"Dark-channel-prior dehazing of every image in a directory", "dehaze"};
    std::string in, out, clean, csv;
    DcpConfig dcp;
    app.add_option("--in", in, "directory of hazy .ppm images")->required();
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--clean", clean, "directory of clean references with the same names");
    app.add_option("--csv", csv, "PSNR report path (default <out>/dehaze_psnr.csv)");
    app.add_option("--patch", dcp.patch_size);
    app.add_option("--omega", dcp.omega);
    app.add_option("--t-floor", dcp.t_floor);
    return guarded(app, args, [&] {
        dcp.validate();
        const auto files = list_images(in);
        make_dir(out);
        std::ostringstream report;
        report << "file,psnr_hazy,psnr_dehazed\n";
        double sum_hazy = 0.0, sum_dehazed = 0.0;
        for (const fs::path& p : files) {
            const ImageBuffer hazy = read_image(p);
            const ImageBuffer dehazed = dehaze_dcp(hazy, dcp);
            write_image(dehazed, fs::path(out) / p.filename());
            if (clean.empty()) continue;
            const ImageBuffer ref = read_image(fs::path(clean) / p.filename());
            const double ph = psnr(hazy, ref);
            const double pd = psnr(dehazed, ref);
            sum_hazy += ph;
            sum_dehazed += pd;
            report << p.filename().string() << ',' << fmt(ph) << ',' << fmt(pd) << '\n';
        }
        if (clean.empty()) return;
        write_text(csv.empty() ? fs::path(out) / "dehaze_psnr.csv" : fs::path(csv), report.str());
        const double n = static_cast<double>(files.size());
        std::cout << "mean_psnr_hazy=" << fmt(sum_hazy / n) << " mean_psnr_dehazed=" << fmt(sum_dehazed / n) << "\n";
    });
}

int cmd_normalize(const std::vector<std::string>& args) {
    CLI::App app{"Per-frame brightness normalization", "normalize"};
    std::string in, out, mode = "median", gt_dir, report;
    app.add_option("--in", in, "directory of .ppm frames")->required();
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--mode", mode, "gt or median")->check(CLI::IsMember({"gt", "median"}));
    app.add_option("--gt-dir", gt_dir, "clean frames with the same names (gt mode)");
    app.add_option("--report", report, "CSV of per-frame statistics");
    return guarded(app, args, [&] {
        if (mode == "gt" && gt_dir.empty()) throw UsageError("--mode gt requires --gt-dir");
        FrameSet input;
        const auto files = list_images(in);
        for (const fs::path& p : files) {
            input.frames.push_back(read_image(p));
            input.ids.push_back(p.filename().string());
        }
        input.validate();
        FrameSet output;
        output.ids = input.ids;
        const ChannelStats median = median_reference(input);
        for (std::size_t i = 0; i < input.size(); ++i) {
            const ChannelStats target =
                mode == "gt" ? channel_stats(read_image(fs::path(gt_dir) / input.ids[i])) : median;
            output.frames.push_back(normalize_to(input.frames[i], target));
        }
        make_dir(out);
        for (std::size_t i = 0; i < output.size(); ++i) write_image(output.frames[i], fs::path(out) / output.ids[i]);
        const double jump_in = max_adjacent_jump(input);
        const double jump_out = max_adjacent_jump(output);
        if (!report.empty()) {
            std::ostringstream csv;
            csv << "frame,stage,mean_r,mean_g,mean_b,std_r,std_g,std_b,max_adjacent_jump\n";
            for (const auto& [stage, set, jump] :
                 {std::tuple{"input", &input, jump_in}, std::tuple{"output", &output, jump_out}}) {
                for (std::size_t i = 0; i < set->size(); ++i) {
                    const ChannelStats s = channel_stats(set->frames[i]);
                    csv << set->ids[i] << ',' << stage;
                    for (double m : s.mean) csv << ',' << fmt(m, "%.9f");
                    for (double d : s.std) csv << ',' << fmt(d, "%.9f");
                    csv << ',' << fmt(jump, "%.9f") << '\n';
                }
            }
            write_text(report, csv.str());
        }
        std::cout << "max_adjacent_jump before=" << fmt(jump_in) << " after=" << fmt(jump_out) << "\n";
    });
}

int cmd_train(const std::vector<std::string>& args) {
    CLI::App app{"Train a Gaussian scene on a dataset manifest", "train"};
    std::string manifest, out, images, structure;
    ConfigFlags flags;
    app.add_option("--manifest", manifest, "transforms.json of the dataset")->required();
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--images", images, "training images to use instead of the manifest's");
    app.add_option("--structure", structure, "structural edge references (default: DCP-dehazed targets)");
    flags.add(app);
    return guarded(app, args, [&] {
        const PipelineConfig cfg = flags.resolve();
        make_dir(out);
        write_text(fs::path(out) / "effective_config.txt", format_config(cfg));
        const TrainingData data =
            load_training_data(read_manifest(manifest), overrides_from(images, structure), cfg.train.dcp);
        const RunSummary run = write_run(train(data, cfg.train, cfg.seed), out);
        std::cout << "best_step=" << run.best.step << " val_psnr=" << fmt(run.best.val_psnr, "%.9f")
                  << " val_ssim=" << fmt(run.best.val_ssim, "%.9f") << " n_gaussians=" << run.final_gaussians
                  << "\n";
    });
}

int cmd_eval(const std::vector<std::string>& args) {
    CLI::App app{"Mean validation PSNR/SSIM of a checkpoint", "eval"};
    std::string manifest, ckpt;
    app.add_option("--manifest", manifest)->required();
    app.add_option("--ckpt", ckpt)->required();
    return guarded(app, args, [&] {
        const SceneManifest m = read_manifest(manifest);
        const Checkpoint c = load_checkpoint(ckpt);
        c.cloud.validate();
        std::vector<ValidationView> views;
        for (const CameraView& cam : m.val_views) {
            ImageBuffer img = read_image(m.root / cam.image_path);
            if (img.height() != cam.height || img.width() != cam.width || img.channels() != 3)
                throw InvariantError(cam.image_path + ": image size does not match its camera");
            views.push_back({cam, std::move(img)});
        }
        const ValidationScore s = evaluate(c.cloud, views, m.background);
        std::cout << "psnr=" << fmt(s.psnr, "%.9f") << " ssim=" << fmt(s.ssim, "%.9f") << "\n";
    });
}

int cmd_render(const std::vector<std::string>& args) {
    CLI::App app{"Render colour, depth and alpha for dataset views", "render"};
    std::string manifest, ckpt, out, split = "val";
    app.add_option("--manifest", manifest)->required();
    app.add_option("--ckpt", ckpt, "checkpoint (omit for an empty scene)");
    app.add_option("--out", out)->required();
    app.add_option("--split", split)->check(CLI::IsMember({"train", "val", "all"}));
    return guarded(app, args, [&] {
        const SceneManifest m = read_manifest(manifest);
        const GaussianCloud cloud = ckpt.empty() ? GaussianCloud{} : load_checkpoint(ckpt).cloud;
        cloud.validate();
        std::vector<CameraView> views;
        if (split != "val") views.insert(views.end(), m.train_views.begin(), m.train_views.end());
        if (split != "train") views.insert(views.end(), m.val_views.begin(), m.val_views.end());
        make_dir(out);
        for (const CameraView& cam : views) {
            const std::string stem = fs::path(cam.image_path).stem().string();
            const RenderOutput r = render(cloud, cam, m.background);
            write_image(r.color, fs::path(out) / (stem + "_color.ppm"));
            write_image(r.depth, fs::path(out) / (stem + "_depth.pfm"));
            write_image(r.alpha, fs::path(out) / (stem + "_alpha.pfm"));
        }
    });
}

int cmd_ablate(const std::vector<std::string>& args) {
    CLI::App app{"Strategy x densify-stop x auxiliary-loss factorial", "ablate"};
    std::string manifest, out, images, structure;
    int early = 0;
    int late = 0;
    ConfigFlags flags;
    app.add_option("--manifest", manifest)->required();
    app.add_option("--out", out)->required();
    app.add_option("--images", images, "training images to use instead of the manifest's");
    app.add_option("--structure", structure, "structural edge references");
    auto* early_opt = app.add_option("--early-stop", early, "early densify_stop (default: configured value)");
    auto* late_opt = app.add_option("--late-stop", late, "late densify_stop (default: total steps)");
    flags.add(app);
    return guarded(app, args, [&] {
        const PipelineConfig base = flags.resolve();
        if (early_opt->count() == 0) early = base.train.densify.densify_stop;
        if (late_opt->count() == 0) late = base.train.optim.total_steps;
        if (late <= early) throw UsageError("--late-stop must exceed --early-stop");
        make_dir(out);
        write_text(fs::path(out) / "effective_config.txt", format_config(base));
        const TrainingData data =
            load_training_data(read_manifest(manifest), overrides_from(images, structure), base.train.dcp);

        std::ostringstream csv;
        csv << "strategy,stop,densify_stop,aux,best_psnr,best_ssim,best_step,final_gaussians\n";
        for (Strategy strategy : {Strategy::Mcmc, Strategy::Default}) {
            for (const auto& [stop_name, stop] : {std::pair{"early", early}, std::pair{"late", late}}) {
                for (const bool aux : {true, false}) {
                    PipelineConfig cfg = base;
                    cfg.train.densify.strategy = strategy;
                    cfg.train.densify.densify_stop = stop;
                    if (!aux) {
                        cfg.train.weights.lambda_depth = 0.0;
                        cfg.train.weights.lambda_dcp = 0.0;
                    }
                    cfg.validate();
                    const std::string cell = to_string(strategy) + "_" + stop_name + (aux ? "_aux" : "_noaux");
                    std::cerr << "ablate: " << cell << "\n";
                    const RunSummary run = write_run(train(data, cfg.train, cfg.seed), fs::path(out) / cell);
                    csv << to_string(strategy) << ',' << stop_name << ',' << stop << ',' << (aux ? "on" : "off")
                        << ',' << fmt(run.best.val_psnr, "%.9f") << ',' << fmt(run.best.val_ssim, "%.9f") << ','
                        << run.best.step << ',' << run.final_gaussians << '\n';
                }
            }
        }
        write_text(fs::path(out) / "ablation.csv", csv.str());
        std::cout << (fs::path(out) / "ablation.csv").string() << "\n";
    });
}

int run(int argc, char** argv) {
    static const std::map<std::string, int (*)(const std::vector<std::string>&)> commands{
        {"gen", cmd_gen},     {"haze", cmd_haze},     {"dehaze", cmd_dehaze}, {"normalize", cmd_normalize},
        {"train", cmd_train}, {"render", cmd_render}, {"eval", cmd_eval},     {"ablate", cmd_ablate},
    };
    const std::string usage =
        "usage: hazesplat <gen|haze|dehaze|normalize|train|render|eval|ablate> [options]\n"
        "       hazesplat <command> --help\n";
    if (argc < 2) {
        std::cerr << usage;
        return kUsage;
    }
    const std::string name = argv[1];
    if (name == "--help" || name == "-h") {
        std::cout << usage;
        return kOk;
    }
    const auto it = commands.find(name);
    if (it == commands.end()) {
        std::cerr << "unknown command '" << name << "'\n" << usage;
        return kUsage;
    }
    return it->second(std::vector<std::string>(argv + 2, argv + argc));
}

}  // namespace hazesplat::cli
