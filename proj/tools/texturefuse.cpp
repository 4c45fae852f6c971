// texturefuse command line: preprocess, train, eval, predict, bench, inspect.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "CLI11.hpp"
#include "texturefuse/texturefuse.hpp"

namespace fs = std::filesystem;
using namespace texturefuse;

namespace {

// Single-line error for scripts: "error: <kind>: <message>"
int fail(const char* kind, const std::string& msg) {
    std::string flat = msg;
    for (auto& ch : flat)
        if (ch == '\n') ch = ' ';
    std::cerr << "error: " << kind << ": " << flat << '\n';
    return 1;
}

TextureImage decode_image(const fs::path& path) {
    const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw FormatError(path.string() + ": cannot decode image");
    cv::Mat f;
    bgr.convertTo(f, CV_32FC3, 1.0 / 255.0);
    TextureImage img{Tensor<float>({3, std::size_t(f.rows), std::size_t(f.cols)}), path.filename().string()};
    for (int i = 0; i < f.rows; ++i) {
        const auto* row = f.ptr<cv::Vec3f>(i);
        for (int j = 0; j < f.cols; ++j)
            for (std::size_t c = 0; c < 3; ++c) img.pixels(c, std::size_t(i), std::size_t(j)) = row[j][2 - c];
    }
    return img;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw FormatError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& s) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw FormatError("cannot write " + p.string());
    out << s;
}

NetKind net_kind(const std::string& s) {
    const auto k = parse_net_kind(s);
    if (!k) throw UsageError("unknown net '" + s + "' (haptic, visual, visual-tcnn, fusion)");
    return *k;
}

// ---------------------------------------------------------------------------
// Weights directory
//
//   <net>.net / <net>.tfw       description and parameters of a unimodal net
//   <net>.config                training config used
//   <net>_loss.csv              iteration,lr,loss
//   means.json                  image channel means (visual nets)
//   classes.txt                 class names, one per line
//   fusion/{haptic,visual,head}.{net,tfw}, fusion/fusion.json

void save_model(const fs::path& dir, const std::string& stem, const Network<float>& net) {
    write_text(dir / (stem + ".net"), describe(net.spec()));
    save_network(dir / (stem + ".tfw"), net);
}

Network<float> load_model(const fs::path& dir, const std::string& stem) {
    const auto desc = dir / (stem + ".net");
    if (!fs::exists(desc)) throw FormatError("no trained '" + stem + "' network in " + dir.string());
    return load_network<float>(dir / (stem + ".tfw"), parse_description(read_text(desc)));
}

void save_means(const fs::path& dir, const ChannelMeans& m) {
    write_text(dir / "means.json", nlohmann::json{{"mean", m}}.dump() + "\n");
}

ChannelMeans load_means(const fs::path& dir) {
    const auto p = dir / "means.json";
    if (!fs::exists(p)) throw FormatError("no image channel means in " + dir.string() + "; train a visual net first");
    try {
        return nlohmann::json::parse(read_text(p)).at("mean").get<ChannelMeans>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(p.string() + ": " + e.what());
    }
}

std::vector<std::string> load_classes(const fs::path& dir) {
    std::vector<std::string> out;
    std::istringstream in(read_text(dir / "classes.txt"));
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

void write_loss_csv(const fs::path& p, const std::vector<double>& losses, const LrSchedule& s) {
    std::ostringstream os;
    os << "iteration,lr,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) os << i << ',' << lr_at(s, i) << ',' << losses[i] << '\n';
    write_text(p, os.str());
}

struct FusionFiles {
    FusionModel<float> model;
    std::string visual_kind;
};

void save_fusion(const fs::path& dir, const FusionModel<float>& m, const std::string& visual_kind) {
    const auto f = dir / "fusion";
    save_model(f, "haptic", m.haptic);
    save_model(f, "visual", m.visual);
    save_model(f, "head", m.head);
    write_text(f / "fusion.json", nlohmann::json{{"layer", fusion_layer_name(m.layer)},
                                                 {"source", m.source == FeatureSource::outputs ? "outputs" : "inputs"},
                                                 {"visual_net", visual_kind}}
                                          .dump() + "\n");
}

FusionFiles load_fusion(const fs::path& dir) {
    const auto f = dir / "fusion";
    if (!fs::exists(f / "fusion.json")) throw FormatError("no trained fusion model in " + dir.string());
    const auto meta = nlohmann::json::parse(read_text(f / "fusion.json"));
    FusionModel<float> m{load_model(f, "haptic"), load_model(f, "visual"), load_model(f, "head"),
                         parse_fusion_layer(meta.at("layer").get<std::string>()),
                         parse_feature_source(meta.at("source").get<std::string>())};
    if (feature_dim(m.haptic.spec(), m.layer, m.source) + feature_dim(m.visual.spec(), m.layer, m.source) !=
        m.head.spec().input_channels)
        throw FormatError(f.string() + ": fusion head does not fit the stored feature layers");
    return {std::move(m), meta.value("visual_net", "visual")};
}

// Cached dataset, with a hint when handed a raw layout.
Dataset open_data(const fs::path& root) {
    if (!fs::exists(root / "manifest.json") && fs::is_directory(root))
        throw FormatError(root.string() + " has no manifest.json; run 'texturefuse preprocess --data " + root.string() +
                          " --out <cache>' first");
    return load_cache(root);
}

FoldSplit pick_fold(const Dataset& d, const TrainConfig& cfg, std::size_t fold) {
    if (fold >= cfg.folds)
        throw RangeError("fold " + std::to_string(fold) + " outside 0.." + std::to_string(cfg.folds - 1));
    return make_folds(d, cfg.folds, cfg.fold_seed)[fold];
}

Tensor<float> haptic_input(const fs::path& p, const PreprocessOptions& opt) {
    Tensor<float> frames = p.extension() == ".tfw"
                               ? load_tensor<float>(p)
                               : enframe_spectrogram(load_combined_trace(p, opt.trim_leading), opt.spectrogram).frames;
    if (frames.rank() != 3 || frames.dim(0) != 1) throw ShapeError(p.string() + ": expected a [1,C,T] spectrogram");
    return normalize_channels(Spectrogram{std::move(frames), opt.spectrogram.window_len, opt.spectrogram.hop}).frames;
}

Tensor<float> image_input(const fs::path& p, const ChannelMeans& means, bool half) {
    TextureImage img = p.extension() == ".tfw" ? TextureImage{load_tensor<float>(p), p.string()} : decode_image(p);
    img.validate();
    if (half && p.extension() != ".tfw") img = half_resize(img);
    return mean_subtract(img, means);
}

nlohmann::json vote_json(const VoteResult& r, const std::vector<std::string>& classes) {
    nlohmann::json j;
    j["label"] = r.label;
    if (r.label < classes.size()) j["class"] = classes[r.label];
    j["votes"] = r.counts;
    j["fragments"] = r.fragment_labels;
    return j;
}

// ---------------------------------------------------------------------------
// Subcommands

struct PreprocessArgs {
    std::string haptic, images, data, out;
    std::size_t trim = 0;
    std::string scale = "magnitude";
    bool full_size = false;
};

int run_preprocess(const PreprocessArgs& a) {
    if (a.data.empty() && a.haptic.empty() && a.images.empty())
        throw UsageError("preprocess needs --data, --haptic or --images");
    if (!a.data.empty() && (!a.haptic.empty() || !a.images.empty()))
        throw UsageError("--data already covers both modalities");
    const fs::path root = !a.data.empty() ? a.data : !a.haptic.empty() ? a.haptic : a.images;
    LoadOptions lo;
    lo.require_haptic = a.data.size() || a.haptic.size();
    lo.require_images = a.data.size() || a.images.size();
    if (!a.haptic.empty() && !a.images.empty()) {
        if (fs::path(a.haptic) != fs::path(a.images))
            throw UsageError("--haptic and --images must name the same dataset root");
        lo.require_haptic = lo.require_images = true;
    }
    const auto idx = load_tum(root, lo);
    PreprocessOptions opt;
    opt.trim_leading = a.trim;
    opt.spectrogram.scale = parse_spectrum_scale(a.scale);
    opt.half_size = !a.full_size;
    const auto d = preprocess_dataset(idx, a.out, decode_image, opt);
    std::size_t nh = 0, ni = 0;
    for (std::size_t c = 0; c < d.class_count(); ++c) {
        nh += d.haptic[c].size();
        ni += d.images[c].size();
    }
    std::cout << "cached " << nh << " spectrograms and " << ni << " images over " << d.class_count() << " classes in "
              << a.out << '\n';
    return 0;
}

struct TrainArgs {
    std::string net, config, data, out, visual_net = "visual";
    std::vector<std::string> set;
    std::size_t fold = 0;
    bool quiet = false;
};

TrainConfig resolve_config(NetKind kind, const std::string& file, const std::vector<std::string>& set) {
    TrainConfig cfg = table_config(kind);
    if (!file.empty()) cfg = load_config(file, cfg);
    std::string extra;
    for (const auto& s : set) extra += s + "\n";
    if (!extra.empty()) cfg = parse_config(extra, cfg);
    return cfg;
}

int run_train(const TrainArgs& a) {
    const NetKind kind = net_kind(a.net);
    const TrainConfig cfg = resolve_config(kind, a.config, a.set);
    const Dataset data = open_data(a.data);
    const FoldSplit fold = pick_fold(data, cfg, a.fold);
    const fs::path out = a.out;
    fs::create_directories(out);

    TrainLogger logger;
    if (!a.quiet)
        logger = [](const TrainLogEntry& e) {
            std::fprintf(stderr, "iter %zu lr %.3g loss %.5f\n", e.iteration, e.lr, e.loss);
        };
    const std::string name = net_kind_name(kind);
    write_text(out / (name + ".config"), format_config(cfg));
    std::string classes;
    for (const auto& c : data.classes) classes += c + "\n";
    write_text(out / "classes.txt", classes);

    if (kind == NetKind::haptic) {
        auto r = train_haptic<float>(data, fold, cfg, logger);
        save_model(out, name, r.net);
        write_loss_csv(out / (name + "_loss.csv"), r.losses, cfg.effective_schedule());
    } else if (kind == NetKind::visual || kind == NetKind::visual_tcnn) {
        auto r = train_visual<float>(data, fold, cfg, kind, logger);
        save_model(out, name, r.net);
        save_means(out, r.means);
        write_loss_csv(out / (name + "_loss.csv"), r.losses, cfg.effective_schedule());
        if (!cfg.trunk_weights.empty())
            std::cerr << (r.trunk_imported ? "trunk weights imported from " : "trunk weights not found, random init: ")
                      << cfg.trunk_weights << '\n';
    } else {
        net_kind(a.visual_net);
        auto r = train_fusion<float>(data, fold, cfg, load_model(out, "haptic"), load_model(out, a.visual_net),
                                     load_means(out), logger);
        save_fusion(out, r.model, a.visual_net);
        write_loss_csv(out / "fusion_loss.csv", r.losses, cfg.effective_schedule());
    }
    std::cout << "trained " << name << " on fold " << a.fold << " -> " << out.string() << '\n';
    return 0;
}

struct EvalArgs {
    std::string net, weights, data, report;
    std::size_t fold = 0;
    std::optional<std::size_t> k;
    std::uint64_t seed = 1;
};

int run_eval(const EvalArgs& a) {
    const NetKind kind = net_kind(a.net);
    const fs::path w = a.weights;
    const std::string name = net_kind_name(kind);
    const auto cfg_path = w / (name + ".config");
    if (!fs::exists(cfg_path)) throw FormatError("no trained '" + name + "' network in " + w.string());
    const TrainConfig cfg = load_config(cfg_path, table_config(kind));
    const Dataset data = open_data(a.data);
    const FoldSplit fold = pick_fold(data, cfg, a.fold);

    Metrics m;
    if (kind == NetKind::haptic) {
        m = evaluate_haptic(load_model(w, name), data, fold);
    } else if (kind == NetKind::visual || kind == NetKind::visual_tcnn) {
        m = evaluate_visual(load_model(w, name), data, fold, load_means(w));
    } else {
        const auto f = load_fusion(w);
        m = evaluate_fusion(f.model, data, fold, load_means(w), a.k.value_or(cfg.fusion_k), a.seed);
    }
    if (m.class_count != data.class_count()) throw RangeError("network and dataset disagree on the class count");
    const nlohmann::json extra{{"net", name}, {"fold", a.fold}, {"folds", cfg.folds}};
    if (!a.report.empty()) write_reports(a.report, m, data.classes, extra);
    std::printf("%s fold %zu: fragment accuracy %.4f, voting accuracy %.4f (%zu items)\n", name.c_str(), a.fold,
                m.fragment_accuracy, m.voting_accuracy, m.items);
    return 0;
}

struct PredictArgs {
    std::string haptic, image, weights, fusion, net = "auto", visual_net = "visual";
    std::size_t k = 1000;
    std::uint64_t seed = 1;
    bool full_size = false;
};

int run_predict(const PredictArgs& a) {
    if (a.haptic.empty() && a.image.empty()) throw UsageError("predict needs --haptic and/or --image");
    const fs::path w = a.weights;
    const auto classes = fs::exists(w / "classes.txt") ? load_classes(w) : std::vector<std::string>{};
    nlohmann::json out;
    const bool fused = !a.haptic.empty() && !a.image.empty() && a.net != "haptic" && a.net != "visual";
    if (fused) {
        auto f = load_fusion(w);
        if (!a.fusion.empty() && parse_fusion_layer(a.fusion) != f.model.layer)
            throw UsageError("the stored fusion head was trained on " + std::string(fusion_layer_name(f.model.layer)) +
                             ", not " + a.fusion);
        std::mt19937_64 rng(a.seed);
        const auto r = classify_fused(f.model, haptic_input(a.haptic, {}), image_input(a.image, load_means(w), !a.full_size),
                                      a.k, rng);
        out = vote_json(r, classes);
        out["mode"] = std::string("fusion-") + fusion_layer_name(f.model.layer);
        out["k"] = a.k;
    } else if (!a.haptic.empty()) {
        if (!a.image.empty()) throw UsageError("--net haptic takes only --haptic");
        out = vote_json(classify_haptic(load_model(w, "haptic"), haptic_input(a.haptic, {})), classes);
        out["mode"] = "haptic";
    } else {
        const auto r = classify_image(load_model(w, a.visual_net), image_input(a.image, load_means(w), !a.full_size));
        out = vote_json(r, classes);
        out["mode"] = a.visual_net;
    }
    std::cout << out.dump() << '\n';
    return 0;
}

struct BenchArgs {
    std::vector<std::string> nets{"haptic"};
    std::vector<std::size_t> frames, sizes;
    std::size_t runs = 10, warmup = 2, width_divisor = 1, classes = tum_class_count;
    std::uint64_t seed = 1;
    std::string csv;
};

int run_bench(const BenchArgs& a) {
    std::vector<BenchReport> reports;
    for (const auto& n : a.nets) {
        const NetKind kind = net_kind(n);
        if (kind == NetKind::fusion) throw UsageError("bench covers haptic, visual and visual-tcnn");
        BuildOptions o;
        o.width_divisor = a.width_divisor;
        o.class_count = a.classes;
        const auto net = Network<float>::random(build_network(kind, o), a.seed);
        const auto rf = receptive_field(net.spec());
        std::vector<Shape> inputs;
        if (kind == NetKind::haptic) {
            for (auto f : a.frames.empty() ? std::vector<std::size_t>{rf.min_input.w, 800} : a.frames)
                inputs.push_back({1, spectrogram_channels, f});
        } else {
            for (auto s : a.sizes.empty() ? std::vector<std::size_t>{rf.min_input.h, 384} : a.sizes) inputs.push_back({3, s, s});
        }
        for (const auto& in : inputs) reports.push_back(bench(net, in, a.runs, a.warmup, a.seed));
    }
    print_bench_table(std::cout, reports);
    std::ostringstream csv;
    csv << bench_csv_header() << '\n';
    for (const auto& r : reports) csv << bench_csv_row(r) << '\n';
    std::cout << '\n' << csv.str();
    if (!a.csv.empty()) write_text(a.csv, csv.str());
    for (const auto& r : reports)
        if (!r.passed())
            return fail("equivalence", r.net + " deviates by " + std::to_string(r.max_dev) + " on " + to_string(r.input));
    return 0;
}

struct InspectArgs {
    std::string net = "haptic", description;
    std::size_t width_divisor = 1, classes = tum_class_count;
};

int run_inspect(const InspectArgs& a) {
    NetworkSpec spec;
    if (!a.description.empty()) {
        spec = parse_description(read_text(a.description));
    } else {
        const NetKind kind = net_kind(a.net);
        BuildOptions o;
        o.width_divisor = a.width_divisor;
        o.class_count = a.classes;
        if (kind == NetKind::fusion) {
            const auto h = build_hapticnet(o), v = build_visualnet(o);
            spec = build_fusion_head(feature_dim(h, FusionLayer::fc2, FeatureSource::outputs),
                                     feature_dim(v, FusionLayer::fc2, FeatureSource::outputs), a.classes);
        } else {
            spec = build_network(kind, o);
        }
    }
    spec.validate();
    std::printf("network %s, %zu classes, %zu input channels\n", spec.name.c_str(), spec.class_count,
                spec.input_channels);
    std::optional<ReceptiveFieldInfo> rf;
    bool windowed = false;
    for (const auto& l : spec.layers) windowed |= l.has_window() && (l.kernel.h > 1 || l.kernel.w > 1);
    if (windowed) rf = receptive_field(spec);
    const Extent2 in = rf ? rf->min_input : Extent2{1, 1};
    const auto shapes = propagate_shapes(spec, {spec.input_channels, in.h, in.w});
    std::printf("%-4s %-10s %-10s %-7s %-7s %-7s %-18s %s\n", "#", "layer", "kind", "kernel", "stride", "pad",
                "output", "params");
    std::size_t total = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        std::size_t params = 0;
        if (l.kind == LayerKind::conv) {
            const std::size_t cin = shapes[i][0];
            params = l.out_channels * (cin / l.groups) * l.kernel.h * l.kernel.w + l.out_channels;
        }
        total += params;
        auto hw = [](Extent2 e) { return std::to_string(e.h) + "x" + std::to_string(e.w); };
        const bool win = l.has_window();
        std::string kind = kind_name(l.kind);
        if (l.relu) kind += "+relu";
        std::printf("%-4zu %-10s %-10s %-7s %-7s %-7s %-18s %zu\n", i + 1, l.name.c_str(), kind.c_str(),
                    win ? hw(l.kernel).c_str() : "-", win ? hw(l.stride).c_str() : "-",
                    win ? hw(l.padding).c_str() : "-", to_string(shapes[i + 1]).c_str(), params);
    }
    std::printf("parameters %zu\n", total);
    if (rf) {
        std::printf("receptive field %zux%zu\n", rf->rf.h, rf->rf.w);
        std::printf("jump %zux%zu\n", rf->jump.h, rf->jump.w);
        std::printf("min input %zux%zu (smallest single-window input %zux%zu)\n", rf->min_input.h, rf->min_input.w,
                    rf->smallest_input.h, rf->smallest_input.w);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"texturefuse: haptic, visual and fused surface classification"};
    app.require_subcommand(1);

    PreprocessArgs pa;
    auto* pre = app.add_subcommand("preprocess", "Convert raw traces and images into a tensor cache");
    pre->add_option("--data", pa.data, "dataset root (both modalities)");
    pre->add_option("--haptic", pa.haptic, "dataset root, haptic traces only");
    pre->add_option("--images", pa.images, "dataset root, images only");
    pre->add_option("--out", pa.out, "cache directory")->required();
    pre->add_option("--trim", pa.trim, "samples dropped from the start of each trace");
    pre->add_option("--spectrum", pa.scale, "magnitude, power or log")->check(CLI::IsMember({"magnitude", "power", "log"}));
    pre->add_flag("--full-size", pa.full_size, "keep images at full resolution");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train one network on one fold");
    train->add_option("--net", ta.net, "haptic, visual, visual-tcnn or fusion")->required();
    train->add_option("--fold", ta.fold, "fold index");
    train->add_option("--config", ta.config, "key=value config file");
    train->add_option("--set", ta.set, "extra key=value overrides");
    train->add_option("--data", ta.data, "preprocessed cache")->required();
    train->add_option("--out", ta.out, "weights directory")->required();
    train->add_option("--visual-net", ta.visual_net, "visual trunk for fusion");
    train->add_flag("--quiet", ta.quiet, "no loss log");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Evaluate a trained network on a held-out fold");
    eval->add_option("--net", ea.net)->required();
    eval->add_option("--weights", ea.weights, "weights directory")->required();
    eval->add_option("--data", ea.data, "preprocessed cache")->required();
    eval->add_option("--fold", ea.fold);
    eval->add_option("--report", ea.report, "report directory");
    eval->add_option("--k", ea.k, "fusion samples");
    eval->add_option("--seed", ea.seed);

    PredictArgs qa;
    auto* predict = app.add_subcommand("predict", "Classify one trace and/or image");
    predict->add_option("--haptic", qa.haptic, ".acc3/.acc1 trace or cached spectrogram");
    predict->add_option("--image", qa.image, "image file or cached image tensor");
    predict->add_option("--weights", qa.weights, "weights directory")->required();
    predict->add_option("--fusion", qa.fusion, "fc2 or fc3")->check(CLI::IsMember({"fc2", "fc3"}));
    predict->add_option("--net", qa.net, "force haptic or visual when both inputs are given")
        ->check(CLI::IsMember({"auto", "haptic", "visual"}));
    predict->add_option("--visual-net", qa.visual_net);
    predict->add_option("--k", qa.k);
    predict->add_option("--seed", qa.seed);
    predict->add_flag("--full-size", qa.full_size, "image is already at preprocessing scale");

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("bench", "Dense pass versus sliding-window oracle");
    bench_cmd->add_option("--net", ba.nets, "haptic, visual, visual-tcnn (repeatable)");
    bench_cmd->add_option("--frames", ba.frames, "haptic input lengths");
    bench_cmd->add_option("--size", ba.sizes, "square image sides");
    bench_cmd->add_option("--runs", ba.runs);
    bench_cmd->add_option("--warmup", ba.warmup);
    bench_cmd->add_option("--width-divisor", ba.width_divisor);
    bench_cmd->add_option("--classes", ba.classes);
    bench_cmd->add_option("--seed", ba.seed);
    bench_cmd->add_option("--csv", ba.csv, "also write the CSV here");

    InspectArgs ia;
    auto* inspect = app.add_subcommand("inspect", "Layer table and receptive field of a network");
    inspect->add_option("--net", ia.net);
    inspect->add_option("--description", ia.description, ".net description file");
    inspect->add_option("--width-divisor", ia.width_divisor);
    inspect->add_option("--classes", ia.classes);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*pre) return run_preprocess(pa);
        if (*train) return run_train(ta);
        if (*eval) return run_eval(ea);
        if (*predict) return run_predict(qa);
        if (*bench_cmd) return run_bench(ba);
        if (*inspect) return run_inspect(ia);
    } catch (const UsageError& e) {
        fail("usage", e.what());
        return 2;
    } catch (const FormatError& e) {
        return fail("format", e.what());
    } catch (const ShapeError& e) {
        return fail("shape", e.what());
    } catch (const RangeError& e) {
        return fail("range", e.what());
    } catch (const NumericError& e) {
        return fail("numeric", e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 2;
}
