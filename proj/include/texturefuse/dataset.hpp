#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "texturefuse/container.hpp"
#include "texturefuse/haptic.hpp"
#include "texturefuse/inference.hpp"
#include "texturefuse/nets.hpp"
#include "texturefuse/optim.hpp"
#include "texturefuse/visual.hpp"

namespace texturefuse {

// ---------------------------------------------------------------------------
// Raw dataset layout
//
//   <root>/<class>/haptic/*.acc3 | *.acc1
//   <root>/<class>/image/*.png | *.jpg | *.jpeg

struct DatasetIndex {
    std::filesystem::path root;
    std::vector<std::string> classes;
    std::vector<std::vector<std::filesystem::path>> haptic;  // per class, sorted
    std::vector<std::vector<std::filesystem::path>> images;

    std::size_t class_count() const { return classes.size(); }
    std::size_t haptic_per_class() const { return haptic.empty() ? 0 : haptic.front().size(); }
    std::size_t images_per_class() const { return images.empty() ? 0 : images.front().size(); }
};

struct LoadOptions {
    std::optional<std::size_t> expected_classes;  // 69 for the full TUM set
    bool require_haptic = true;
    bool require_images = true;
};

namespace detail {

inline std::string lower(std::string s) {
    for (auto& ch : s) ch = char(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

inline std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                                     const std::vector<std::string>& extensions) {
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto ext = lower(e.path().extension().string());
        if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end()) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

inline const std::vector<std::string>& haptic_extensions() {
    static const std::vector<std::string> e{".acc3", ".acc1"};
    return e;
}

inline const std::vector<std::string>& image_extensions() {
    static const std::vector<std::string> e{".png", ".jpg", ".jpeg"};
    return e;
}

/// Scans a TUM-layout directory. Classes and files are ordered lexicographically.
/// Every class needs the same number of items per modality, and haptic and image
/// counts must agree when both modalities are required.
inline DatasetIndex load_tum(const std::filesystem::path& root, const LoadOptions& opt = {}) {
    if (!std::filesystem::is_directory(root)) throw FormatError("dataset root " + root.string() + " is not a directory");
    DatasetIndex idx;
    idx.root = root;
    std::vector<std::filesystem::path> class_dirs;
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw FormatError(root.string() + ": no class directories");
    if (opt.expected_classes && class_dirs.size() != *opt.expected_classes)
        throw FormatError(root.string() + ": found " + std::to_string(class_dirs.size()) + " classes, expected " +
                          std::to_string(*opt.expected_classes));

    auto modality = [&](const std::filesystem::path& dir, const std::string& cls, const char* what,
                        const std::vector<std::string>& ext) {
        if (!std::filesystem::is_directory(dir))
            throw FormatError("class '" + cls + "': missing " + what + " directory " + dir.string());
        auto files = detail::list_files(dir, ext);
        if (files.empty()) throw FormatError("class '" + cls + "': no " + what + " files in " + dir.string());
        return files;
    };
    for (const auto& d : class_dirs) {
        const std::string cls = d.filename().string();
        idx.classes.push_back(cls);
        idx.haptic.push_back(opt.require_haptic ? modality(d / "haptic", cls, "haptic", haptic_extensions())
                                                : std::vector<std::filesystem::path>{});
        idx.images.push_back(opt.require_images ? modality(d / "image", cls, "image", image_extensions())
                                                : std::vector<std::filesystem::path>{});
    }
    for (std::size_t c = 0; c < idx.classes.size(); ++c) {
        if (idx.haptic[c].size() != idx.haptic[0].size())
            throw FormatError("class '" + idx.classes[c] + "' has " + std::to_string(idx.haptic[c].size()) +
                              " haptic traces, class '" + idx.classes[0] + "' has " +
                              std::to_string(idx.haptic[0].size()));
        if (idx.images[c].size() != idx.images[0].size())
            throw FormatError("class '" + idx.classes[c] + "' has " + std::to_string(idx.images[c].size()) +
                              " images, class '" + idx.classes[0] + "' has " + std::to_string(idx.images[0].size()));
        if (opt.require_haptic && opt.require_images && idx.haptic[c].size() != idx.images[c].size())
            throw FormatError("class '" + idx.classes[c] + "' has " + std::to_string(idx.haptic[c].size()) +
                              " haptic traces but " + std::to_string(idx.images[c].size()) + " images");
    }
    return idx;
}

// ---------------------------------------------------------------------------
// Cross-validation folds

struct FoldSplit {
    std::size_t fold_id = 0;
    std::size_t fold_count = 0;
    // item indices per class
    std::vector<std::vector<std::size_t>> train_haptic, test_haptic;
    std::vector<std::vector<std::size_t>> train_images, test_images;
};

namespace detail {

inline std::vector<std::size_t> fold_permutation(std::size_t n, std::uint64_t seed, std::size_t cls, std::size_t modality) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(cls), std::uint32_t(modality)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    // Fisher-Yates with an explicit draw so the order does not depend on the std::shuffle implementation
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng() % i]);
    return p;
}

inline std::string divisor_hint(std::size_t n) {
    std::string s;
    for (std::size_t d = 2; d <= n; ++d)
        if (n % d == 0) s += (s.empty() ? "" : ", ") + std::to_string(d);
    return s.empty() ? "none" : s;
}

}  // namespace detail

/// Per class and modality, a seeded permutation of the item indices is cut into
/// `folds` equal test blocks; fold f tests block f and trains on the rest.
inline std::vector<FoldSplit> make_folds(std::size_t class_count, std::size_t haptic_per_class,
                                         std::size_t images_per_class, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw RangeError("cross validation needs at least 2 folds, got " + std::to_string(folds));
    if (class_count == 0) throw RangeError("cross validation needs at least one class");
    for (const auto& [n, what] : {std::pair{haptic_per_class, "haptic traces"}, std::pair{images_per_class, "images"}})
        if (n != 0 && n % folds != 0)
            throw RangeError(std::to_string(n) + " " + what + " per class do not split into " + std::to_string(folds) +
                             " folds; use a fold count that divides " + std::to_string(n) + " (" +
                             detail::divisor_hint(n) + ")");
    std::vector<FoldSplit> out(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        out[f].fold_id = f;
        out[f].fold_count = folds;
        for (auto* v : {&out[f].train_haptic, &out[f].test_haptic, &out[f].train_images, &out[f].test_images})
            v->resize(class_count);
    }
    for (std::size_t c = 0; c < class_count; ++c)
        for (std::size_t m = 0; m < 2; ++m) {
            const std::size_t n = m == 0 ? haptic_per_class : images_per_class;
            if (n == 0) continue;
            const auto perm = detail::fold_permutation(n, seed, c, m);
            const std::size_t block = n / folds;
            for (std::size_t f = 0; f < folds; ++f) {
                auto& train = m == 0 ? out[f].train_haptic[c] : out[f].train_images[c];
                auto& test = m == 0 ? out[f].test_haptic[c] : out[f].test_images[c];
                for (std::size_t i = 0; i < n; ++i) (i / block == f ? test : train).push_back(perm[i]);
                std::sort(train.begin(), train.end());
                std::sort(test.begin(), test.end());
            }
        }
    return out;
}

inline std::vector<FoldSplit> make_folds(const DatasetIndex& idx, std::size_t folds = 10, std::uint64_t seed = 0) {
    return make_folds(idx.class_count(), idx.haptic_per_class(), idx.images_per_class(), folds, seed);
}

// ---------------------------------------------------------------------------
// Preprocessed dataset
//
// Items are tensors: unnormalised [1,50,T] spectrograms and half-size [3,H,W]
// images in [0,1]. On disk they live in a cache directory next to manifest.json.

struct DataItem {
    std::filesystem::path file;
    std::shared_ptr<const Tensor<float>> value;  // resident tensor, or null to read file on demand

    std::shared_ptr<const Tensor<float>> get() const {
        if (value) return value;
        return std::make_shared<const Tensor<float>>(load_tensor<float>(file));
    }
};

struct Dataset {
    std::vector<std::string> classes;
    std::vector<std::vector<DataItem>> haptic;  // per class
    std::vector<std::vector<DataItem>> images;

    std::size_t class_count() const { return classes.size(); }
    std::size_t haptic_per_class() const { return haptic.empty() ? 0 : haptic.front().size(); }
    std::size_t images_per_class() const { return images.empty() ? 0 : images.front().size(); }

    void validate() const {
        if (classes.empty()) throw RangeError("dataset has no classes");
        if (haptic.size() != classes.size() || images.size() != classes.size())
            throw RangeError("dataset modality lists do not match the class list");
        for (std::size_t c = 0; c < classes.size(); ++c)
            if (haptic[c].size() != haptic_per_class() || images[c].size() != images_per_class())
                throw RangeError("class '" + classes[c] + "' has a different item count than '" + classes[0] + "'");
    }
};

inline std::vector<FoldSplit> make_folds(const Dataset& d, std::size_t folds, std::uint64_t seed) {
    return make_folds(d.class_count(), d.haptic_per_class(), d.images_per_class(), folds, seed);
}

/// Decodes an image file to RGB in [0,1]; supplied by the caller so the core
/// stays independent of image codecs.
using ImageDecoder = std::function<TextureImage(const std::filesystem::path&)>;

struct PreprocessOptions {
    SpectrogramOptions spectrogram;
    std::size_t trim_leading = 0;  // samples dropped from the start of every trace
    bool half_size = true;
};

namespace detail {

inline void write_manifest(const std::filesystem::path& cache, const nlohmann::json& items,
                           const std::vector<std::string>& classes) {
    nlohmann::json m;
    m["format"] = "texturefuse-cache";
    m["version"] = 1;
    m["classes"] = classes;
    m["items"] = items;
    std::ofstream out(cache / "manifest.json");
    if (!out) throw FormatError("cannot write " + (cache / "manifest.json").string());
    out << m.dump(1) << '\n';
}

}  // namespace detail

/// Converts every trace and image of the index into cached tensors and writes
/// the manifest. Either modality may be skipped (decoder null / no traces).
inline Dataset preprocess_dataset(const DatasetIndex& idx, const std::filesystem::path& cache,
                                  const ImageDecoder& decode_image, const PreprocessOptions& opt = {}) {
    Dataset d;
    d.classes = idx.classes;
    d.haptic.resize(idx.class_count());
    d.images.resize(idx.class_count());
    nlohmann::json items = nlohmann::json::array();
    for (std::size_t c = 0; c < idx.class_count(); ++c) {
        const auto& cls = idx.classes[c];
        for (const auto& src : idx.haptic[c]) {
            const auto trace = load_combined_trace(src, opt.trim_leading);
            const auto s = enframe_spectrogram(trace, opt.spectrogram);
            const std::filesystem::path rel = std::filesystem::path(cls) / "haptic" / (src.stem().string() + ".tfw");
            save_tensor(cache / rel, s.frames, "spectrogram");
            d.haptic[c].push_back({cache / rel, std::make_shared<const Tensor<float>>(s.frames)});
            items.push_back({{"class", cls}, {"label", c}, {"modality", "haptic"}, {"source", src.string()},
                             {"file", rel.generic_string()}, {"frames", s.frame_count()}});
        }
        if (!idx.images[c].empty() && !decode_image) throw UsageError("image files present but no image decoder given");
        for (const auto& src : idx.images[c]) {
            TextureImage img = decode_image(src);
            img.validate();
            if (opt.half_size) img = half_resize(img);
            const std::filesystem::path rel = std::filesystem::path(cls) / "image" / (src.stem().string() + ".tfw");
            save_tensor(cache / rel, img.pixels, "image");
            // images can be large: keep them on disk only
            d.images[c].push_back({cache / rel, nullptr});
            items.push_back({{"class", cls}, {"label", c}, {"modality", "image"}, {"source", src.string()},
                             {"file", rel.generic_string()}, {"height", img.height()}, {"width", img.width()}});
        }
    }
    detail::write_manifest(cache, items, d.classes);
    return d;
}

/// Reads a cache directory written by preprocess_dataset. Tensors are loaded on demand.
inline Dataset load_cache(const std::filesystem::path& cache) {
    const auto path = cache / "manifest.json";
    std::ifstream in(path);
    if (!in) throw FormatError("no cache manifest at " + path.string() + "; run preprocess first");
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(in);
        if (m.at("format") != "texturefuse-cache") throw FormatError("not a texturefuse cache manifest");
        Dataset d;
        d.classes = m.at("classes").get<std::vector<std::string>>();
        d.haptic.resize(d.classes.size());
        d.images.resize(d.classes.size());
        for (const auto& it : m.at("items")) {
            const auto label = it.at("label").get<std::size_t>();
            if (label >= d.classes.size()) throw FormatError("item label outside the class list");
            const auto modality = it.at("modality").get<std::string>();
            DataItem item{cache / it.at("file").get<std::string>(), nullptr};
            if (modality == "haptic") d.haptic[label].push_back(item);
            else if (modality == "image") d.images[label].push_back(item);
            else throw FormatError("unknown modality '" + modality + "'");
        }
        d.validate();
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const RangeError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Training configuration (flat key=value text)

enum class RotationMode { none, right_angle, arbitrary };

struct TrainConfig {
    LrSchedule schedule;
    std::size_t batch_size = 1;
    std::size_t input_size = 300;  // frames (haptic) or patch side (visual)
    std::uint64_t seed = 1;
    double weight_decay = 5e-4;
    double head_lr_multiplier = 20.0;
    double init_std = 0.01;
    std::size_t width_divisor = 1;
    std::size_t iteration_divisor = 1;
    std::size_t log_every = 100;
    RotationMode rotation = RotationMode::right_angle;
    std::string trunk_weights;  // optional pretrained conv weights (visual)
    FusionLayer fusion_layer = FusionLayer::fc2;
    FeatureSource feature_source = FeatureSource::outputs;
    std::size_t fusion_haptic_frames = 192;
    std::size_t fusion_image_size = 224;
    std::size_t fusion_k = 1000;
    std::size_t folds = 10;
    std::uint64_t fold_seed = 0;

    /// Schedule after the iteration divisor.
    LrSchedule effective_schedule() const {
        LrSchedule s = schedule;
        s.total_iters = std::max<std::size_t>(1, s.total_iters / iteration_divisor);
        s.step_every = std::max<std::size_t>(1, s.step_every / iteration_divisor);
        return s;
    }

    BuildOptions build_options(std::size_t class_count) const {
        BuildOptions o;
        o.width_divisor = width_divisor;
        o.class_count = class_count;
        return o;
    }

    void validate() const {
        schedule.validate();
        if (batch_size < 1 || input_size < 1 || width_divisor < 1 || iteration_divisor < 1 || log_every < 1 ||
            fusion_k < 1 || fusion_haptic_frames < 1 || fusion_image_size < 1)
            throw RangeError("training config values must be positive");
        if (!(weight_decay >= 0.0) || !(head_lr_multiplier > 0.0) || !(init_std > 0.0))
            throw RangeError("weight_decay must be >= 0, head_lr_multiplier and init_std > 0");
        if (folds < 2) throw RangeError("folds must be >= 2");
    }
};

/// Hyperparameters of the training table for each network.
inline TrainConfig table_config(NetKind kind) {
    TrainConfig c;
    switch (kind) {
        case NetKind::haptic:
            c.schedule = {1e-4, 0.3, 40000, 100000};
            c.input_size = 300;
            c.batch_size = 10;
            break;
        case NetKind::visual:
        case NetKind::visual_tcnn:
            c.schedule = {3e-5, 0.75, 40000, 100000};
            c.input_size = 384;
            c.batch_size = 2;
            break;
        case NetKind::fusion:
            // step of 4e6 exceeds the 1e5 iterations: the rate never decays
            c.schedule = {1e-6, 0.1, 4000000, 100000};
            c.input_size = 224;
            c.batch_size = 1;
            break;
    }
    return c;
}

inline const char* rotation_name(RotationMode r) {
    switch (r) {
        case RotationMode::none: return "none";
        case RotationMode::right_angle: return "right-angle";
        case RotationMode::arbitrary: return "arbitrary";
    }
    return "?";
}

/// Applies key=value lines ('#' starts a comment) on top of base.
inline TrainConfig parse_config(const std::string& text, TrainConfig c) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        try {
            if (key == "base_lr") c.schedule.base_lr = std::stod(val);
            else if (key == "gamma") c.schedule.gamma = std::stod(val);
            else if (key == "step") c.schedule.step_every = std::stoull(val);
            else if (key == "iterations") c.schedule.total_iters = std::stoull(val);
            else if (key == "batch_size") c.batch_size = std::stoull(val);
            else if (key == "input_size") c.input_size = std::stoull(val);
            else if (key == "seed") c.seed = std::stoull(val);
            else if (key == "weight_decay") c.weight_decay = std::stod(val);
            else if (key == "head_lr_multiplier") c.head_lr_multiplier = std::stod(val);
            else if (key == "init_std") c.init_std = std::stod(val);
            else if (key == "width_divisor") c.width_divisor = std::stoull(val);
            else if (key == "iteration_divisor") c.iteration_divisor = std::stoull(val);
            else if (key == "scale") c.width_divisor = c.iteration_divisor = std::stoull(val);
            else if (key == "log_every") c.log_every = std::stoull(val);
            else if (key == "rotation") {
                if (val == "none") c.rotation = RotationMode::none;
                else if (val == "right-angle") c.rotation = RotationMode::right_angle;
                else if (val == "arbitrary") c.rotation = RotationMode::arbitrary;
                else throw FormatError("rotation must be none, right-angle or arbitrary");
            } else if (key == "trunk_weights") c.trunk_weights = val;
            else if (key == "fusion_layer") c.fusion_layer = parse_fusion_layer(val);
            else if (key == "feature_source") c.feature_source = parse_feature_source(val);
            else if (key == "fusion_haptic_frames") c.fusion_haptic_frames = std::stoull(val);
            else if (key == "fusion_image_size") c.fusion_image_size = std::stoull(val);
            else if (key == "k") c.fusion_k = std::stoull(val);
            else if (key == "folds") c.folds = std::stoull(val);
            else if (key == "fold_seed") c.fold_seed = std::stoull(val);
            else throw FormatError("unknown key '" + key + "'");
        } catch (const std::logic_error&) {
            throw FormatError("config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
        } catch (const Error& e) {
            throw FormatError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    try {
        c.validate();
    } catch (const RangeError& e) {
        throw FormatError(e.what());
    }
    return c;
}

inline TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str(), base);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline std::string format_config(const TrainConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "base_lr=" << c.schedule.base_lr << "\ngamma=" << c.schedule.gamma << "\nstep=" << c.schedule.step_every
       << "\niterations=" << c.schedule.total_iters << "\nbatch_size=" << c.batch_size
       << "\ninput_size=" << c.input_size << "\nseed=" << c.seed << "\nweight_decay=" << c.weight_decay
       << "\nhead_lr_multiplier=" << c.head_lr_multiplier << "\ninit_std=" << c.init_std
       << "\nwidth_divisor=" << c.width_divisor << "\niteration_divisor=" << c.iteration_divisor
       << "\nlog_every=" << c.log_every << "\nrotation=" << rotation_name(c.rotation)
       << "\nfusion_layer=" << fusion_layer_name(c.fusion_layer)
       << "\nfeature_source=" << (c.feature_source == FeatureSource::outputs ? "outputs" : "inputs")
       << "\nfusion_haptic_frames=" << c.fusion_haptic_frames << "\nfusion_image_size=" << c.fusion_image_size
       << "\nk=" << c.fusion_k << "\nfolds=" << c.folds << "\nfold_seed=" << c.fold_seed << '\n';
    if (!c.trunk_weights.empty()) os << "trunk_weights=" << c.trunk_weights << '\n';
    return os.str();
}

}  // namespace texturefuse
