#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "texturefuse/metrics.hpp"
#include "texturefuse/synthetic.hpp"
#include "texturefuse/training.hpp"

using namespace texturefuse;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void touch(const fs::path& p) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << "x";
}

void make_layout(const fs::path& root, std::size_t classes, std::size_t traces, std::size_t images) {
    for (std::size_t c = 0; c < classes; ++c) {
        const auto dir = root / ("class" + std::to_string(c));
        for (std::size_t i = 0; i < traces; ++i) touch(dir / "haptic" / ("t" + std::to_string(i) + ".acc3"));
        for (std::size_t i = 0; i < images; ++i) touch(dir / "image" / ("i" + std::to_string(i) + ".png"));
    }
}

}  // namespace

TEST(LoadTum, DeskScaleLayoutIsIndexedInOrder) {
    TempDir tmp("texturefuse_layout_ok");
    make_layout(tmp.path, 3, 4, 4);
    touch(tmp.path / "class1" / "haptic" / "t0.acc3.hdr");  // sidecars are not traces
    const auto idx = load_tum(tmp.path);
    EXPECT_EQ(idx.classes, (std::vector<std::string>{"class0", "class1", "class2"}));
    EXPECT_EQ(idx.haptic_per_class(), 4u);
    EXPECT_EQ(idx.images_per_class(), 4u);
    EXPECT_EQ(idx.haptic[1][2].filename(), "t2.acc3");
    EXPECT_THROW(load_tum(tmp.path, {69}), FormatError);
}

TEST(LoadTum, RaggedClassIsNamed) {
    TempDir tmp("texturefuse_layout_ragged");
    make_layout(tmp.path, 3, 10, 10);
    fs::remove(tmp.path / "class2" / "image" / "i9.png");
    try {
        load_tum(tmp.path);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("class2"), std::string::npos) << e.what();
    }
    fs::remove_all(tmp.path / "class1" / "haptic");
    try {
        load_tum(tmp.path);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("class1"), std::string::npos) << e.what();
    }
}

TEST(Folds, EveryItemTestedExactlyOnce) {
    const auto folds = make_folds(69, 10, 10, 10, 42);
    ASSERT_EQ(folds.size(), 10u);
    for (std::size_t c = 0; c < 69; ++c)
        for (int m = 0; m < 2; ++m) {
            std::vector<int> tested(10, 0);
            for (const auto& f : folds) {
                const auto& test = m ? f.test_images[c] : f.test_haptic[c];
                const auto& train = m ? f.train_images[c] : f.train_haptic[c];
                ASSERT_EQ(test.size(), 1u);
                ASSERT_EQ(train.size(), 9u);
                std::set<std::size_t> all(train.begin(), train.end());
                for (auto i : test) {
                    EXPECT_EQ(all.count(i), 0u);
                    all.insert(i);
                    ++tested[i];
                }
                EXPECT_EQ(all.size(), 10u);
            }
            for (int t : tested) EXPECT_EQ(t, 1);
        }
}

TEST(Folds, SeedDeterminesSplit) {
    const auto a = make_folds(5, 10, 10, 10, 7), b = make_folds(5, 10, 10, 10, 7), c = make_folds(5, 10, 10, 10, 8);
    bool differs = false;
    for (std::size_t f = 0; f < 10; ++f) {
        EXPECT_EQ(a[f].test_haptic, b[f].test_haptic);
        EXPECT_EQ(a[f].train_images, b[f].train_images);
        differs |= a[f].test_haptic != c[f].test_haptic;
    }
    EXPECT_TRUE(differs);
}

TEST(Folds, DegenerateAndIndivisibleCountsRejected) {
    EXPECT_THROW(make_folds(3, 10, 10, 1, 0), RangeError);
    try {
        make_folds(3, 8, 8, 3, 0);
        FAIL();
    } catch (const RangeError& e) {
        EXPECT_NE(std::string(e.what()).find("2, 4, 8"), std::string::npos) << e.what();
    }
    const auto f = make_folds(3, 4, 4, 2, 0);
    EXPECT_EQ(f[0].test_haptic[0].size(), 2u);
}

TEST(Config, TableValuesAndOverrides) {
    const auto h = table_config(NetKind::haptic);
    EXPECT_DOUBLE_EQ(h.schedule.base_lr, 1e-4);
    EXPECT_EQ(h.input_size, 300u);
    EXPECT_EQ(h.batch_size, 10u);
    const auto f = table_config(NetKind::fusion);
    EXPECT_EQ(f.schedule.step_every, 4000000u);
    EXPECT_DOUBLE_EQ(lr_at(f.schedule, 99999), 1e-6);

    const auto c = parse_config("# desk scale\nscale = 4\nbase_lr=1e-3\nrotation=none\nfusion_layer=fc3\n", h);
    EXPECT_EQ(c.width_divisor, 4u);
    EXPECT_EQ(c.effective_schedule().total_iters, 25000u);
    EXPECT_EQ(c.effective_schedule().step_every, 10000u);
    EXPECT_EQ(c.rotation, RotationMode::none);
    EXPECT_EQ(c.fusion_layer, FusionLayer::fc3);
    EXPECT_EQ(parse_config(format_config(c), TrainConfig{}).effective_schedule().total_iters, 25000u);
    EXPECT_THROW(parse_config("learning_rate=1\n", h), FormatError);
    EXPECT_THROW(parse_config("batch_size=0\n", h), FormatError);
    EXPECT_THROW(parse_config("gamma=abc\n", h), FormatError);
}

TEST(Metrics, PerfectPredictorGivesIdentityConfusion) {
    MetricsAccumulator acc(4);
    for (std::size_t c = 0; c < 4; ++c)
        for (int k = 0; k < 3; ++k) {
            const std::vector<std::size_t> labels(5, c);
            acc.add(c, max_vote(labels, 4));
        }
    const auto m = acc.finish();
    EXPECT_EQ(m.fragment_accuracy, 1.0);
    EXPECT_EQ(m.voting_accuracy, 1.0);
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(m.confusion[t][p], t == p ? 1.0 : 0.0);
}

TEST(Metrics, FragmentAccuracyIsMeanOfBalancedPerClass) {
    MetricsAccumulator acc(3);
    acc.add(0, max_vote(std::vector<std::size_t>{0, 0, 1, 2}, 3));
    acc.add(1, max_vote(std::vector<std::size_t>{1, 1, 1, 1}, 3));
    acc.add(2, max_vote(std::vector<std::size_t>{0, 0, 2, 1}, 3));
    const auto m = acc.finish();
    double mean = 0;
    for (double v : m.per_class_fragment) mean += v / 3;
    EXPECT_NEAR(m.fragment_accuracy, mean, 1e-12);
    EXPECT_NEAR(m.voting_accuracy, 2.0 / 3.0, 1e-12);
    for (const auto& row : m.confusion) {
        double s = 0;
        for (double v : row) s += v;
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
}

TEST(Metrics, UniformNetworkVotesForClassZero) {
    BuildOptions o;
    o.width_divisor = 16;
    o.class_count = 3;
    auto net = Network<float>::random(build_hapticnet(o), 1);
    for (auto& p : net.parameters()) p.fill(0.0f);  // every location outputs 1/3 each
    auto data = synthetic_dataset({4, 200, 32, 2});
    const auto fold = make_folds(data, 2, 0)[0];
    const auto m = evaluate_haptic(net, data, fold);
    EXPECT_NEAR(m.voting_accuracy, 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(m.fragment_accuracy, 1.0 / 3.0, 1e-12);
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(m.confusion[t][0], 1.0);
}

TEST(Metrics, AggregateAndReports) {
    MetricsAccumulator a(2), b(2);
    a.add(0, max_vote(std::vector<std::size_t>{0, 0}, 2));
    a.add(1, max_vote(std::vector<std::size_t>{0, 0}, 2));
    b.add(0, max_vote(std::vector<std::size_t>{0, 1}, 2));
    b.add(1, max_vote(std::vector<std::size_t>{1, 1}, 2));
    const std::vector<Metrics> folds{a.finish(), b.finish()};
    const auto m = aggregate(folds);
    EXPECT_NEAR(m.voting_accuracy, 0.75, 1e-12);
    EXPECT_NEAR(m.confusion[1][1], 0.5, 1e-12);

    TempDir tmp("texturefuse_reports");
    write_reports(tmp.path, m, {"wood", "foam"}, {{"net", "haptic"}});
    std::ifstream conf(tmp.path / "confusion.csv");
    std::string header, row;
    std::getline(conf, header);
    std::getline(conf, row);
    EXPECT_EQ(header, "true_class,wood,foam");
    EXPECT_EQ(row.rfind("wood,", 0), 0u);
    std::ifstream js(tmp.path / "metrics.json");
    const auto j = nlohmann::json::parse(js);
    EXPECT_EQ(j["net"], "haptic");
    EXPECT_NEAR(j["voting_accuracy"].get<double>(), 0.75, 1e-12);
    EXPECT_TRUE(fs::exists(tmp.path / "per_class.csv"));
}

TEST(Cache, PreprocessWritesManifestAndTensors) {
    TempDir tmp("texturefuse_cache");
    const auto raw = tmp.path / "raw";
    std::mt19937_64 rng(3);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 2; ++i) {
            const auto dir = raw / ("c" + std::to_string(c));
            fs::create_directories(dir / "haptic");
            write_trace3(dir / "haptic" / ("t" + std::to_string(i) + ".acc3"), band_trace(c, 2000, rng));
            touch(dir / "image" / ("i" + std::to_string(i) + ".png"));
        }
    const auto idx = load_tum(raw);
    // stand-in decoder: the file content is irrelevant here
    const ImageDecoder decode = [](const fs::path&) { return TextureImage{Tensor<float>({3, 9, 12}, 0.5f), ""}; };
    const auto d = preprocess_dataset(idx, tmp.path / "cache", decode);
    const auto back = load_cache(tmp.path / "cache");
    EXPECT_EQ(back.classes, idx.classes);
    ASSERT_EQ(back.haptic_per_class(), 2u);
    EXPECT_EQ(back.haptic[1][0].get()->shape(), (Shape{1, 50, 16}));
    EXPECT_EQ(*back.haptic[1][1].get(), *d.haptic[1][1].get());
    EXPECT_EQ(back.images[0][0].get()->shape(), (Shape{3, 5, 6}));
    EXPECT_THROW(load_cache(tmp.path / "missing"), FormatError);
}

TEST(Training, LossTraceIsDeterministicAndStartsNearUniform) {
    const auto data = synthetic_dataset({4, 200, 32, 5});
    const auto fold = make_folds(data, 2, 0)[0];
    auto cfg = table_config(NetKind::haptic);
    cfg.width_divisor = 16;
    cfg.schedule = {1e-3, 0.5, 10, 20};
    cfg.batch_size = 2;
    cfg.input_size = 192;
    cfg.log_every = 5;
    std::vector<TrainLogEntry> logged;
    const auto a = train_haptic(data, fold, cfg, [&](const TrainLogEntry& e) { logged.push_back(e); });
    const auto b = train_haptic(data, fold, cfg);
    EXPECT_EQ(a.losses, b.losses);
    EXPECT_EQ(a.net.parameters(), b.net.parameters());
    EXPECT_EQ(a.losses.size(), 20u);
    EXPECT_NEAR(a.losses[0], std::log(3.0), 0.05 * std::log(3.0));
    ASSERT_EQ(logged.size(), 4u);
    EXPECT_EQ(logged[2].iteration, 15u);
    EXPECT_DOUBLE_EQ(logged[2].lr, 1e-3 * 0.5);
}

TEST(Training, NonFiniteLossReportsIterationAndRate) {
    auto data = synthetic_dataset({2, 200, 32, 6});
    Tensor<float> bad = *data.haptic[0][0].get();
    bad[5] = std::numeric_limits<float>::quiet_NaN();  // not the first frame: min/max skip NaN there
    for (auto& c : data.haptic)
        for (auto& item : c) item.value = std::make_shared<const Tensor<float>>(bad);
    const auto fold = make_folds(data, 2, 0)[0];
    auto cfg = table_config(NetKind::haptic);
    cfg.width_divisor = 16;
    cfg.schedule = {2e-4, 0.5, 10, 20};
    cfg.input_size = 192;
    cfg.batch_size = 1;
    try {
        train_haptic(data, fold, cfg);
        FAIL();
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("iteration 0"), std::string::npos) << msg;
        EXPECT_NE(msg.find("lr=0.0002"), std::string::npos) << msg;
    }
}

TEST(Training, VisualAndFusionSmoke) {
    const auto data = synthetic_dataset({2, 200, 240, 7});
    const auto fold = make_folds(data, 2, 0)[0];
    auto cfg = table_config(NetKind::visual);
    cfg.width_divisor = 16;
    cfg.schedule = {1e-4, 0.5, 10, 3};
    cfg.input_size = 224;
    cfg.batch_size = 1;
    const auto v = train_visual(data, fold, cfg);
    EXPECT_EQ(v.losses.size(), 3u);
    EXPECT_GT(v.means[0], 0.0f);

    auto hc = table_config(NetKind::haptic);
    hc.width_divisor = 16;
    hc.schedule = {1e-4, 0.5, 10, 3};
    hc.input_size = 192;
    hc.batch_size = 1;
    const auto h = train_haptic(data, fold, hc);

    auto fc = table_config(NetKind::fusion);
    fc.schedule = {1e-4, 0.1, 100, 3};
    const auto f = train_fusion(data, fold, fc, h.net, v.net, v.means);
    EXPECT_EQ(f.losses.size(), 3u);
    EXPECT_EQ(f.model.head.spec().input_channels, 2 * (250u / 16));
    // layers after the fused one are left alone
    const auto fc3 = h.net.spec().layer_index("fc3");
    EXPECT_EQ(f.model.haptic.weight(fc3), h.net.weight(fc3));
    EXPECT_NE(f.model.haptic.weight(0), h.net.weight(0));
    const auto m = evaluate_fusion(f.model, data, fold, v.means, 20, 1);
    EXPECT_EQ(m.items, 3u);
    EXPECT_EQ(m.fragments, 60u);

    Gradients<float> gh = f.model.haptic.zero_gradients(), gv = f.model.visual.zero_gradients(),
                     gf = f.model.head.zero_gradients();
    std::mt19937_64 rng(1);
    EXPECT_THROW(fusion_example(f.model, Tensor<float>({1, 50, 192}), Tensor<float>({3, 224, 224}), 0, 1, gh, gv, gf, rng),
                 RangeError);
}
