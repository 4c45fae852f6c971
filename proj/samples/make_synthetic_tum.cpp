// Writes a small dataset in the TUM directory layout: three classes of band
// traces (.acc3) and texture photos (.png).
//
//   make_synthetic_tum <out-dir> [items-per-class=4] [samples=30000] [image-side=512] [seed=1]

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "texturefuse/synthetic.hpp"

namespace fs = std::filesystem;
using namespace texturefuse;

int main(int argc, char** argv) {
    if (argc < 2 || argc > 6) {
        std::fprintf(stderr, "usage: %s <out-dir> [items-per-class] [samples] [image-side] [seed]\n", argv[0]);
        return 2;
    }
    const fs::path out = argv[1];
    const std::size_t items = argc > 2 ? std::stoul(argv[2]) : 4;
    const std::size_t samples = argc > 3 ? std::stoul(argv[3]) : 30000;
    const std::size_t side = argc > 4 ? std::stoul(argv[4]) : 512;
    std::mt19937_64 rng(argc > 5 ? std::stoull(argv[5]) : 1);

    const char* names[] = {"band0-stripes", "band1-dots", "band2-checker"};
    for (std::size_t c = 0; c < synthetic_pattern_count; ++c) {
        const fs::path dir = out / names[c];
        fs::create_directories(dir / "haptic");
        fs::create_directories(dir / "image");
        for (std::size_t i = 0; i < items; ++i) {
            char stem[32];
            std::snprintf(stem, sizeof stem, "item%02zu", i);
            write_trace3(dir / "haptic" / (std::string(stem) + ".acc3"), band_trace(c, samples, rng));

            const auto img = texture_image(c, side, rng);
            const int n = int(side);
            cv::Mat bgr(n, n, CV_8UC3);
            for (std::size_t y = 0; y < side; ++y)
                for (std::size_t x = 0; x < side; ++x)
                    for (std::size_t ch = 0; ch < 3; ++ch)
                        bgr.at<cv::Vec3b>(int(y), int(x))[int(2 - ch)] =
                            cv::saturate_cast<uchar>(img.pixels(ch, y, x) * 255.0f + 0.5f);
            if (!cv::imwrite((dir / "image" / (std::string(stem) + ".png")).string(), bgr)) {
                std::fprintf(stderr, "error: format: cannot write image under %s\n", dir.string().c_str());
                return 1;
            }
        }
    }
    std::printf("wrote %zu classes x %zu items to %s\n", synthetic_pattern_count, items, out.string().c_str());
    return 0;
}
