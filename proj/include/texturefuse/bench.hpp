#pragma once

#include <chrono>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "texturefuse/sliding.hpp"

namespace texturefuse {

struct TimingStats {
    double mean_ms = 0;
    double stddev_ms = 0;
};

struct BenchReport {
    std::string net;
    Shape input;
    std::size_t windows = 0;
    TimingStats fcn;
    TimingStats sliding;
    double speedup = 0;
    double max_dev = 0;
    Extent2 max_dev_location;
    std::size_t max_dev_class = 0;
    double tolerance = 1e-5;

    bool passed() const { return max_dev <= tolerance; }
};

namespace detail {

inline TimingStats summarize(const std::vector<double>& ms) {
    TimingStats s;
    for (double v : ms) s.mean_ms += v;
    s.mean_ms /= double(ms.size());
    for (double v : ms) s.stddev_ms += (v - s.mean_ms) * (v - s.mean_ms);
    s.stddev_ms = ms.size() > 1 ? std::sqrt(s.stddev_ms / double(ms.size() - 1)) : 0.0;
    return s;
}

template <typename F>
TimingStats time_runs(F&& f, std::size_t runs, std::size_t warmup) {
    for (std::size_t i = 0; i < warmup; ++i) f();
    std::vector<double> ms;
    for (std::size_t i = 0; i < runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return summarize(ms);
}

}  // namespace detail

/// Largest absolute softmax difference between two prediction grids, with its position.
template <typename T>
void softmax_deviation(const Tensor<T>& dense, const Tensor<T>& sliding, BenchReport& r) {
    if (dense.shape() != sliding.shape())
        throw ShapeError("dense grid " + to_string(dense.shape()) + " and sliding grid " + to_string(sliding.shape()) +
                         " differ");
    const std::size_t C = dense.dim(0), H = dense.dim(1), W = dense.dim(2);
    r.max_dev = 0;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                const double d = std::abs(double(dense(c, i, j)) - double(sliding(c, i, j)));
                if (d > r.max_dev) {
                    r.max_dev = d;
                    r.max_dev_location = {i, j};
                    r.max_dev_class = c;
                }
            }
}

/// Times the dense pass against the window-by-window oracle on one random input
/// in [0,1) of the given [C,H,W] shape; equivalence is measured on that input.
template <typename T>
BenchReport bench(const Network<T>& net, const Shape& input, std::size_t runs, std::size_t warmup,
                  std::uint64_t seed = 1) {
    if (runs < 3) throw RangeError("bench needs at least 3 timed runs");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor<T> x(input);
    for (auto& v : x.values()) v = T(u(rng));
    propagate_shapes(net.spec(), input);  // reject undersized inputs up front

    const SlidingWindowOracle<T> oracle(net);
    BenchReport r;
    r.net = net.spec().name;
    r.input = input;
    r.windows = oracle.windows({input[1], input[2]}).size();
    Tensor<T> dense, sliding;
    r.fcn = detail::time_runs([&] { dense = net.forward(x); }, runs, warmup);
    r.sliding = detail::time_runs([&] { sliding = oracle.predict(x); }, runs, warmup);
    r.speedup = r.sliding.mean_ms / r.fcn.mean_ms;
    softmax_deviation(dense, sliding, r);
    return r;
}

inline std::string bench_csv_header() { return "net,input,fcn_ms,sliding_ms,speedup,max_dev"; }

inline std::string bench_csv_row(const BenchReport& r) {
    std::ostringstream os;
    os << r.net << ',' << r.input[0] << 'x' << r.input[1] << 'x' << r.input[2] << ',' << r.fcn.mean_ms << ','
       << r.sliding.mean_ms << ',' << r.speedup << ',' << r.max_dev;
    return os.str();
}

inline void print_bench_table(std::ostream& os, const std::vector<BenchReport>& reports) {
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %-14s %7s %18s %18s %8s %10s %s\n", "net", "input", "windows",
                  "fcn ms (sd)", "sliding ms (sd)", "speedup", "max_dev", "status");
    os << line;
    for (const auto& r : reports) {
        const std::string in = std::to_string(r.input[0]) + "x" + std::to_string(r.input[1]) + "x" + std::to_string(r.input[2]);
        char fcn[32], sl[32];
        std::snprintf(fcn, sizeof fcn, "%.2f (%.2f)", r.fcn.mean_ms, r.fcn.stddev_ms);
        std::snprintf(sl, sizeof sl, "%.2f (%.2f)", r.sliding.mean_ms, r.sliding.stddev_ms);
        std::snprintf(line, sizeof line, "%-16s %-14s %7zu %18s %18s %8.2f %10.3g %s\n", r.net.c_str(), in.c_str(),
                      r.windows, fcn, sl, r.speedup, r.max_dev, r.passed() ? "ok" : "FAILED");
        os << line;
        if (!r.passed())
            os << "  max deviation at location (" << r.max_dev_location.h << ", " << r.max_dev_location.w
               << "), class " << r.max_dev_class << '\n';
    }
}

}  // namespace texturefuse
