#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "texturefuse/container.hpp"
#include "texturefuse/tensor.hpp"

namespace texturefuse {

/// Raw three-axis acceleration recording.
struct AccelTrace3 {
    std::vector<std::array<double, 3>> samples;
    double sample_rate_hz = 10000.0;

    void validate() const {
        if (samples.empty()) throw RangeError("acceleration trace is empty");
        if (!(sample_rate_hz > 0.0)) throw RangeError("sample rate must be positive");
        for (const auto& s : samples)
            if (!std::isfinite(s[0]) || !std::isfinite(s[1]) || !std::isfinite(s[2]))
                throw NumericError("acceleration trace contains non-finite samples");
    }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Forward real DFT, bins 0..n/2.
inline std::vector<std::complex<double>> real_dft(std::span<const double> x) {
    const int n = int(x.size());
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(std::size_t(n / 2 + 1));
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

// Inverse of real_dft (the half spectrum implies conjugate symmetry).
inline std::vector<double> inverse_real_dft(std::vector<std::complex<double>> half, std::size_t n) {
    std::vector<double> out(n);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_c2r_1d(int(n), reinterpret_cast<fftw_complex*>(half.data()), out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    for (auto& v : out) v /= double(n);
    return out;
}

}  // namespace detail

/// DFT321: one signal whose spectral magnitude is the root-sum-of-squares of
/// the three axis spectra and whose phase is that of the axis sum x+y+z.
inline std::vector<double> dft321_combine(const AccelTrace3& trace) {
    trace.validate();
    const std::size_t n = trace.samples.size();
    std::array<std::vector<double>, 3> axes;
    std::vector<double> sum(n);
    for (auto& a : axes) a.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) axes[k][i] = trace.samples[i][k];
        sum[i] = trace.samples[i][0] + trace.samples[i][1] + trace.samples[i][2];
    }
    const auto X = detail::real_dft(axes[0]), Y = detail::real_dft(axes[1]), Z = detail::real_dft(axes[2]);
    const auto S = detail::real_dft(sum);
    std::vector<std::complex<double>> combined(S.size());
    for (std::size_t f = 0; f < S.size(); ++f) {
        const double mag = std::sqrt(std::norm(X[f]) + std::norm(Y[f]) + std::norm(Z[f]));
        const double phase = std::abs(S[f]) > 0.0 ? std::arg(S[f]) : 0.0;
        combined[f] = std::polar(mag, phase);
    }
    // DC and Nyquist bins of a real signal are real: keep their sign only.
    combined[0] = {combined[0].real(), 0.0};
    if (n % 2 == 0) combined.back() = {combined.back().real(), 0.0};
    return detail::inverse_real_dft(std::move(combined), n);
}

enum class SpectrumScale { magnitude, power, log };

inline SpectrumScale parse_spectrum_scale(const std::string& s) {
    if (s == "magnitude") return SpectrumScale::magnitude;
    if (s == "power") return SpectrumScale::power;
    if (s == "log") return SpectrumScale::log;
    throw RangeError("spectrum scale must be magnitude, power or log, got '" + s + "'");
}

struct SpectrogramOptions {
    std::size_t window_len = 500;
    std::size_t hop = 100;
    std::size_t channels = 50;
    SpectrumScale scale = SpectrumScale::magnitude;
};

/// Time-frequency matrix stored as a [1, channels, frames] tensor.
struct Spectrogram {
    Tensor<float> frames;
    std::size_t window_len = 500;
    std::size_t hop = 100;

    std::size_t channel_count() const { return frames.dim(1); }
    std::size_t frame_count() const { return frames.dim(2); }
};

inline std::size_t frame_count(std::size_t length, std::size_t window_len, std::size_t hop) {
    if (length < window_len)
        throw RangeError("trace of " + std::to_string(length) + " samples is shorter than one window; at least " +
                         std::to_string(window_len) + " samples are required");
    return (length - window_len) / hop + 1;
}

/// Symmetric Hamming window.
inline std::vector<double> hamming_window(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n == 1) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(i) / double(n - 1));
    return w;
}

/// Hamming-windowed frames; each column holds DFT bins 0..channels-1 of one frame.
inline Spectrogram enframe_spectrogram(std::span<const double> trace, const SpectrogramOptions& opt = {}) {
    if (opt.window_len < 1 || opt.hop < 1 || opt.channels < 1 || opt.channels > opt.window_len / 2 + 1)
        throw RangeError("invalid spectrogram options");
    for (double v : trace)
        if (!std::isfinite(v)) throw NumericError("trace contains non-finite samples");
    const std::size_t N = opt.window_len, F = opt.channels;
    const std::size_t T = frame_count(trace.size(), N, opt.hop);
    const auto window = hamming_window(N);
    // cos/sin table for the first F bins of an N-point DFT
    std::vector<double> re(F * N), im(F * N);
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t i = 0; i < N; ++i) {
            const double a = 2.0 * std::numbers::pi * double((f * i) % N) / double(N);
            re[f * N + i] = std::cos(a) * window[i];
            im[f * N + i] = -std::sin(a) * window[i];
        }
    Spectrogram s{Tensor<float>({1, F, T}), N, opt.hop};
    for (std::size_t t = 0; t < T; ++t) {
        const double* seg = trace.data() + t * opt.hop;
        for (std::size_t f = 0; f < F; ++f) {
            double a = 0, b = 0;
            for (std::size_t i = 0; i < N; ++i) {
                a += re[f * N + i] * seg[i];
                b += im[f * N + i] * seg[i];
            }
            const double power = a * a + b * b;
            double v = std::sqrt(power);
            if (opt.scale == SpectrumScale::power) v = power;
            if (opt.scale == SpectrumScale::log) v = std::log(v + 1e-8);
            s.frames(0, f, t) = float(v);
        }
    }
    return s;
}

/// Per-channel min-max scaling to [0,1]; constant channels become all zeros.
inline Spectrogram normalize_channels(Spectrogram s) {
    const std::size_t F = s.channel_count(), T = s.frame_count();
    for (std::size_t f = 0; f < F; ++f) {
        float lo = s.frames(0, f, 0), hi = lo;
        for (std::size_t t = 1; t < T; ++t) {
            lo = std::min(lo, s.frames(0, f, t));
            hi = std::max(hi, s.frames(0, f, t));
        }
        const float range = hi - lo;
        for (std::size_t t = 0; t < T; ++t)
            s.frames(0, f, t) = range > 0.0f ? (s.frames(0, f, t) - lo) / range : 0.0f;
    }
    return s;
}

inline Spectrogram slice_frames(const Spectrogram& s, std::size_t start, std::size_t frames) {
    if (frames < 1 || start + frames > s.frame_count())
        throw RangeError("frame slice [" + std::to_string(start) + ", " + std::to_string(start + frames) +
                         ") outside spectrogram of " + std::to_string(s.frame_count()) + " frames");
    return {crop(s.frames, 0, s.channel_count(), start, frames), s.window_len, s.hop};
}

/// Contiguous run of frames starting at a uniformly drawn offset.
template <typename Rng>
Spectrogram subsample_training_window(const Spectrogram& s, std::size_t frames, Rng& rng) {
    if (frames < 1 || s.frame_count() < frames)
        throw RangeError("cannot take " + std::to_string(frames) + " frames from a spectrogram of " +
                         std::to_string(s.frame_count()));
    std::uniform_int_distribution<std::size_t> start(0, s.frame_count() - frames);
    return slice_frames(s, start(rng), frames);
}

// ---------------------------------------------------------------------------
// Trace files
//
// <name>.acc3  little-endian binary32 (x, y, z) triples, one per sample
// <name>.acc1  little-endian binary32 samples of an already combined trace
// <name>.<ext>.hdr  optional sidecar text, "sample_rate_hz=<value>" (default 10000)

inline double read_sample_rate(const std::filesystem::path& trace_path) {
    std::filesystem::path hdr = trace_path;
    hdr += ".hdr";
    std::ifstream in(hdr);
    if (!in) return 10000.0;
    for (std::string line; std::getline(in, line);) {
        const auto eq = line.find('=');
        if (eq != std::string::npos && line.substr(0, eq) == "sample_rate_hz") return std::stod(line.substr(eq + 1));
    }
    throw FormatError(hdr.string() + ": missing sample_rate_hz");
}

inline std::vector<float> read_f32_samples(const std::filesystem::path& path, std::size_t stride) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() % (4 * stride) != 0)
        throw FormatError(path.string() + ": size is not a whole number of " + std::to_string(stride) + "-float samples");
    std::vector<float> v(bytes.size() / 4);
    detail::Reader r(bytes);
    for (auto& x : v) x = r.get<float>("sample");
    return v;
}

/// Loads an .acc3 or .acc1 file as a combined single-axis trace, optionally
/// dropping the first trim_leading samples.
inline std::vector<double> load_combined_trace(const std::filesystem::path& path, std::size_t trim_leading = 0) {
    std::vector<double> out;
    if (path.extension() == ".acc3") {
        const auto raw = read_f32_samples(path, 3);
        AccelTrace3 t;
        t.sample_rate_hz = read_sample_rate(path);
        for (std::size_t i = 3 * trim_leading; i + 2 < raw.size(); i += 3) t.samples.push_back({raw[i], raw[i + 1], raw[i + 2]});
        out = dft321_combine(t);
    } else if (path.extension() == ".acc1") {
        const auto raw = read_f32_samples(path, 1);
        if (trim_leading < raw.size()) out.assign(raw.begin() + std::ptrdiff_t(trim_leading), raw.end());
        read_sample_rate(path);
    } else {
        throw FormatError(path.string() + ": expected an .acc3 or .acc1 trace");
    }
    if (out.empty()) throw RangeError(path.string() + ": trace is empty after trimming");
    return out;
}

inline void write_trace3(const std::filesystem::path& path, const AccelTrace3& t) {
    std::string bytes;
    for (const auto& s : t.samples)
        for (double v : s) detail::put<float>(bytes, float(v));
    write_file_bytes(path, bytes);
    std::ofstream hdr(path.string() + ".hdr");
    hdr << "sample_rate_hz=" << t.sample_rate_hz << '\n';
}

}  // namespace texturefuse
