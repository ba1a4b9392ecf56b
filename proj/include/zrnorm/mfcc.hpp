#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <fftw3.h>

#include "zrnorm/error.hpp"
#include "zrnorm/matrix.hpp"

namespace zrnorm {

struct MfccConfig {
    std::uint32_t sample_rate_hz = 16000;
    double window_ms = 25.0;
    double hop_ms = 10.0;
    std::size_t n_fft = 0; // 0: next power of two >= window length
    std::size_t n_mel_filters = 40;
    std::size_t n_cepstra = 13;
    double pre_emphasis = 0.97;
    bool include_deltas = true;
    double log_floor = 1e-10;

    std::size_t window_samples() const {
        return static_cast<std::size_t>(std::lround(sample_rate_hz * window_ms / 1000.0));
    }
    std::size_t hop_samples() const { return static_cast<std::size_t>(std::lround(sample_rate_hz * hop_ms / 1000.0)); }
    std::size_t fft_size() const {
        if (n_fft) return n_fft;
        std::size_t n = 1;
        while (n < window_samples()) n <<= 1;
        return n;
    }
    std::size_t output_dim() const { return include_deltas ? 3 * n_cepstra : n_cepstra; }

    void validate() const {
        if (sample_rate_hz == 0) throw InvalidArgument("mfcc: sample rate must be positive");
        if (window_samples() == 0 || hop_samples() == 0) throw InvalidArgument("mfcc: window and hop must span samples");
        if (hop_samples() > window_samples()) throw InvalidArgument("mfcc: hop must not exceed the window");
        if (n_mel_filters == 0 || n_cepstra == 0) throw InvalidArgument("mfcc: filter and cepstrum counts must be positive");
        if (n_cepstra > n_mel_filters) throw InvalidArgument("mfcc: n_cepstra must not exceed n_mel_filters");
        if (fft_size() < window_samples()) throw InvalidArgument("mfcc: n_fft must cover the window");
        if (!(log_floor > 0.0)) throw InvalidArgument("mfcc: log floor must be positive");
    }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Centre frequencies (Hz) of the triangular filters, equally spaced on the mel scale
/// between 0 and Nyquist.
inline std::vector<double> mel_filter_centers(const MfccConfig& cfg) {
    const double top = hz_to_mel(cfg.sample_rate_hz / 2.0);
    std::vector<double> c(cfg.n_mel_filters);
    for (std::size_t m = 0; m < c.size(); ++m)
        c[m] = mel_to_hz(top * static_cast<double>(m + 1) / static_cast<double>(cfg.n_mel_filters + 1));
    return c;
}

/// n_mel_filters x (n_fft/2 + 1) triangular weights evaluated at each bin's frequency.
inline Matrix mel_filterbank(const MfccConfig& cfg) {
    const std::size_t n_bins = cfg.fft_size() / 2 + 1;
    const double top = hz_to_mel(cfg.sample_rate_hz / 2.0);
    std::vector<double> edges(cfg.n_mel_filters + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(cfg.n_mel_filters + 1));
    Matrix fb(cfg.n_mel_filters, n_bins);
    for (std::size_t m = 0; m < cfg.n_mel_filters; ++m)
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * cfg.sample_rate_hz / static_cast<double>(cfg.fft_size());
            const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
            if (f > lo && f < hi) fb(m, k) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
        }
    return fb;
}

namespace mfcc_detail {

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

/// FFTW's planner is not thread-safe; plan creation and destruction are serialized.
class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n) {
        in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
        out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
        if (!in_ || !out_) throw Error("mfcc: FFT allocation failed");
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;
    ~RealFft() {
        {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }

    double* input() { return in_; }
    /// |X_k|^2 for k = 0..n/2.
    void power(std::span<double> out) {
        fftw_execute(plan_);
        for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }

private:
    std::size_t n_;
    double* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

inline Matrix deltas(const Matrix& c) {
    const std::size_t t_max = c.rows();
    Matrix d(t_max, c.cols());
    constexpr int width = 2;
    constexpr double denom = 2.0 * (1 * 1 + 2 * 2);
    auto at = [&](std::ptrdiff_t t, std::size_t j) {
        t = std::clamp<std::ptrdiff_t>(t, 0, static_cast<std::ptrdiff_t>(t_max) - 1);
        return c(static_cast<std::size_t>(t), j);
    };
    for (std::size_t t = 0; t < t_max; ++t)
        for (std::size_t j = 0; j < c.cols(); ++j) {
            double s = 0.0;
            for (int n = 1; n <= width; ++n) {
                const auto tt = static_cast<std::ptrdiff_t>(t);
                s += n * (at(tt + n, j) - at(tt - n, j));
            }
            d(t, j) = s / denom;
        }
    return d;
}

} // namespace mfcc_detail

inline std::size_t mfcc_frame_count(std::size_t n_samples, const MfccConfig& cfg) {
    const std::size_t w = cfg.window_samples();
    return n_samples < w ? 0 : (n_samples - w) / cfg.hop_samples() + 1;
}

/// Mel filterbank energies per frame (T x n_mel_filters), before the log.
inline Matrix filterbank_energies(std::span<const double> samples, const MfccConfig& cfg) {
    cfg.validate();
    const std::size_t w = cfg.window_samples(), hop = cfg.hop_samples(), n_fft = cfg.fft_size();
    if (samples.size() < w)
        throw InvalidArgument("mfcc: input has " + std::to_string(samples.size()) + " samples, shorter than one " +
                              std::to_string(w) + "-sample window");
    std::vector<double> emph(samples.size());
    emph[0] = samples[0];
    for (std::size_t i = 1; i < samples.size(); ++i) emph[i] = samples[i] - cfg.pre_emphasis * samples[i - 1];
    std::vector<double> window(w);
    for (std::size_t i = 0; i < w; ++i)
        window[i] = w == 1 ? 1.0
                           : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(w - 1));

    const Matrix fb = mel_filterbank(cfg);
    const std::size_t t_max = mfcc_frame_count(samples.size(), cfg);
    Matrix energies(t_max, cfg.n_mel_filters);
    mfcc_detail::RealFft fft(n_fft);
    std::vector<double> power(n_fft / 2 + 1);
    for (std::size_t t = 0; t < t_max; ++t) {
        double* in = fft.input();
        for (std::size_t i = 0; i < n_fft; ++i) in[i] = i < w ? emph[t * hop + i] * window[i] : 0.0;
        fft.power(power);
        for (std::size_t m = 0; m < cfg.n_mel_filters; ++m) energies(t, m) = dot(fb.row(m), power);
    }
    return energies;
}

/// MFCCs: pre-emphasis, Hamming window, power spectrum, mel filterbank, floored log,
/// orthonormal DCT-II keeping n_cepstra coefficients, then optional deltas and delta-deltas
/// (+-2 frames, edges replicated). Output is T x output_dim().
inline Matrix compute_mfcc(std::span<const double> samples, const MfccConfig& cfg) {
    const Matrix e = filterbank_energies(samples, cfg);
    const std::size_t m_count = cfg.n_mel_filters;
    Matrix dct(cfg.n_cepstra, m_count);
    for (std::size_t i = 0; i < cfg.n_cepstra; ++i) {
        const double s = std::sqrt((i == 0 ? 1.0 : 2.0) / static_cast<double>(m_count));
        for (std::size_t m = 0; m < m_count; ++m)
            dct(i, m) = s * std::cos(std::numbers::pi * static_cast<double>(i) * (static_cast<double>(m) + 0.5) /
                                     static_cast<double>(m_count));
    }
    Matrix c(e.rows(), cfg.n_cepstra);
    std::vector<double> logs(m_count);
    for (std::size_t t = 0; t < e.rows(); ++t) {
        for (std::size_t m = 0; m < m_count; ++m) logs[m] = std::log(std::max(e(t, m), cfg.log_floor));
        for (std::size_t i = 0; i < cfg.n_cepstra; ++i) c(t, i) = dot(dct.row(i), logs);
    }
    if (!cfg.include_deltas) return c;
    const Matrix d1 = mfcc_detail::deltas(c);
    const Matrix d2 = mfcc_detail::deltas(d1);
    Matrix out(c.rows(), 3 * cfg.n_cepstra);
    for (std::size_t t = 0; t < c.rows(); ++t)
        for (std::size_t j = 0; j < cfg.n_cepstra; ++j) {
            out(t, j) = c(t, j);
            out(t, cfg.n_cepstra + j) = d1(t, j);
            out(t, 2 * cfg.n_cepstra + j) = d2(t, j);
        }
    return out;
}

} // namespace zrnorm
