#pragma once

// Linear frequency cepstral coefficients: Hamming-windowed frames, magnitude
// squared spectrum, linearly spaced triangular filters up to Nyquist, floored
// log, orthonormal DCT-II, then regression deltas and double deltas stacked to
// the 60-row feature map [static; delta; double-delta].

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "antispoof/wav.hpp"

namespace antispoof {

struct LfccError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LfccConfig {
  double window_ms = 25.0;
  double shift_ms = 10.0;
  std::size_t n_filters = 70;
  std::size_t n_ceps = 20;
  std::size_t fft_size = 512;
  std::size_t delta_width = 2;
  double log_floor = 1e-10;

  void validate() const {
    if (n_ceps > n_filters) throw LfccError("lfcc config: n_ceps must be <= n_filters");
    if (!(window_ms > shift_ms)) throw LfccError("lfcc config: window must exceed shift");
    if (fft_size == 0 || (fft_size & (fft_size - 1)) != 0)
      throw LfccError("lfcc config: fft_size must be a power of two");
  }
};

struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;               // frame count L
  std::vector<double> values;         // row-major rows x cols
  std::string utt_id;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

namespace detail {

// in-place iterative radix-2 FFT
inline void fft(std::vector<std::complex<double>>& a) {
  std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

}  // namespace detail

// Orthonormal DCT-II of a vector; exposed for oracle tests.
inline std::vector<double> dct2_orthonormal(const std::vector<double>& x, std::size_t n_out) {
  std::size_t m = x.size();
  std::vector<double> out(n_out, 0.0);
  for (std::size_t j = 0; j < n_out; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      acc += x[i] * std::cos(std::numbers::pi * static_cast<double>(j) *
                             (static_cast<double>(i) + 0.5) / static_cast<double>(m));
    double scale = (j == 0) ? std::sqrt(1.0 / static_cast<double>(m))
                            : std::sqrt(2.0 / static_cast<double>(m));
    out[j] = acc * scale;
  }
  return out;
}

// Triangular filterbank with n_filters filters spaced linearly from 0 to
// Nyquist, expressed as weights over the fft_size/2+1 spectrum bins.
inline std::vector<std::vector<double>> linear_filterbank(std::size_t n_filters,
                                                          std::size_t fft_size,
                                                          double sample_rate) {
  std::size_t n_bins = fft_size / 2 + 1;
  double nyquist = sample_rate / 2.0;
  std::vector<double> edges(n_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = nyquist * static_cast<double>(i) / static_cast<double>(n_filters + 1);
  double bin_hz = sample_rate / static_cast<double>(fft_size);
  std::vector<std::vector<double>> fb(n_filters, std::vector<double>(n_bins, 0.0));
  for (std::size_t m = 0; m < n_filters; ++m) {
    double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      double f = bin_hz * static_cast<double>(k);
      if (f > lo && f < mid)
        fb[m][k] = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        fb[m][k] = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

// Static coefficients only: n_ceps x L.
inline FeatureMatrix lfcc(const Waveform& w, const LfccConfig& cfg) {
  cfg.validate();
  if (w.sample_rate == 0 || w.samples.empty()) throw LfccError("lfcc: empty waveform");
  std::size_t win = static_cast<std::size_t>(cfg.window_ms * w.sample_rate / 1000.0);
  std::size_t hop = static_cast<std::size_t>(cfg.shift_ms * w.sample_rate / 1000.0);
  if (win == 0 || hop == 0) throw LfccError("lfcc: degenerate frame sizes");
  if (w.samples.size() < win)
    throw LfccError("lfcc: audio shorter than one analysis window");
  if (cfg.fft_size < win) throw LfccError("lfcc: fft_size smaller than window");
  std::size_t frames = (w.samples.size() - win) / hop + 1;

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                       static_cast<double>(win - 1));
  auto fb = linear_filterbank(cfg.n_filters, cfg.fft_size, w.sample_rate);
  std::size_t n_bins = cfg.fft_size / 2 + 1;

  FeatureMatrix out;
  out.rows = cfg.n_ceps;
  out.cols = frames;
  out.values.assign(cfg.n_ceps * frames, 0.0);

  std::vector<std::complex<double>> buf(cfg.fft_size);
  std::vector<double> power(n_bins), logE(cfg.n_filters);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < cfg.fft_size; ++i) {
      double v = i < win ? w.samples[t * hop + i] * window[i] : 0.0;
      buf[i] = {v, 0.0};
    }
    detail::fft(buf);
    for (std::size_t k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
    for (std::size_t m = 0; m < cfg.n_filters; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < n_bins; ++k) e += fb[m][k] * power[k];
      logE[m] = std::log(std::max(e, cfg.log_floor));
    }
    std::vector<double> ceps = dct2_orthonormal(logE, cfg.n_ceps);
    for (std::size_t j = 0; j < cfg.n_ceps; ++j) out.at(j, t) = ceps[j];
  }
  return out;
}

// Regression deltas with edge replication; output stacks
// [static; delta; double-delta] into 3*rows rows.
inline FeatureMatrix deltas(const FeatureMatrix& stat, std::size_t width) {
  if (width == 0) throw LfccError("deltas: width must be positive");
  std::size_t r = stat.rows, L = stat.cols;
  auto regression = [&](const std::vector<double>& m) {
    std::vector<double> d(r * L, 0.0);
    double denom = 0.0;
    for (std::size_t n = 1; n <= width; ++n) denom += static_cast<double>(n * n);
    denom *= 2.0;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t t = 0; t < L; ++t) {
        double acc = 0.0;
        for (std::size_t n = 1; n <= width; ++n) {
          std::size_t tp = std::min(t + n, L - 1);
          std::size_t tm = t >= n ? t - n : 0;
          acc += static_cast<double>(n) * (m[i * L + tp] - m[i * L + tm]);
        }
        d[i * L + t] = acc / denom;
      }
    return d;
  };

  std::vector<double> d1 = regression(stat.values);
  std::vector<double> d2 = regression(d1);

  FeatureMatrix out;
  out.rows = 3 * r;
  out.cols = L;
  out.utt_id = stat.utt_id;
  out.values.reserve(3 * r * L);
  out.values.insert(out.values.end(), stat.values.begin(), stat.values.end());
  out.values.insert(out.values.end(), d1.begin(), d1.end());
  out.values.insert(out.values.end(), d2.begin(), d2.end());
  return out;
}

inline FeatureMatrix lfcc_features(const Waveform& w, const LfccConfig& cfg) {
  return deltas(lfcc(w, cfg), cfg.delta_width);
}

// ---------------------------------------------------------------------------
// feature file format: "LFCC" magic, u32 rows, u32 cols, f32 row-major, LE

inline void write_lfcc_file(const std::string& path, const FeatureMatrix& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw LfccError("write_lfcc_file: cannot open " + path);
  f.write("LFCC", 4);
  std::uint32_t rows = static_cast<std::uint32_t>(m.rows);
  std::uint32_t cols = static_cast<std::uint32_t>(m.cols);
  f.write(reinterpret_cast<const char*>(&rows), 4);
  f.write(reinterpret_cast<const char*>(&cols), 4);
  for (double v : m.values) {
    float x = static_cast<float>(v);
    f.write(reinterpret_cast<const char*>(&x), 4);
  }
}

inline FeatureMatrix read_lfcc_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LfccError("read_lfcc_file: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::string(magic, 4) != "LFCC")
    throw LfccError("read_lfcc_file: bad magic in " + path);
  std::uint32_t rows = 0, cols = 0;
  f.read(reinterpret_cast<char*>(&rows), 4);
  f.read(reinterpret_cast<char*>(&cols), 4);
  if (!f || rows == 0 || cols == 0) throw LfccError("read_lfcc_file: bad header in " + path);
  FeatureMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.values.resize(static_cast<std::size_t>(rows) * cols);
  for (auto& v : m.values) {
    float x;
    f.read(reinterpret_cast<char*>(&x), 4);
    if (!f) throw LfccError("read_lfcc_file: truncated data in " + path);
    v = x;
  }
  return m;
}

}  // namespace antispoof
