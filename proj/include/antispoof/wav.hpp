#pragma once

// PCM 16-bit mono WAV reading. Samples are scaled by 1/32768 into [-1, 1).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace antispoof {

struct WavError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  std::uint32_t sample_rate = 0;
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

}  // namespace detail

inline Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw WavError("read_wav: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw WavError("read_wav: not a RIFF/WAVE file: " + path);

  Waveform w;
  std::uint16_t channels = 0, bits = 0, format = 0;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  std::size_t data_off = 0, data_len = 0;
  while (pos + 8 <= bytes.size()) {
    std::uint32_t chunk_len = detail::read_u32le(bytes.data() + pos + 4);
    const unsigned char* id = bytes.data() + pos;
    std::size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (body + 16 > bytes.size()) throw WavError("read_wav: truncated fmt chunk");
      format = detail::read_u16le(bytes.data() + body);
      channels = detail::read_u16le(bytes.data() + body + 2);
      w.sample_rate = detail::read_u32le(bytes.data() + body + 4);
      bits = detail::read_u16le(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = body;
      data_len = std::min<std::size_t>(chunk_len, bytes.size() - body);
      have_data = true;
    }
    pos = body + chunk_len + (chunk_len & 1);
  }
  if (!have_fmt || !have_data) throw WavError("read_wav: missing fmt or data chunk: " + path);
  if (format != 1) throw WavError("read_wav: not PCM encoded: " + path);
  if (channels != 1) throw WavError("read_wav: expected mono, got " +
                                    std::to_string(channels) + " channels: " + path);
  if (bits != 16) throw WavError("read_wav: expected 16-bit samples: " + path);
  if (w.sample_rate == 0) throw WavError("read_wav: zero sample rate: " + path);

  std::size_t n = data_len / 2;
  if (n == 0) throw WavError("read_wav: empty audio: " + path);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int16_t s = static_cast<std::int16_t>(
        detail::read_u16le(bytes.data() + data_off + 2 * i));
    w.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return w;
}

// Minimal writer, used by tests and the synthetic tooling.
inline void write_wav(const std::string& path, const std::vector<double>& samples,
                      std::uint32_t sample_rate, std::uint16_t channels = 1) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw WavError("write_wav: cannot open " + path);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
  };
  auto put_u16 = [&](std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    f.write(reinterpret_cast<char*>(b), 2);
  };
  std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
  f.write("RIFF", 4);
  put_u32(36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(channels);
  put_u32(sample_rate);
  put_u32(sample_rate * channels * 2);
  put_u16(static_cast<std::uint16_t>(channels * 2));
  put_u16(16);
  f.write("data", 4);
  put_u32(data_len);
  for (double s : samples) {
    double c = std::min(std::max(s, -1.0), 32767.0 / 32768.0);
    std::int16_t q = static_cast<std::int16_t>(std::lround(c * 32768.0));
    put_u16(static_cast<std::uint16_t>(q));
  }
}

}  // namespace antispoof
