#pragma once

// Synthetic desk-scale dataset: 60x400 feature maps. "Bona fide" utterances
// are smooth random spectral envelopes; "spoof" utterances carry an extra
// localized artifact (a fixed frequency band modulated by a periodic time
// ripple) whose amplitude is configurable. Amplitude 0 makes the two classes
// identically distributed.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "antispoof/lfcc.hpp"

namespace antispoof {

struct SynthConfig {
  std::size_t n_per_class = 64;   // training utterances per class
  std::size_t n_holdout = 0;      // dev/eval utterances per class (0 = n_per_class/4, min 8)
  double artifact_amplitude = 1.0;
  std::size_t rows = 60;
  std::size_t frames = 400;
  std::uint64_t seed = 0;
};

namespace detail {

inline FeatureMatrix synth_utterance(std::size_t rows, std::size_t frames, bool spoof,
                                     double amplitude, std::mt19937_64& rng) {
  FeatureMatrix m;
  m.rows = rows;
  m.cols = frames;
  m.values.assign(rows * frames, 0.0);

  std::uniform_real_distribution<double> amp(0.5, 1.5);
  std::uniform_real_distribution<double> freq(0.5, 3.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 0.2);

  constexpr std::size_t n_components = 4;
  double a[n_components], fr[n_components], fp[n_components], tr[n_components], tp[n_components];
  for (std::size_t k = 0; k < n_components; ++k) {
    a[k] = amp(rng);
    fr[k] = freq(rng);
    fp[k] = phase(rng);
    tr[k] = freq(rng);
    tp[k] = phase(rng);
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < frames; ++t) {
      double v = 0.0;
      for (std::size_t k = 0; k < n_components; ++k)
        v += a[k] *
             std::cos(2.0 * std::numbers::pi * fr[k] * double(r) / double(rows) + fp[k]) *
             (1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * tr[k] * double(t) / double(frames) +
                                   tp[k]));
      m.at(r, t) = v + noise(rng);
    }

  if (spoof && amplitude != 0.0) {
    // triangular band centered at 2/3 of the frequency axis, 16-frame ripple
    std::size_t center = rows * 2 / 3, halfwidth = rows / 12;
    for (std::size_t r = center >= halfwidth ? center - halfwidth : 0;
         r <= std::min(rows - 1, center + halfwidth); ++r) {
      double w = 1.0 - std::abs(double(r) - double(center)) / double(halfwidth + 1);
      for (std::size_t t = 0; t < frames; ++t) {
        double ripple = 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * double(t) / 16.0);
        m.at(r, t) += amplitude * w * ripple;
      }
    }
  }
  return m;
}

}  // namespace detail

// Writes features/<utt>.lfcc plus train/dev/eval protocol files under out_dir.
inline void synth_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.n_per_class < 8) throw LfccError("synth_dataset: need at least 8 per class");
  std::size_t n_holdout =
      cfg.n_holdout ? cfg.n_holdout : std::max<std::size_t>(8, cfg.n_per_class / 4);

  std::filesystem::create_directories(out_dir / "features");
  std::mt19937_64 rng(cfg.seed);

  struct Part {
    const char* tag;
    const char* file;
    std::size_t n;
  };
  const Part parts[] = {{"T", "train.protocol.txt", cfg.n_per_class},
                        {"D", "dev.protocol.txt", n_holdout},
                        {"E", "eval.protocol.txt", n_holdout}};

  std::size_t serial = 0;
  for (const Part& part : parts) {
    std::ofstream proto(out_dir / part.file);
    if (!proto) throw LfccError("synth_dataset: cannot write protocol");
    for (std::size_t i = 0; i < part.n; ++i)
      for (int cls = 0; cls < 2; ++cls) {
        bool spoof = cls == 1;
        char utt[32];
        std::snprintf(utt, sizeof(utt), "SYN_%s_%06zu", part.tag, serial++);
        char spk[16];
        std::snprintf(spk, sizeof(spk), "SYN_%04zu", i % 20);
        FeatureMatrix m = detail::synth_utterance(cfg.rows, cfg.frames, spoof,
                                                  cfg.artifact_amplitude, rng);
        m.utt_id = utt;
        write_lfcc_file((out_dir / "features" / (std::string(utt) + ".lfcc")).string(), m);
        proto << spk << " " << utt << " - " << (spoof ? "A01" : "-") << " "
              << (spoof ? "spoof" : "bonafide") << "\n";
      }
  }
}

}  // namespace antispoof
