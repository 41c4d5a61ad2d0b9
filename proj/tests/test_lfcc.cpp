#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "antispoof/lfcc.hpp"
#include "antispoof/wav.hpp"

using namespace antispoof;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("wav round-trip, scaling and error contracts") {
  auto path = temp_file("antispoof_test_mono.wav");
  // 1 s of digital silence at 16 kHz
  write_wav(path.string(), std::vector<double>(16000, 0.0), 16000);
  Waveform w = read_wav(path.string());
  CHECK(w.sample_rate == 16000);
  CHECK(w.samples.size() == 16000);
  for (double s : w.samples) CHECK(s == 0.0);

  // full-scale +32767 sample -> 32767/32768
  write_wav(path.string(), {32767.0 / 32768.0}, 16000);
  Waveform peak = read_wav(path.string());
  CHECK(peak.samples[0] == doctest::Approx(0.999969482421875).epsilon(1e-12));

  // stereo is rejected
  auto stereo = temp_file("antispoof_test_stereo.wav");
  write_wav(stereo.string(), std::vector<double>(64, 0.0), 16000, 2);
  CHECK_THROWS_AS(read_wav(stereo.string()), WavError);

  CHECK_THROWS_AS(read_wav("/nonexistent/file.wav"), WavError);
  std::filesystem::remove(path);
  std::filesystem::remove(stereo);
}

TEST_CASE("framing arithmetic: 1 s at 16 kHz gives 98 frames") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(16000, 0.0);
  LfccConfig cfg;
  FeatureMatrix m = lfcc(w, cfg);
  CHECK(m.rows == 20);
  CHECK(m.cols == 98);  // floor((16000-400)/160)+1

  // silence: all frames identical (log-floor constant), and finite
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t t = 1; t < m.cols; ++t) {
      CHECK(std::isfinite(m.at(r, t)));
      CHECK(m.at(r, t) == doctest::Approx(m.at(r, 0)).epsilon(1e-12));
    }
}

TEST_CASE("lfcc rejects too-short audio") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(100, 0.0);  // < 400-sample window
  CHECK_THROWS_AS(lfcc(w, LfccConfig{}), LfccError);
}

TEST_CASE("DCT of a constant vector concentrates in coefficient 0") {
  std::vector<double> constant(70, 3.25);
  auto out = dct2_orthonormal(constant, 20);
  CHECK(out[0] == doctest::Approx(3.25 * std::sqrt(70.0)).epsilon(1e-12));
  for (std::size_t j = 1; j < out.size(); ++j) CHECK(out[j] == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("amplitude scaling shifts only coefficient 0") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-0.4, 0.4);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(8000);
  for (auto& s : w.samples) s = d(rng);
  Waveform w2 = w;
  double c = 2.0;
  for (auto& s : w2.samples) s *= c;

  LfccConfig cfg;
  FeatureMatrix a = lfcc(w, cfg);
  FeatureMatrix b = lfcc(w2, cfg);
  // log E scales by +2 log c in every filter -> DCT coefficient 0 shifts by
  // 2 log(c) sqrt(n_filters); higher coefficients are unchanged
  double shift = 2.0 * std::log(c) * std::sqrt(static_cast<double>(cfg.n_filters));
  for (std::size_t t = 0; t < a.cols; ++t) {
    CHECK(b.at(0, t) - a.at(0, t) == doctest::Approx(shift).epsilon(1e-6));
    for (std::size_t r = 1; r < a.rows; ++r)
      CHECK(b.at(r, t) == doctest::Approx(a.at(r, t)).epsilon(1e-6));
  }
}

TEST_CASE("frame count formula sweep") {
  LfccConfig cfg;
  for (std::size_t n : {400u, 401u, 559u, 560u, 561u, 4000u, 16000u}) {
    Waveform w;
    w.sample_rate = 16000;
    w.samples.assign(n, 0.0);
    FeatureMatrix m = lfcc(w, cfg);
    CHECK(m.cols == (n - 400) / 160 + 1);
  }
}

TEST_CASE("deltas: constants, single frame and the linear ramp") {
  FeatureMatrix stat;
  stat.rows = 2;
  stat.cols = 5;
  stat.values = {1, 1, 1, 1, 1,   // constant row
                 0, 1, 2, 3, 4};  // linear ramp
  FeatureMatrix out = deltas(stat, 2);
  REQUIRE(out.rows == 6);
  REQUIRE(out.cols == 5);
  // constant row: delta and double-delta are zero
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(out.at(2, t) == 0.0);
    CHECK(out.at(4, t) == 0.0);
  }
  // ramp row, width 2: interior delta = (1*(c3-c1)+2*(c4-c0))/10 = 1
  CHECK(out.at(3, 2) == doctest::Approx(1.0));
  // static rows pass through untouched
  for (std::size_t t = 0; t < 5; ++t) CHECK(out.at(1, t) == stat.at(1, t));

  // L=1: deltas vanish by edge replication
  FeatureMatrix one;
  one.rows = 1;
  one.cols = 1;
  one.values = {7.0};
  FeatureMatrix d1 = deltas(one, 2);
  CHECK(d1.at(1, 0) == 0.0);
  CHECK(d1.at(2, 0) == 0.0);
}

TEST_CASE("full feature stack is 60 rows and file round-trips") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(-0.3, 0.3);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(6400);
  for (auto& s : w.samples) s = d(rng);
  FeatureMatrix m = lfcc_features(w, LfccConfig{});
  CHECK(m.rows == 60);
  for (double v : m.values) CHECK(std::isfinite(v));

  auto path = temp_file("antispoof_test_feat.lfcc");
  write_lfcc_file(path.string(), m);
  FeatureMatrix back = read_lfcc_file(path.string());
  CHECK(back.rows == m.rows);
  CHECK(back.cols == m.cols);
  for (std::size_t i = 0; i < m.values.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(m.values[i]).epsilon(1e-6));
  std::filesystem::remove(path);

  CHECK_THROWS_AS(read_lfcc_file("/nonexistent/x.lfcc"), LfccError);
}

TEST_CASE("config validation") {
  LfccConfig bad;
  bad.n_ceps = 80;  // > n_filters
  CHECK_THROWS_AS(bad.validate(), LfccError);
  LfccConfig odd;
  odd.fft_size = 500;
  CHECK_THROWS_AS(odd.validate(), LfccError);
}
