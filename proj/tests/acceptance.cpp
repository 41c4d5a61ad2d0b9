// Acceptance harness: one pass/fail line per criterion, exit 1 on any failure.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "antispoof/activations.hpp"
#include "antispoof/gradsuite.hpp"
#include "antispoof/metrics.hpp"
#include "antispoof/model.hpp"
#include "antispoof/loss.hpp"
#include "antispoof/synth.hpp"
#include "antispoof/trainer.hpp"

using namespace antispoof;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", criterion, pass ? "pass" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool dirs_identical(const fs::path& a, const fs::path& b, std::string* why) {
  std::vector<fs::path> rel;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
  std::sort(rel.begin(), rel.end());
  for (const auto& r : rel) {
    if (!fs::exists(b / r)) {
      *why = "missing " + r.string();
      return false;
    }
    if (read_bytes(a / r) != read_bytes(b / r)) {
      *why = "differs: " + r.string();
      return false;
    }
  }
  return true;
}

// miss/fa by direct counting at "accept iff score >= t"
std::pair<double, double> rates_at(const std::vector<double>& bona,
                                   const std::vector<double>& spoof, double t) {
  double miss = 0, fa = 0;
  for (double s : bona) miss += s < t ? 1 : 0;
  for (double s : spoof) fa += s >= t ? 1 : 0;
  return {miss / bona.size(), fa / spoof.size()};
}

// Brute-force EER reference: sweep every threshold/prior pair. The convex-hull
// EER equals max over priors pi of min over thresholds of the Bayes error
// pi*miss + (1-pi)*fa; candidate maximizers are crossings of operating-point
// lines.
double eer_reference(const std::vector<double>& bona, const std::vector<double>& spoof) {
  std::vector<double> thresholds = bona;
  thresholds.insert(thresholds.end(), spoof.begin(), spoof.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);
  thresholds.insert(thresholds.begin(), thresholds.front() - 1.0);
  std::vector<std::pair<double, double>> pts;
  for (double t : thresholds) pts.push_back(rates_at(bona, spoof, t));
  auto bayes = [&](double pi) {
    double best = 1e300;
    for (auto [m, f] : pts) best = std::min(best, pi * m + (1.0 - pi) * f);
    return best;
  };
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double denom = (pts[i].first - pts[i].second) - (pts[j].first - pts[j].second);
      if (denom == 0.0) continue;
      double pi = (pts[j].second - pts[i].second) / denom;
      if (pi > 0.0 && pi < 1.0) best = std::max(best, bayes(pi));
    }
  return best;
}

Tensor<float> random_features(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<float> v(rows * cols);
  for (auto& x : v) x = static_cast<float>(d(rng));
  return Tensor<float>({rows, cols}, std::move(v));
}

ModelConfig small_model_config(const std::string& activation) {
  ModelConfig cfg;
  cfg.arch = "se_resnet18";
  cfg.activation = {activation};
  cfg.se_reduction = 4;
  cfg.first_channels = 8;
  cfg.stage_channels = {8, 16, 32, 32};
  cfg.final_channels = 32;
  cfg.embedding_dim = 64;
  cfg.att_dim = 32;
  return cfg;
}

struct EndToEnd {
  double eval_eer = 1.0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  ScoreSet eval_scores;
  std::vector<TrialRecord> eval_records;
  bool ok = false;
  std::string error;
};

EndToEnd run_end_to_end(const fs::path& data_dir, const fs::path& out_dir,
                        const std::string& activation, std::uint64_t seed) {
  EndToEnd r;
  try {
    auto train_records = parse_protocol((data_dir / "train.protocol.txt").string());
    auto dev_records = parse_protocol((data_dir / "dev.protocol.txt").string());
    r.eval_records = parse_protocol((data_dir / "eval.protocol.txt").string());

    TrainConfig tcfg;
    tcfg.batch_size = 32;
    tcfg.epochs = 4;
    tcfg.lr0 = 0.001;
    tcfg.decay_rate = 0.5;
    tcfg.decay_interval = 2;
    tcfg.crop_frames = 64;
    tcfg.eval_max_frames = 64;
    tcfg.seed = seed;

    Model<float> model = Model<float>::build(small_model_config(activation), seed);
    FeatureStore store(data_dir / "features");
    TrainResult tr = antispoof::train(model, store, train_records, dev_records, tcfg, out_dir);
    r.first_loss = tr.epoch_mean_loss.front();
    r.last_loss = tr.epoch_mean_loss.back();

    Model<float> best = load_checkpoint<float>(out_dir / "best");
    r.eval_scores = score_records(best, store, r.eval_records);
    std::vector<double> bona, spoof;
    split_scores(r.eval_scores, r.eval_records, &bona, &spoof);
    r.eval_eer = compute_eer(bona, spoof).eer;
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

char fmtbuf[256];

}  // namespace

// ---------------------------------------------------------------------------

static void criterion1_gradients() {
  auto t0 = std::chrono::steady_clock::now();
  GradSuiteResult suite = run_gradient_suite();
  double dt = seconds_since(t0);
  bool pass = suite.all_pass() && dt < 60.0;
  std::string worst;
  double worst_err = 0.0;
  for (const auto& e : suite.entries)
    if (!e.report.pass || e.report.max_rel_err > worst_err) {
      worst_err = e.report.max_rel_err;
      worst = e.name;
      if (!e.report.pass) break;
    }
  std::snprintf(fmtbuf, sizeof(fmtbuf),
                "gradient suite: %zu checks, worst %s rel err %.2e, %.1f s", suite.entries.size(),
                worst.c_str(), worst_err, dt);
  report(1, pass, fmtbuf);
}

static void criterion2_decomposition() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  Tensor<double> alpha = Tensor<double>::scalar(0.9);
  Tensor<double> beta = Tensor<double>::scalar(2.0);
  double ca = std::clamp(0.9, kAreluClampLo, kAreluClampHi);
  double sb = 1.0 / (1.0 + std::exp(-2.0));
  double max_err = 0.0;
  const std::size_t chunk = 100000;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> v(chunk);
    for (auto& x : v) x = d(rng);
    Tensor<double> x({chunk}, v);
    Tensor<double> y = arelu(x, alpha, beta);
    for (std::size_t i = 0; i < chunk; ++i) {
      double relu_part = v[i] > 0.0 ? v[i] : 0.0;
      double elsa = v[i] < 0.0 ? ca * v[i] : sb * v[i];
      max_err = std::max(max_err, std::abs(y.data()[i] - (relu_part + elsa)));
    }
  }
  std::snprintf(fmtbuf, sizeof(fmtbuf), "AReLU = ReLU + ELSA on 1e6 inputs, max err %.2e",
                max_err);
  report(2, max_err <= 1e-12, fmtbuf);
}

static void criterion3_rrelu() {
  Tensor<double> y = rrelu(Tensor<double>::scalar(-1.0), 0.125, 0.333, Mode::eval, nullptr);
  bool eval_exact = y.item() == -((0.125 + 0.333) / 2.0);

  std::mt19937_64 rng(3);
  const std::size_t n = 100000;
  Tensor<double> x = Tensor<double>::full({n}, -1.0);
  Tensor<double> t = rrelu(x, 0.125, 0.333, Mode::train, &rng);
  double mean = 0.0;
  for (double v : t.data()) mean += v;
  mean /= static_cast<double>(n);
  double expected = -(0.125 + 0.333) / 2.0;
  bool train_ok = std::abs(mean - expected) / std::abs(expected) < 0.01;
  std::snprintf(fmtbuf, sizeof(fmtbuf),
                "RReLU eval slope %s 0.229 exact, train mean slope %.4f vs 0.229",
                eval_exact ? "==" : "!=", -mean);
  report(3, eval_exact && train_ok, fmtbuf);
}

static void criterion4_ensemble_identity() {
  ModelConfig plain = small_model_config("relu");
  ModelConfig wrapped = plain;
  wrapped.force_ensemble = true;

  Model<float> a = Model<float>::build(plain, 11);
  Model<float> b = Model<float>::build(wrapped, 11);
  Tensor<float> x = random_features(60, 96, 4);
  ModelOutput<float> ya = a.forward(x, Mode::eval);
  ModelOutput<float> yb = b.forward(x, Mode::eval);
  bool bit_identical =
      ya.embeddings.data().size() == yb.embeddings.data().size() &&
      std::memcmp(ya.embeddings.data().data(), yb.embeddings.data().data(),
                  ya.embeddings.data().size() * sizeof(float)) == 0 &&
      std::memcmp(ya.logits.data().data(), yb.logits.data().data(),
                  ya.logits.data().size() * sizeof(float)) == 0;

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-4.0, 4.0);
  std::vector<double> v(4096);
  for (auto& s : v) s = d(rng);
  Tensor<double> xs({v.size()}, v);
  auto pair = make_ensemble<double>({ActKind::relu, ActKind::relu});
  Tensor<double> two = ensemble_forward(pair, xs, Mode::eval);
  Tensor<double> one = relu(xs);
  bool doubled = true;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (two.data()[i] != 2.0 * one.data()[i]) doubled = false;

  std::snprintf(fmtbuf, sizeof(fmtbuf),
                "ensemble{ReLU} bit-identical to ReLU: %s; {ReLU,ReLU} = 2*ReLU exact: %s",
                bit_identical ? "yes" : "no", doubled ? "yes" : "no");
  report(4, bit_identical && doubled, fmtbuf);
}

static void criterion5_shapes() {
  bool pass = true;
  std::string detail = "layer plan holds for L in {96,400}, both archs, BN on/off";
  for (std::size_t L : {std::size_t(96), std::size_t(400)}) {
    for (const char* arch : {"resnet18", "se_resnet18"}) {
      for (bool bn : {true, false}) {
        ModelConfig cfg;
        cfg.arch = arch;
        cfg.use_batchnorm = bn;
        Model<float> m = Model<float>::build(cfg, 1);
        Model<float>::ShapeTrace trace;
        m.forward(random_features(60, L, 9), Mode::eval, nullptr, &trace);
        const Model<float>::ShapeTrace expected = {
            {"conv1", {1, 16, 18, L}},      {"stage1", {1, 64, 18, L}},
            {"stage2", {1, 128, 9, L / 2}}, {"stage3", {1, 256, 5, L / 4}},
            {"stage4", {1, 512, 3, L / 8}}, {"conv_last", {1, 256, 1, L / 8}},
            {"pool", {1, 512}},             {"fc", {1, 256}},
            {"softmax", {1, 2}}};
        if (trace != expected) {
          pass = false;
          detail = "mismatch at L=" + std::to_string(L) + " arch=" + arch +
                   " bn=" + (bn ? "on" : "off");
        }
      }
    }
  }
  report(5, pass, detail);
}

static void criterion6_metric_oracles() {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> count(2, 40);
  std::uniform_real_distribution<double> real(-2.0, 2.0);
  std::uniform_int_distribution<int> grid(-4, 4);
  std::bernoulli_distribution use_grid(0.5);
  TdcfParams legacy;
  TdcfParams revised;
  revised.version = TdcfVersion::revised;

  double max_eer_err = 0.0, max_tdcf_err = 0.0;
  bool in_range = true;
  for (int set = 0; set < 1000; ++set) {
    bool tied = use_grid(rng);
    auto draw = [&] { return tied ? 0.5 * grid(rng) : real(rng); };
    std::vector<double> bona(count(rng)), spoof(count(rng));
    for (auto& s : bona) s = draw() + 0.3;
    for (auto& s : spoof) s = draw();

    double eer = compute_eer(bona, spoof).eer;
    max_eer_err = std::max(max_eer_err, std::abs(eer - eer_reference(bona, spoof)));

    const TdcfParams& p = set % 2 ? revised : legacy;
    TdcfConstants k = tdcf_constants(p);
    double denom = k.c0 + std::min(k.c1, k.c2);
    std::vector<double> thresholds = bona;
    thresholds.insert(thresholds.end(), spoof.begin(), spoof.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.push_back(thresholds.back() + 1.0);
    double brute = 1e300;
    for (double t : thresholds) {
      auto [m, f] = rates_at(bona, spoof, t);
      brute = std::min(brute, (k.c0 + k.c1 * m + k.c2 * f) / denom);
    }
    double tdcf = compute_min_tdcf(bona, spoof, p).min_tdcf;
    max_tdcf_err = std::max(max_tdcf_err, std::abs(tdcf - brute));
    if (tdcf < 0.0 || tdcf > 1.0 + 1e-12) in_range = false;
  }
  bool sep_ok = compute_eer({0.9, 0.8}, {0.2, 0.1}).eer == 0.0 &&
                compute_min_tdcf({0.9, 0.8}, {0.2, 0.1}, legacy).min_tdcf == 0.0;
  bool pass = max_eer_err <= 1e-9 && max_tdcf_err <= 1e-12 && in_range && sep_ok;
  std::snprintf(fmtbuf, sizeof(fmtbuf),
                "1000 sets: max EER err %.2e, max min-tDCF err %.2e, range/separation %s",
                max_eer_err, max_tdcf_err, (in_range && sep_ok) ? "ok" : "violated");
  report(6, pass, fmtbuf);
}

static void criterion7_ocs_boundaries() {
  double max_boundary_err = 0.0;
  for (double k : {1.0, 20.0, 77.0}) {
    OcsParams<double> p;
    p.k = k;
    auto emb = [](double cosine) {
      double s = std::sqrt(1.0 - cosine * cosine);
      return Tensor<double>({1, 2}, {cosine, s});
    };
    Tensor<double> w0({2}, {1.0, 0.0});
    max_boundary_err = std::max(
        max_boundary_err, std::abs(ocs_loss(emb(p.m0), w0, {0}, p).item() - std::log(2.0)));
    max_boundary_err = std::max(
        max_boundary_err, std::abs(ocs_loss(emb(p.m1), w0, {1}, p).item() - std::log(2.0)));
  }

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> ev(6 * 8), wv(8);
  for (auto& x : ev) x = d(rng);
  for (auto& x : wv) x = d(rng);
  Tensor<double> w0({8}, wv);
  std::vector<int> labels = {0, 1, 0, 1, 1, 0};
  OcsParams<double> p;
  double base = ocs_loss(Tensor<double>({6, 8}, ev), w0, labels, p).item();
  double max_scale_err = 0.0;
  for (double c : {0.25, 4.0, 1000.0}) {
    std::vector<double> scaled = ev;
    for (auto& x : scaled) x *= c;
    max_scale_err = std::max(
        max_scale_err,
        std::abs(ocs_loss(Tensor<double>({6, 8}, scaled), w0, labels, p).item() - base));
  }
  std::snprintf(fmtbuf, sizeof(fmtbuf),
                "boundary loss vs log 2 err %.2e, rescale invariance err %.2e", max_boundary_err,
                max_scale_err);
  report(7, max_boundary_err <= 1e-12 && max_scale_err <= 1e-9, fmtbuf);
}

// shared state between criteria 8 and 9
static EndToEnd g_arelu, g_relu;
static fs::path g_base;

static void criterion8_end_to_end() {
  auto t0 = std::chrono::steady_clock::now();
  g_base = fs::temp_directory_path() / "antispoof_acceptance";
  fs::remove_all(g_base);

  SynthConfig scfg;
  scfg.n_per_class = 256;
  scfg.n_holdout = 24;
  scfg.artifact_amplitude = 2.0;
  scfg.seed = 101;
  synth_dataset(scfg, g_base / "data");

  g_arelu = run_end_to_end(g_base / "data", g_base / "run_arelu", "arelu", 17);
  double arelu_time = seconds_since(t0);
  g_relu = run_end_to_end(g_base / "data", g_base / "run_relu", "relu", 17);

  bool pass = g_arelu.ok && g_relu.ok && g_arelu.eval_eer < 0.05 &&
              g_arelu.last_loss < g_arelu.first_loss && arelu_time < 300.0;
  if (!g_arelu.ok)
    report(8, false, "AReLU run failed: " + g_arelu.error);
  else if (!g_relu.ok)
    report(8, false, "ReLU baseline failed: " + g_relu.error);
  else {
    std::snprintf(fmtbuf, sizeof(fmtbuf),
                  "AReLU eval EER %.2f%% in %.0f s (loss %.3f -> %.3f); ReLU baseline EER %.2f%%",
                  100.0 * g_arelu.eval_eer, arelu_time, g_arelu.first_loss, g_arelu.last_loss,
                  100.0 * g_relu.eval_eer);
    report(8, pass, fmtbuf);
  }
}

static void criterion9_fusion() {
  if (!g_arelu.ok || !g_relu.ok) {
    report(9, false, "skipped: end-to-end runs unavailable");
    return;
  }
  std::vector<double> bona, spoof;
  split_scores(g_arelu.eval_scores, g_arelu.eval_records, &bona, &spoof);
  TdcfParams p;
  double eer = compute_eer(bona, spoof).eer;
  double tdcf = compute_min_tdcf(bona, spoof, p).min_tdcf;

  ScoreSet self = fuse_scores({g_arelu.eval_scores, g_arelu.eval_scores});
  std::vector<double> sb, ss;
  split_scores(self, g_arelu.eval_records, &sb, &ss);
  bool self_exact = compute_eer(sb, ss).eer == eer &&
                    compute_min_tdcf(sb, ss, p).min_tdcf == tdcf &&
                    self.scores == g_arelu.eval_scores.scores;

  ScoreSet fused = fuse_scores({g_arelu.eval_scores, g_relu.eval_scores});
  std::vector<double> fb, fsp;
  split_scores(fused, g_arelu.eval_records, &fb, &fsp);
  double fused_eer = compute_eer(fb, fsp).eer;
  std::vector<double> rb, rs;
  split_scores(g_relu.eval_scores, g_arelu.eval_records, &rb, &rs);
  double relu_eer = compute_eer(rb, rs).eer;

  std::snprintf(fmtbuf, sizeof(fmtbuf),
                "fuse(S,S) exact: %s; two-model fusion EER %.2f%% vs singles %.2f%% / %.2f%% "
                "(reported)",
                self_exact ? "yes" : "no", 100.0 * fused_eer, 100.0 * eer, 100.0 * relu_eer);
  report(9, self_exact, fmtbuf);
}

static void criterion10_determinism() {
  bool pass = true;
  std::string why = "two pipeline runs byte-identical (logs, checkpoints, scores)";
  try {
    fs::path base = fs::temp_directory_path() / "antispoof_acceptance_det";
    fs::remove_all(base);
    auto pipeline = [&](const fs::path& root) {
      SynthConfig scfg;
      scfg.n_per_class = 8;
      scfg.n_holdout = 8;
      scfg.frames = 64;
      scfg.artifact_amplitude = 2.0;
      scfg.seed = 12;
      synth_dataset(scfg, root / "data");
      auto train_records = parse_protocol((root / "data" / "train.protocol.txt").string());
      auto dev_records = parse_protocol((root / "data" / "dev.protocol.txt").string());
      auto eval_records = parse_protocol((root / "data" / "eval.protocol.txt").string());
      ModelConfig mcfg = small_model_config("arelu");
      mcfg.stage_channels = {4, 4, 8, 8};
      mcfg.first_channels = 4;
      mcfg.final_channels = 8;
      mcfg.embedding_dim = 16;
      mcfg.att_dim = 8;
      TrainConfig tcfg;
      tcfg.batch_size = 8;
      tcfg.epochs = 2;
      tcfg.crop_frames = 32;
      tcfg.seed = 9;
      Model<float> model = Model<float>::build(mcfg, 9);
      FeatureStore store(root / "data" / "features");
      antispoof::train(model, store, train_records, dev_records, tcfg, root / "out");
      Model<float> best = load_checkpoint<float>(root / "out" / "best");
      write_score_file((root / "scores.txt").string(),
                       score_records(best, store, eval_records));
    };
    pipeline(base / "a");
    pipeline(base / "b");
    pass = dirs_identical(base / "a", base / "b", &why) &&
           dirs_identical(base / "b", base / "a", &why);
    if (pass) fs::remove_all(base);
  } catch (const std::exception& e) {
    pass = false;
    why = e.what();
  }
  report(10, pass, why);
}

int main() {
  criterion1_gradients();
  criterion2_decomposition();
  criterion3_rrelu();
  criterion4_ensemble_identity();
  criterion5_shapes();
  criterion6_metric_oracles();
  criterion7_ocs_boundaries();
  criterion8_end_to_end();
  criterion9_fusion();
  criterion10_determinism();
  if (g_base != fs::path() && g_failures == 0) fs::remove_all(g_base);
  std::printf("%s (%d/10 criteria passed)\n", g_failures == 0 ? "ALL PASS" : "FAILURES",
              10 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
