// antispoof: batch CLI wiring feature extraction -> training -> scoring ->
// reports, plus the synthetic dataset generator and the gradient-check suite.
//
// Exit codes: 0 success, 1 validation/runtime failure, 2 usage error.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "antispoof/gradsuite.hpp"
#include "antispoof/lfcc.hpp"
#include "antispoof/manifest.hpp"
#include "antispoof/metrics.hpp"
#include "antispoof/model.hpp"
#include "antispoof/protocol.hpp"
#include "antispoof/synth.hpp"
#include "antispoof/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  return json::parse(f);
}

// Combined run configuration: any subset of the module configs in one file.
struct RunConfig {
  antispoof::LfccConfig lfcc;
  antispoof::ModelConfig model;
  antispoof::TrainConfig train;
  antispoof::TdcfParams tdcf;
  json raw = json::object();

  static RunConfig load(const std::string& path) {
    RunConfig c;
    if (path.empty()) return c;
    c.raw = load_json(path);
    if (c.raw.contains("lfcc")) {
      const json& j = c.raw["lfcc"];
      c.lfcc.window_ms = j.value("window_ms", c.lfcc.window_ms);
      c.lfcc.shift_ms = j.value("shift_ms", c.lfcc.shift_ms);
      c.lfcc.n_filters = j.value("n_filters", c.lfcc.n_filters);
      c.lfcc.n_ceps = j.value("n_ceps", c.lfcc.n_ceps);
      c.lfcc.fft_size = j.value("fft_size", c.lfcc.fft_size);
      c.lfcc.delta_width = j.value("delta_width", c.lfcc.delta_width);
      c.lfcc.log_floor = j.value("log_floor", c.lfcc.log_floor);
      c.lfcc.validate();
    }
    if (c.raw.contains("model")) c.model = antispoof::ModelConfig::from_json(c.raw["model"]);
    if (c.raw.contains("train")) c.train = antispoof::TrainConfig::from_json(c.raw["train"]);
    if (c.raw.contains("tdcf")) c.tdcf = antispoof::TdcfParams::from_json(c.raw["tdcf"]);
    return c;
  }
};

std::vector<double> scores_for_key(const antispoof::ScoreSet& s,
                                   const std::vector<antispoof::TrialRecord>& records,
                                   bool bonafide) {
  std::vector<double> bona, spoof;
  antispoof::split_scores(s, records, &bona, &spoof);
  return bonafide ? bona : spoof;
}

int cmd_extract_features(const std::string& config_path, const std::string& protocol_path,
                         const std::string& audio_dir, const std::string& out_dir,
                         unsigned jobs, std::uint64_t seed) {
  RunConfig cfg = RunConfig::load(config_path);
  auto records = antispoof::parse_protocol(protocol_path);
  fs::create_directories(out_dir);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= records.size() || failed.load()) return;
      try {
        fs::path wav = fs::path(audio_dir) / (records[i].utt_id + ".wav");
        antispoof::Waveform w = antispoof::read_wav(wav.string());
        antispoof::FeatureMatrix m = antispoof::lfcc_features(w, cfg.lfcc);
        m.utt_id = records[i].utt_id;
        antispoof::write_lfcc_file(
            (fs::path(out_dir) / (records[i].utt_id + ".lfcc")).string(), m);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!failed.exchange(true)) first_error = e.what();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw std::runtime_error(first_error);

  antispoof::RunManifest man("extract-features", seed);
  man.set_config({{"lfcc",
                   {{"window_ms", cfg.lfcc.window_ms},
                    {"shift_ms", cfg.lfcc.shift_ms},
                    {"n_filters", cfg.lfcc.n_filters},
                    {"n_ceps", cfg.lfcc.n_ceps},
                    {"fft_size", cfg.lfcc.fft_size},
                    {"delta_width", cfg.lfcc.delta_width},
                    {"log_floor", cfg.lfcc.log_floor}}},
                  {"jobs", jobs}});
  man.add_input(protocol_path);
  man.write(fs::path(out_dir) / "run_manifest.json");
  std::cout << "extracted " << records.size() << " feature files to " << out_dir << "\n";
  return 0;
}

int cmd_synth_data(const std::string& out_dir, std::size_t n_per_class, std::size_t n_holdout,
                   double amplitude, std::size_t frames, std::uint64_t seed) {
  antispoof::SynthConfig cfg;
  cfg.n_per_class = n_per_class;
  cfg.n_holdout = n_holdout;
  cfg.artifact_amplitude = amplitude;
  cfg.frames = frames;
  cfg.seed = seed;
  antispoof::synth_dataset(cfg, out_dir);

  antispoof::RunManifest man("synth-data", seed);
  man.set_config({{"n_per_class", n_per_class},
                  {"n_holdout", n_holdout},
                  {"artifact_amplitude", amplitude},
                  {"frames", frames},
                  {"rows", cfg.rows}});
  man.write(fs::path(out_dir) / "run_manifest.json");
  std::cout << "synthetic dataset written to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& train_protocol,
              const std::string& dev_protocol, const std::string& feature_dir,
              const std::string& out_dir, std::uint64_t seed, bool seed_given) {
  RunConfig cfg = RunConfig::load(config_path);
  if (seed_given) cfg.train.seed = seed;
  auto train_records = antispoof::parse_protocol(train_protocol, antispoof::Partition::train);
  std::vector<antispoof::TrialRecord> dev_records;
  if (!dev_protocol.empty())
    dev_records = antispoof::parse_protocol(dev_protocol, antispoof::Partition::dev);

  antispoof::Model<float> model = antispoof::Model<float>::build(cfg.model, cfg.train.seed);
  antispoof::FeatureStore store(feature_dir);
  antispoof::TrainResult r =
      antispoof::train(model, store, train_records, dev_records, cfg.train, out_dir);

  antispoof::RunManifest man("train", cfg.train.seed);
  man.set_config({{"model", cfg.model.to_json()}, {"train", cfg.train.to_json()}});
  man.add_input(train_protocol);
  if (!dev_protocol.empty()) man.add_input(dev_protocol);
  man.write(fs::path(out_dir) / "run_manifest.json");

  json report = {{"epochs", r.epoch_mean_loss.size()},
                 {"steps", r.steps},
                 {"first_epoch_mean_loss", r.epoch_mean_loss.front()},
                 {"final_epoch_mean_loss", r.epoch_mean_loss.back()}};
  if (!dev_records.empty()) {
    report["best_dev_eer"] = r.best_dev_eer;
    report["best_epoch"] = r.best_epoch;
  }
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_score(const std::string& checkpoint_dir, const std::string& protocol_path,
              const std::string& feature_dir, const std::string& out_path,
              std::size_t max_frames, std::uint64_t seed) {
  antispoof::Model<float> model = antispoof::load_checkpoint<float>(checkpoint_dir);
  auto records = antispoof::parse_protocol(protocol_path);
  antispoof::FeatureStore store(feature_dir);
  auto missing = store.missing(records);
  if (!missing.empty())
    throw std::runtime_error("score: missing feature file for " + missing.front() + " (" +
                             std::to_string(missing.size()) + " total)");
  antispoof::ScoreSet s = antispoof::score_records(model, store, records, max_frames);
  antispoof::write_score_file(out_path, s);

  antispoof::RunManifest man("score", seed);
  man.set_config({{"checkpoint", checkpoint_dir}, {"max_frames", max_frames}});
  man.add_input(protocol_path);
  man.add_input(fs::path(checkpoint_dir) / "manifest.json");
  man.write(out_path + ".manifest.json");
  std::cout << "wrote " << s.scores.size() << " scores to " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& scores_path, const std::string& protocol_path,
                 const std::string& tdcf_path, const std::string& asv_scores_path,
                 std::uint64_t seed) {
  antispoof::ScoreSet s = antispoof::read_score_file(scores_path);
  auto records = antispoof::parse_protocol(protocol_path);
  std::vector<double> bona, spoof;
  antispoof::split_scores(s, records, &bona, &spoof);

  antispoof::TdcfParams params;
  if (!tdcf_path.empty()) params = antispoof::TdcfParams::from_json(load_json(tdcf_path));
  if (!asv_scores_path.empty()) {
    antispoof::AsvRates rates = antispoof::asv_rates_from_file(asv_scores_path);
    params.p_miss_asv = rates.p_miss_asv;
    params.p_fa_asv = rates.p_fa_asv;
    params.p_miss_spoof_asv = rates.p_miss_spoof_asv;
    params.validate();
  }

  antispoof::EerResult eer = antispoof::compute_eer(bona, spoof);
  antispoof::TdcfResult tdcf = antispoof::compute_min_tdcf(bona, spoof, params);
  json report = {{"eer", eer.eer},
                 {"eer_threshold", eer.threshold},
                 {"min_tdcf", tdcf.min_tdcf},
                 {"tdcf_threshold", tdcf.threshold},
                 {"n_bonafide", bona.size()},
                 {"n_spoof", spoof.size()}};
  std::cout << report.dump(2) << "\n";

  antispoof::RunManifest man("evaluate", seed);
  man.set_config({{"tdcf", params.to_json()}});
  man.add_input(scores_path);
  man.add_input(protocol_path);
  if (!asv_scores_path.empty()) man.add_input(asv_scores_path);
  man.write(scores_path + ".evaluate_manifest.json");
  return 0;
}

int cmd_det(const std::string& scores_path, const std::string& protocol_path,
            const std::string& out_path, std::uint64_t seed) {
  antispoof::ScoreSet s = antispoof::read_score_file(scores_path);
  auto records = antispoof::parse_protocol(protocol_path);
  std::vector<double> bona, spoof;
  antispoof::split_scores(s, records, &bona, &spoof);
  auto points = antispoof::det_points(bona, spoof);

  std::ofstream f(out_path);
  if (!f) throw std::runtime_error("det: cannot write " + out_path);
  f << "threshold,far,frr,probit_far,probit_frr\n";
  char buf[160];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g\n", p.threshold, p.far, p.frr,
                  antispoof::probit(p.far), antispoof::probit(p.frr));
    f << buf;
  }

  antispoof::RunManifest man("det", seed);
  man.add_input(scores_path);
  man.add_input(protocol_path);
  man.write(out_path + ".manifest.json");
  std::cout << "wrote " << points.size() << " DET points to " << out_path << "\n";
  return 0;
}

int cmd_fuse(const std::vector<std::string>& inputs, const std::string& out_path,
             std::uint64_t seed) {
  std::vector<antispoof::ScoreSet> sets;
  for (const auto& p : inputs) sets.push_back(antispoof::read_score_file(p));
  antispoof::ScoreSet fused = antispoof::fuse_scores(sets);
  antispoof::write_score_file(out_path, fused);

  antispoof::RunManifest man("fuse", seed);
  for (const auto& p : inputs) man.add_input(p);
  man.write(out_path + ".manifest.json");
  std::cout << "fused " << sets.size() << " score sets into " << out_path << "\n";
  return 0;
}

int cmd_gradcheck(double step, double tol, std::uint64_t seed, const std::string& manifest) {
  antispoof::GradSuiteResult r = antispoof::run_gradient_suite(step, tol, seed);
  for (const auto& e : r.entries) {
    std::printf("%-22s %s  max_rel_err=%.3e  checked=%zu  skipped=%zu\n", e.name.c_str(),
                e.report.pass ? "pass" : "FAIL", e.report.max_rel_err, e.report.checked,
                e.report.skipped.size());
  }
  if (!manifest.empty()) {
    antispoof::RunManifest man("gradcheck", seed);
    man.set_config({{"step", step}, {"tol", tol}, {"entries", r.entries.size()}});
    man.write(manifest);
  }
  if (!r.all_pass()) {
    std::cerr << "gradient suite failed\n";
    return 1;
  }
  std::cout << "all " << r.entries.size() << " gradient checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speech anti-spoofing countermeasure toolkit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string config_path, protocol_path, dev_protocol_path, audio_dir, feature_dir, out_dir;
  std::string checkpoint_dir, scores_path, out_path, tdcf_path, asv_scores_path, manifest_path;
  std::vector<std::string> fuse_inputs;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::size_t n_per_class = 64, n_holdout = 0, frames = 400, max_frames = 0;
  double amplitude = 1.0, step = 1e-6, tol = 1e-5;

  auto* extract = app.add_subcommand("extract-features", "LFCC features for every protocol utterance");
  extract->add_option("--config", config_path, "JSON run config (lfcc section)");
  extract->add_option("--protocol", protocol_path, "CM protocol file")->required();
  extract->add_option("--audio-dir", audio_dir, "directory with <utt_id>.wav files")->required();
  extract->add_option("--out-dir", out_dir, "output directory for .lfcc files")->required();
  extract->add_option("--jobs", jobs, "parallel extraction workers");
  extract->add_option("--seed", seed, "seed recorded in the manifest");

  auto* synth = app.add_subcommand("synth-data", "synthetic dataset (features + protocols)");
  synth->add_option("--out-dir", out_dir, "output directory")->required();
  synth->add_option("--n-per-class", n_per_class, "training utterances per class");
  synth->add_option("--n-holdout", n_holdout, "dev/eval utterances per class (0 = auto)");
  synth->add_option("--amplitude", amplitude, "spoof artifact amplitude (0 = no signal)");
  synth->add_option("--frames", frames, "frames per utterance");
  synth->add_option("--seed", seed, "generator seed");

  auto* train = app.add_subcommand("train", "train a model on extracted features");
  train->add_option("--config", config_path, "JSON run config (model + train sections)");
  train->add_option("--train-protocol", protocol_path, "training protocol")->required();
  train->add_option("--dev-protocol", dev_protocol_path, "development protocol (model selection)");
  train->add_option("--features", feature_dir, "feature directory")->required();
  train->add_option("--out-dir", out_dir, "checkpoint/log directory")->required();
  auto* train_seed = train->add_option("--seed", seed, "overrides train config seed");

  auto* score = app.add_subcommand("score", "score a protocol with a trained checkpoint");
  score->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
  score->add_option("--protocol", protocol_path, "protocol file")->required();
  score->add_option("--features", feature_dir, "feature directory")->required();
  score->add_option("--out", out_path, "output score file")->required();
  score->add_option("--max-frames", max_frames, "truncate features (0 = full length)");
  score->add_option("--seed", seed, "seed recorded in the manifest");

  auto* evaluate = app.add_subcommand("evaluate", "EER and min-tDCF from a score file");
  evaluate->add_option("--scores", scores_path, "score file")->required();
  evaluate->add_option("--protocol", protocol_path, "protocol with keys")->required();
  evaluate->add_option("--tdcf", tdcf_path, "t-DCF parameter JSON");
  evaluate->add_option("--asv-scores", asv_scores_path, "organizer ASV score file");
  evaluate->add_option("--seed", seed, "seed recorded in the manifest");

  auto* det = app.add_subcommand("det", "DET operating points as CSV");
  det->add_option("--scores", scores_path, "score file")->required();
  det->add_option("--protocol", protocol_path, "protocol with keys")->required();
  det->add_option("--out", out_path, "output CSV path")->required();
  det->add_option("--seed", seed, "seed recorded in the manifest");

  auto* fuse = app.add_subcommand("fuse", "average-fuse score files");
  fuse->add_option("--in", fuse_inputs, "input score files (repeat, >= 2)")->required();
  fuse->add_option("--out", out_path, "fused score file")->required();
  fuse->add_option("--seed", seed, "seed recorded in the manifest");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--step", step, "finite-difference step");
  gradcheck->add_option("--tol", tol, "max relative error tolerance");
  gradcheck->add_option("--seed", seed, "probe input seed");
  gradcheck->add_option("--manifest", manifest_path, "optional manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*extract)
      return cmd_extract_features(config_path, protocol_path, audio_dir, out_dir, jobs, seed);
    if (*synth) return cmd_synth_data(out_dir, n_per_class, n_holdout, amplitude, frames, seed);
    if (*train)
      return cmd_train(config_path, protocol_path, dev_protocol_path, feature_dir, out_dir, seed,
                       train_seed->count() > 0);
    if (*score)
      return cmd_score(checkpoint_dir, protocol_path, feature_dir, out_path, max_frames, seed);
    if (*evaluate)
      return cmd_evaluate(scores_path, protocol_path, tdcf_path, asv_scores_path, seed);
    if (*det) return cmd_det(scores_path, protocol_path, out_path, seed);
    if (*fuse) return cmd_fuse(fuse_inputs, out_path, seed);
    if (*gradcheck) return cmd_gradcheck(step, tol, seed, manifest_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
