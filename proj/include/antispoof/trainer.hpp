#pragma once

// Training loop: balanced batches over cached feature files, one-class softmax
// objective, ADAM with stepped exponential LR decay, per-iteration loss
// logging and per-epoch checkpoints with dev-EER model selection.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "antispoof/batching.hpp"
#include "antispoof/lfcc.hpp"
#include "antispoof/loss.hpp"
#include "antispoof/metrics.hpp"
#include "antispoof/model.hpp"
#include "antispoof/optimizer.hpp"
#include "antispoof/protocol.hpp"

namespace antispoof {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  double lr0 = 0.0003;
  double decay_rate = 0.5;
  std::size_t decay_interval = 1;  // epochs per LR step
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  std::size_t crop_frames = 400;     // training-time temporal crop (wrap-pad if short)
  std::size_t eval_max_frames = 0;   // 0 = full length at evaluation
  bool checkpoint_every_epoch = true;
  double ocs_k = 20.0;
  double ocs_m0 = 0.9;
  double ocs_m1 = 0.2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (batch_size < 2 || batch_size % 2 != 0)
      throw TrainError("train config: batch_size must be even");
    if (!(lr0 > 0)) throw TrainError("train config: lr0 must be positive");
    if (!(ocs_m0 > ocs_m1)) throw TrainError("train config: m0 must exceed m1");
    if (decay_interval == 0) throw TrainError("train config: decay_interval must be positive");
    if (crop_frames < 8) throw TrainError("train config: crop_frames must be at least 8");
  }

  nlohmann::json to_json() const {
    return {{"batch_size", batch_size},
            {"lr0", lr0},
            {"decay_rate", decay_rate},
            {"decay_interval", decay_interval},
            {"epochs", epochs},
            {"seed", seed},
            {"crop_frames", crop_frames},
            {"eval_max_frames", eval_max_frames},
            {"checkpoint_every_epoch", checkpoint_every_epoch},
            {"ocs_k", ocs_k},
            {"ocs_m0", ocs_m0},
            {"ocs_m1", ocs_m1},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_eps", adam_eps}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr0 = j.value("lr0", c.lr0);
    c.decay_rate = j.value("decay_rate", c.decay_rate);
    c.decay_interval = j.value("decay_interval", c.decay_interval);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.crop_frames = j.value("crop_frames", c.crop_frames);
    c.eval_max_frames = j.value("eval_max_frames", c.eval_max_frames);
    c.checkpoint_every_epoch = j.value("checkpoint_every_epoch", c.checkpoint_every_epoch);
    c.ocs_k = j.value("ocs_k", c.ocs_k);
    c.ocs_m0 = j.value("ocs_m0", c.ocs_m0);
    c.ocs_m1 = j.value("ocs_m1", c.ocs_m1);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.validate();
    return c;
  }
};

// ---------------------------------------------------------------------------
// feature store: one <utt_id>.lfcc file per utterance, cached in memory

class FeatureStore {
 public:
  explicit FeatureStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path path_for(const std::string& utt) const {
    return dir_ / (utt + ".lfcc");
  }

  // every missing feature file, listed before training starts
  std::vector<std::string> missing(const std::vector<TrialRecord>& records) const {
    std::vector<std::string> out;
    for (const auto& r : records)
      if (!std::filesystem::exists(path_for(r.utt_id))) out.push_back(r.utt_id);
    return out;
  }

  const FeatureMatrix& load(const std::string& utt) {
    auto it = cache_.find(utt);
    if (it != cache_.end()) return it->second;
    FeatureMatrix m = read_lfcc_file(path_for(utt).string());
    m.utt_id = utt;
    return cache_.emplace(utt, std::move(m)).first->second;
  }

 private:
  std::filesystem::path dir_;
  std::unordered_map<std::string, FeatureMatrix> cache_;
};

// random contiguous crop to `frames` columns, wrap-padding short utterances
template <class T>
std::vector<T> crop_or_wrap(const FeatureMatrix& m, std::size_t frames, std::mt19937_64& rng) {
  std::vector<T> out(m.rows * frames);
  std::size_t start = 0;
  if (m.cols > frames) {
    std::uniform_int_distribution<std::size_t> dist(0, m.cols - frames);
    start = dist(rng);
  }
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t t = 0; t < frames; ++t)
      out[r * frames + t] = static_cast<T>(m.at(r, (start + t) % m.cols));
  return out;
}

template <class T>
Tensor<T> feature_tensor(const FeatureMatrix& m, std::size_t max_frames = 0) {
  std::size_t cols = max_frames && m.cols > max_frames ? max_frames : m.cols;
  std::vector<T> v(m.rows * cols);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t t = 0; t < cols; ++t) v[r * cols + t] = static_cast<T>(m.at(r, t));
  return Tensor<T>({m.rows, cols}, std::move(v));
}

// ---------------------------------------------------------------------------
// scoring

template <class T>
ScoreSet score_records(Model<T>& model, FeatureStore& store,
                       const std::vector<TrialRecord>& records, std::size_t max_frames = 0) {
  ScoreSet out;
  for (const auto& r : records) {
    Tensor<T> x = feature_tensor<T>(store.load(r.utt_id), max_frames);
    ModelOutput<T> y = model.forward(x, Mode::eval);
    out.scores[r.utt_id] = model.cosine_scores(y.embeddings)[0];
  }
  return out;
}

// ---------------------------------------------------------------------------
// training

struct TrainResult {
  std::vector<double> epoch_mean_loss;
  double best_dev_eer = 1.0;
  std::size_t best_epoch = 0;
  std::uint64_t steps = 0;
};

template <class T>
TrainResult train(Model<T>& model, FeatureStore& store,
                  const std::vector<TrialRecord>& train_records,
                  const std::vector<TrialRecord>& dev_records, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir) {
  cfg.validate();
  {
    std::vector<TrialRecord> all = train_records;
    all.insert(all.end(), dev_records.begin(), dev_records.end());
    auto missing = store.missing(all);
    if (!missing.empty()) {
      std::string msg = "train: missing feature files for " +
                        std::to_string(missing.size()) + " utterances:";
      for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
      throw TrainError(msg);
    }
  }

  std::vector<const TrialRecord*> bona, spoof;
  for (const auto& r : train_records) (r.bonafide ? bona : spoof).push_back(&r);
  if (bona.empty() || spoof.empty())
    throw TrainError("train: both classes must be present in the training protocol");

  std::filesystem::create_directories(out_dir);
  std::ofstream log(out_dir / "loss_log.csv");
  if (!log) throw TrainError("train: cannot write loss log");
  log << "step,epoch,lr,loss\n";

  std::mt19937_64 rng(cfg.seed);
  Adam<T> opt(model.named_parameters(),
              AdamConfig<T>{static_cast<T>(cfg.adam_beta1), static_cast<T>(cfg.adam_beta2),
                            static_cast<T>(cfg.adam_eps)});
  OcsParams<T> ocs{static_cast<T>(cfg.ocs_k), static_cast<T>(cfg.ocs_m0),
                   static_cast<T>(cfg.ocs_m1)};

  TrainResult result;
  std::uint64_t step = 0;
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = lr_at(epoch, cfg.lr0, cfg.decay_rate, cfg.decay_interval);
    auto batches = balanced_batches(bona.size(), spoof.size(), cfg.batch_size, rng);
    double loss_sum = 0.0;
    for (const Batch& batch : batches) {
      std::size_t n = batch.bonafide.size() + batch.spoof.size();
      std::size_t rows = 0, frames = cfg.crop_frames;
      std::vector<T> data;
      std::vector<int> labels;
      labels.reserve(n);
      for (int cls = 0; cls < 2; ++cls) {
        const auto& half = cls == 0 ? batch.bonafide : batch.spoof;
        const auto& recs = cls == 0 ? bona : spoof;
        for (std::size_t idx : half) {
          const FeatureMatrix& m = store.load(recs[idx]->utt_id);
          rows = m.rows;
          auto v = crop_or_wrap<T>(m, frames, rng);
          data.insert(data.end(), v.begin(), v.end());
          labels.push_back(cls);
        }
      }
      Tensor<T> x({n, 1, rows, frames}, std::move(data));

      opt.zero_grad();
      ModelOutput<T> y = model.forward(x, Mode::train, &rng);
      Tensor<T> loss = ocs_loss(y.embeddings, model.w0(), labels, ocs);
      backward(loss);
      opt.step(static_cast<T>(lr));

      ++step;
      double lv = loss.item();
      loss_sum += lv;
      log << step << "," << epoch << "," << fmt(lr) << "," << fmt(lv) << "\n";
    }
    log.flush();
    result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(batches.size()));

    if (cfg.checkpoint_every_epoch)
      save_checkpoint(model, out_dir / ("epoch_" + std::to_string(epoch)), step);

    if (!dev_records.empty()) {
      ScoreSet dev_scores = score_records(model, store, dev_records, cfg.eval_max_frames);
      std::vector<double> db, ds;
      split_scores(dev_scores, dev_records, &db, &ds);
      double eer = compute_eer(db, ds).eer;
      if (epoch == 0 || eer < result.best_dev_eer) {
        result.best_dev_eer = eer;
        result.best_epoch = epoch;
        save_checkpoint(model, out_dir / "best", step);
      }
    }
  }
  if (dev_records.empty()) save_checkpoint(model, out_dir / "best", step);
  result.steps = step;
  return result;
}

}  // namespace antispoof
