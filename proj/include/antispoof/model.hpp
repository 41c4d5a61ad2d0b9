#pragma once

// Embedding network and classifier head: a ResNet-18 trunk over 1x60xL
// feature maps (first conv 9x9/stride(3,1)), four residual stages, a final
// 3x3 conv, attentive statistics pooling, a fully connected embedding layer,
// a 2-way softmax head, and the one-class-softmax target direction w0.
// The SE variant gates each non-identity residual branch per channel.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "antispoof/activations.hpp"
#include "antispoof/ops.hpp"
#include "antispoof/tensor.hpp"

namespace antispoof {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  std::string arch = "resnet18";  // or "se_resnet18"
  std::vector<std::string> activation = {"arelu"};  // >1 entries form an ensemble
  std::string interior_policy = "first_last_only";  // or "all_sites"
  bool share_first_last = true;
  bool force_ensemble = false;  // wrap a single activation in a one-member ensemble
  bool use_batchnorm = true;
  std::size_t se_reduction = 8;
  std::size_t first_channels = 16;
  std::vector<std::size_t> stage_channels = {64, 128, 256, 512};
  std::size_t final_channels = 256;
  std::size_t embedding_dim = 256;
  std::size_t att_dim = 128;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  double var_floor = 1e-9;

  bool use_se() const { return arch == "se_resnet18"; }

  void validate() const {
    if (arch != "resnet18" && arch != "se_resnet18")
      throw ModelError("config: unknown arch '" + arch + "'");
    if (interior_policy != "first_last_only" && interior_policy != "all_sites")
      throw ModelError("config: unknown interior_activation_policy '" + interior_policy + "'");
    if (activation.empty()) throw ModelError("config: empty activation list");
    for (const auto& a : activation) {
      if (act_kind_from_name(a) == ActKind::ensemble)
        throw ModelError("config: list the member kinds instead of 'ensemble'");
    }
    if (stage_channels.size() != 4) throw ModelError("config: need exactly 4 stage widths");
    if (use_se()) {
      for (std::size_t c : stage_channels)
        if (c % se_reduction != 0)
          throw ModelError("config: se_reduction must divide every stage width");
    }
    if (first_channels == 0 || final_channels == 0 || embedding_dim == 0 || att_dim == 0)
      throw ModelError("config: zero width");
  }

  nlohmann::json to_json() const {
    return {{"arch", arch},
            {"activation", activation},
            {"interior_activation_policy", interior_policy},
            {"share_first_last", share_first_last},
            {"force_ensemble", force_ensemble},
            {"use_batchnorm", use_batchnorm},
            {"se_reduction", se_reduction},
            {"first_channels", first_channels},
            {"stage_channels", stage_channels},
            {"final_channels", final_channels},
            {"embedding_dim", embedding_dim},
            {"att_dim", att_dim},
            {"bn_eps", bn_eps},
            {"bn_momentum", bn_momentum},
            {"var_floor", var_floor}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.arch = j.value("arch", c.arch);
    if (j.contains("activation")) c.activation = j.at("activation").get<std::vector<std::string>>();
    c.interior_policy = j.value("interior_activation_policy", c.interior_policy);
    c.share_first_last = j.value("share_first_last", c.share_first_last);
    c.force_ensemble = j.value("force_ensemble", c.force_ensemble);
    c.use_batchnorm = j.value("use_batchnorm", c.use_batchnorm);
    c.se_reduction = j.value("se_reduction", c.se_reduction);
    c.first_channels = j.value("first_channels", c.first_channels);
    if (j.contains("stage_channels"))
      c.stage_channels = j.at("stage_channels").get<std::vector<std::size_t>>();
    c.final_channels = j.value("final_channels", c.final_channels);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.att_dim = j.value("att_dim", c.att_dim);
    c.bn_eps = j.value("bn_eps", c.bn_eps);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
    c.var_floor = j.value("var_floor", c.var_floor);
    c.validate();
    return c;
  }
};

// ---------------------------------------------------------------------------
// batch normalization (fused op; running stats updated as a side effect)

template <class T>
Tensor<T> batch_norm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       std::vector<T>& running_mean, std::vector<T>& running_var, T eps,
                       T momentum, bool training) {
  if (x.rank() != 4) throw TensorError("batch_norm2d: expects NxCxHxW");
  std::size_t n = x.shape()[0], c = x.shape()[1], hw = x.shape()[2] * x.shape()[3];
  if (gamma.size() != c || beta.size() != c || running_mean.size() != c ||
      running_var.size() != c)
    throw TensorError("batch_norm2d: per-channel parameter size mismatch");
  std::size_t m = n * hw;

  std::vector<T> mean_c(c), invstd_c(c);
  if (training) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      T mu = T(0);
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x.data().data() + (b * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) mu += p[j];
      }
      mu /= static_cast<T>(m);
      T var = T(0);
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x.data().data() + (b * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          T d = p[j] - mu;
          var += d * d;
        }
      }
      var /= static_cast<T>(m);
      mean_c[ch] = mu;
      invstd_c[ch] = T(1) / std::sqrt(var + eps);
      T unbiased = m > 1 ? var * static_cast<T>(m) / static_cast<T>(m - 1) : var;
      running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * mu;
      running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean_c[ch] = running_mean[ch];
      invstd_c[ch] = T(1) / std::sqrt(running_var[ch] + eps);
    }
  }

  std::vector<T> out(x.size());
  std::vector<T> xhat(x.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* p = x.data().data() + (b * c + ch) * hw;
      T* o = out.data() + (b * c + ch) * hw;
      T* xh = xhat.data() + (b * c + ch) * hw;
      T g = gamma.data()[ch], bt = beta.data()[ch];
      T mu = mean_c[ch], is = invstd_c[ch];
      for (std::size_t j = 0; j < hw; ++j) {
        xh[j] = (p[j] - mu) * is;
        o[j] = g * xh[j] + bt;
      }
    }

  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return detail::make_op<T>(
      x.shape(), std::move(out), {xn, gn, bn},
      [xn, gn, bn, n, c, hw, m, training, invstd_c = std::move(invstd_c),
       xhat = std::move(xhat)](TensorNode<T>& self) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          T sum_dy = T(0), sum_dy_xhat = T(0);
          for (std::size_t b = 0; b < n; ++b) {
            const T* dy = self.grad.data() + (b * c + ch) * hw;
            const T* xh = xhat.data() + (b * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
              sum_dy += dy[j];
              sum_dy_xhat += dy[j] * xh[j];
            }
          }
          if (gn->requires_grad) {
            gn->ensure_grad();
            gn->grad[ch] += sum_dy_xhat;
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            bn->grad[ch] += sum_dy;
          }
          if (xn->requires_grad) {
            xn->ensure_grad();
            T g = gn->value[ch], is = invstd_c[ch];
            T inv_m = T(1) / static_cast<T>(m);
            for (std::size_t b = 0; b < n; ++b) {
              const T* dy = self.grad.data() + (b * c + ch) * hw;
              const T* xh = xhat.data() + (b * c + ch) * hw;
              T* dx = xn->grad.data() + (b * c + ch) * hw;
              for (std::size_t j = 0; j < hw; ++j) {
                if (training)
                  dx[j] += g * is * (dy[j] - sum_dy * inv_m - xh[j] * sum_dy_xhat * inv_m);
                else
                  dx[j] += g * is * dy[j];
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// layers

template <class T>
struct Conv2dLayer {
  Tensor<T> w, b;
  ConvAttrs attrs;

  static Conv2dLayer create(std::size_t cin, std::size_t cout, std::size_t kh, std::size_t kw,
                            ConvAttrs attrs, std::mt19937_64& rng) {
    Conv2dLayer l;
    std::size_t fan_in = cin * kh * kw;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    std::vector<T> wv(cout * cin * kh * kw);
    for (auto& v : wv) v = static_cast<T>(dist(rng));
    l.w = Tensor<T>({cout, cin, kh, kw}, std::move(wv), true);
    l.b = Tensor<T>::zeros({cout}, true);
    l.attrs = attrs;
    return l;
  }

  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, w, b, attrs); }
};

template <class T>
struct BatchNorm2dLayer {
  Tensor<T> gamma, beta;
  std::vector<T> running_mean, running_var;
  T eps = T(1e-5);
  T momentum = T(0.1);

  static BatchNorm2dLayer create(std::size_t c, T eps, T momentum) {
    BatchNorm2dLayer l;
    l.gamma = Tensor<T>::full({c}, T(1), true);
    l.beta = Tensor<T>::zeros({c}, true);
    l.running_mean.assign(c, T(0));
    l.running_var.assign(c, T(1));
    l.eps = eps;
    l.momentum = momentum;
    return l;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    return batch_norm2d(x, gamma, beta, running_mean, running_var, eps, momentum,
                        mode == Mode::train);
  }
};

template <class T>
struct LinearLayer {
  Tensor<T> w;  // stored in x out for matmul(X, w)
  Tensor<T> b;

  static LinearLayer create(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    LinearLayer l;
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> wv(in * out);
    for (auto& v : wv) v = static_cast<T>(dist(rng));
    l.w = Tensor<T>({in, out}, std::move(wv), true);
    l.b = Tensor<T>::zeros({out}, true);
    return l;
  }

  // X: Nxin -> Nxout
  Tensor<T> forward(const Tensor<T>& x) const { return add_rowvec(matmul(x, w), b); }
};

// squeeze-and-excitation gate: global average -> FC C->C/r -> ReLU ->
// FC C/r->C -> sigmoid -> per-channel rescale
template <class T>
Tensor<T> se_block(const Tensor<T>& x, const LinearLayer<T>& fc1, const LinearLayer<T>& fc2) {
  Tensor<T> s = channel_mean(x);
  Tensor<T> z = relu(fc1.forward(s));
  Tensor<T> g = sigmoid(fc2.forward(z));
  return scale_channels(x, g);
}

// ---------------------------------------------------------------------------
// attentive statistics pooling

template <class T>
struct AttentivePooling {
  Tensor<T> w;  // att_dim x C
  Tensor<T> b;  // att_dim
  Tensor<T> v;  // 1 x att_dim
  T var_floor = T(1e-9);

  static AttentivePooling create(std::size_t channels, std::size_t att_dim, T var_floor,
                                 std::mt19937_64& rng) {
    AttentivePooling p;
    double bound = 1.0 / std::sqrt(static_cast<double>(channels));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> wv(att_dim * channels);
    for (auto& x : wv) x = static_cast<T>(dist(rng));
    p.w = Tensor<T>({att_dim, channels}, std::move(wv), true);
    p.b = Tensor<T>::zeros({att_dim}, true);
    std::vector<T> vv(att_dim);
    std::uniform_real_distribution<double> vdist(-1.0 / std::sqrt(double(att_dim)),
                                                 1.0 / std::sqrt(double(att_dim)));
    for (auto& x : vv) x = static_cast<T>(vdist(rng));
    p.v = Tensor<T>({1, att_dim}, std::move(vv), true);
    p.var_floor = var_floor;
    return p;
  }

  // frames: C x T -> concat(weighted mean, weighted std), length 2C
  Tensor<T> forward(const Tensor<T>& frames) const {
    if (frames.rank() != 2) throw TensorError("attentive pooling: expects CxT");
    std::size_t c = frames.shape()[0], t = frames.shape()[1];
    if (t == 0) throw TensorError("attentive pooling: empty time axis");
    Tensor<T> scores = matmul(v, tanh_op(add_colvec(matmul(w, frames), b)));  // 1xT
    Tensor<T> att = reshape(softmax(scores), Shape{t, 1});
    Tensor<T> mu = reshape(matmul(frames, att), Shape{c});
    Tensor<T> m2 = reshape(matmul(mul(frames, frames), att), Shape{c});
    Tensor<T> var = sub(m2, mul(mu, mu));
    Tensor<T> sd = sqrt_op(clamp_min(var, var_floor));
    return concat(mu, sd);
  }
};

// ---------------------------------------------------------------------------
// residual block

template <class T>
struct BasicBlock {
  Conv2dLayer<T> conv1, conv2;
  BatchNorm2dLayer<T> bn1, bn2;
  bool use_bn = true;
  bool has_proj = false;
  Conv2dLayer<T> proj;
  BatchNorm2dLayer<T> proj_bn;
  bool use_se = false;
  LinearLayer<T> se_fc1, se_fc2;
  ActivationSpec<T> act1, act2;

  Tensor<T> forward(const Tensor<T>& x, Mode mode, std::mt19937_64* rng) {
    Tensor<T> h = conv1.forward(x);
    if (use_bn) h = bn1.forward(h, mode);
    h = activation_forward(act1, h, mode, rng);
    h = conv2.forward(h);
    if (use_bn) h = bn2.forward(h, mode);
    if (use_se) h = se_block(h, se_fc1, se_fc2);
    Tensor<T> shortcut = x;
    if (has_proj) {
      shortcut = proj.forward(x);
      if (use_bn) shortcut = proj_bn.forward(shortcut, mode);
    }
    return activation_forward(act2, add(h, shortcut), mode, rng);
  }
};

// ---------------------------------------------------------------------------
// model

template <class T>
struct ModelOutput {
  Tensor<T> embeddings;  // N x D
  Tensor<T> logits;      // N x 2
};

template <class T>
class Model {
 public:
  Model() = default;

  static Model build(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg_ = cfg;
    std::mt19937_64 rng(seed);
    T eps = static_cast<T>(cfg.bn_eps);
    T mom = static_cast<T>(cfg.bn_momentum);

    m.conv1_ = Conv2dLayer<T>::create(1, cfg.first_channels, 9, 9, ConvAttrs{3, 1, 0, 4}, rng);
    m.bn1_ = BatchNorm2dLayer<T>::create(cfg.first_channels, eps, mom);
    m.act_first_ = m.make_site_spec(cfg.share_first_last ? 1 : cfg.first_channels);

    std::size_t cin = cfg.first_channels;
    for (std::size_t s = 0; s < 4; ++s) {
      std::size_t cout = cfg.stage_channels[s];
      std::size_t stride = s == 0 ? 1 : 2;
      for (std::size_t blk = 0; blk < 2; ++blk) {
        BasicBlock<T> b;
        std::size_t bstride = blk == 0 ? stride : 1;
        b.conv1 = Conv2dLayer<T>::create(cin, cout, 3, 3, ConvAttrs{bstride, bstride, 1, 1}, rng);
        b.conv2 = Conv2dLayer<T>::create(cout, cout, 3, 3, ConvAttrs{1, 1, 1, 1}, rng);
        b.use_bn = cfg.use_batchnorm;
        if (cfg.use_batchnorm) {
          b.bn1 = BatchNorm2dLayer<T>::create(cout, eps, mom);
          b.bn2 = BatchNorm2dLayer<T>::create(cout, eps, mom);
        }
        b.has_proj = (cin != cout) || (bstride != 1);
        if (b.has_proj) {
          b.proj = Conv2dLayer<T>::create(cin, cout, 1, 1, ConvAttrs{bstride, bstride, 0, 0}, rng);
          if (cfg.use_batchnorm) b.proj_bn = BatchNorm2dLayer<T>::create(cout, eps, mom);
        }
        b.use_se = cfg.use_se();
        if (b.use_se) {
          b.se_fc1 = LinearLayer<T>::create(cout, cout / cfg.se_reduction, rng);
          b.se_fc2 = LinearLayer<T>::create(cout / cfg.se_reduction, cout, rng);
        }
        b.act1 = m.make_interior_spec(cout);
        b.act2 = m.make_interior_spec(cout);
        m.blocks_.push_back(std::move(b));
        cin = cout;
      }
    }

    m.conv_last_ = Conv2dLayer<T>::create(cin, cfg.final_channels, 3, 3, ConvAttrs{1, 1, 0, 1}, rng);
    m.bn_last_ = BatchNorm2dLayer<T>::create(cfg.final_channels, eps, mom);
    m.act_last_ = cfg.share_first_last
                      ? m.act_first_  // tensor handles shared -> shared parameters
                      : m.make_site_spec(cfg.final_channels);

    m.pool_ = AttentivePooling<T>::create(cfg.final_channels, cfg.att_dim,
                                          static_cast<T>(cfg.var_floor), rng);
    m.fc_ = LinearLayer<T>::create(2 * cfg.final_channels, cfg.embedding_dim, rng);
    m.head_ = LinearLayer<T>::create(cfg.embedding_dim, 2, rng);

    std::normal_distribution<double> wdist(0.0, 1.0);
    std::vector<T> w0(cfg.embedding_dim);
    for (auto& v : w0) v = static_cast<T>(wdist(rng));
    m.w0_ = Tensor<T>({cfg.embedding_dim}, std::move(w0), true);
    return m;
  }

  const ModelConfig& config() const { return cfg_; }
  Tensor<T>& w0() { return w0_; }
  const Tensor<T>& w0() const { return w0_; }

  using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

  // features: 60xL, 1x60xL or Nx1x60xL
  ModelOutput<T> forward(const Tensor<T>& features, Mode mode, std::mt19937_64* rng = nullptr,
                         ShapeTrace* trace = nullptr) {
    Tensor<T> x = features;
    if (x.rank() == 2) x = reshape(x, Shape{1, 1, x.shape()[0], x.shape()[1]});
    if (x.rank() == 3) x = reshape(x, Shape{1, x.shape()[0], x.shape()[1], x.shape()[2]});
    if (x.rank() != 4) throw ModelError("forward: features must be 60xL (optionally batched)");
    if (x.shape()[3] < 8)
      throw ModelError("forward: input too short, need at least 8 frames, got " +
                       std::to_string(x.shape()[3]));
    std::size_t n = x.shape()[0];

    Tensor<T> h = conv1_.forward(x);
    if (cfg_.use_batchnorm) h = bn1_.forward(h, mode);
    h = activation_forward(act_first_, h, mode, rng);
    if (trace) trace->emplace_back("conv1", h.shape());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      h = blocks_[i].forward(h, mode, rng);
      if (trace && i % 2 == 1)
        trace->emplace_back("stage" + std::to_string(i / 2 + 1), h.shape());
    }
    h = conv_last_.forward(h);
    if (cfg_.use_batchnorm) h = bn_last_.forward(h, mode);
    h = activation_forward(act_last_, h, mode, rng);
    if (trace) trace->emplace_back("conv_last", h.shape());

    std::size_t c = h.shape()[1], freq = h.shape()[2], t = h.shape()[3];
    std::vector<Tensor<T>> pooled;
    pooled.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      pooled.push_back(pool_.forward(reshape(select_batch(h, i), Shape{c * freq, t})));
    Tensor<T> stats = stack_rows(pooled);  // N x 2C
    if (trace) trace->emplace_back("pool", stats.shape());

    ModelOutput<T> out;
    out.embeddings = fc_.forward(stats);
    out.logits = head_.forward(out.embeddings);
    if (trace) {
      trace->emplace_back("fc", out.embeddings.shape());
      trace->emplace_back("softmax", out.logits.shape());
    }
    return out;
  }

  // detection scores: cosine between each embedding and the OCS target
  // direction, always in [-1, 1]
  std::vector<double> cosine_scores(const Tensor<T>& embeddings) const {
    if (embeddings.rank() != 2) throw ModelError("cosine_scores: expects NxD");
    std::size_t n = embeddings.shape()[0], d = embeddings.shape()[1];
    if (d != w0_.size()) throw ModelError("cosine_scores: dim mismatch");
    double wn = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      wn += double(w0_.data()[j]) * double(w0_.data()[j]);
    wn = std::sqrt(wn);
    if (wn == 0.0) throw ModelError("cosine_scores: zero-norm w0");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0, en = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double e = embeddings.data()[i * d + j];
        dot += e * double(w0_.data()[j]);
        en += e * e;
      }
      en = std::sqrt(en);
      if (en == 0.0) throw ModelError("cosine_scores: zero-norm embedding");
      out[i] = dot / (en * wn);
    }
    return out;
  }

  std::vector<std::pair<std::string, Tensor<T>>> named_parameters() {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    auto add_conv = [&](const std::string& p, Conv2dLayer<T>& l) {
      out.emplace_back(p + ".w", l.w);
      out.emplace_back(p + ".b", l.b);
    };
    auto add_bn = [&](const std::string& p, BatchNorm2dLayer<T>& l) {
      out.emplace_back(p + ".gamma", l.gamma);
      out.emplace_back(p + ".beta", l.beta);
    };
    auto add_lin = [&](const std::string& p, LinearLayer<T>& l) {
      out.emplace_back(p + ".w", l.w);
      out.emplace_back(p + ".b", l.b);
    };
    auto add_act = [&](const std::string& p, ActivationSpec<T>& a) {
      auto sub = a.named_parameters(p);
      out.insert(out.end(), sub.begin(), sub.end());
    };
    add_conv("conv1", conv1_);
    if (cfg_.use_batchnorm) add_bn("bn1", bn1_);
    add_act("act_first", act_first_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      std::string p = "stage" + std::to_string(i / 2 + 1) + ".block" + std::to_string(i % 2);
      auto& b = blocks_[i];
      add_conv(p + ".conv1", b.conv1);
      add_conv(p + ".conv2", b.conv2);
      if (b.use_bn) {
        add_bn(p + ".bn1", b.bn1);
        add_bn(p + ".bn2", b.bn2);
      }
      if (b.has_proj) {
        add_conv(p + ".proj", b.proj);
        if (b.use_bn) add_bn(p + ".proj_bn", b.proj_bn);
      }
      if (b.use_se) {
        add_lin(p + ".se_fc1", b.se_fc1);
        add_lin(p + ".se_fc2", b.se_fc2);
      }
      add_act(p + ".act1", b.act1);
      add_act(p + ".act2", b.act2);
    }
    add_conv("conv_last", conv_last_);
    if (cfg_.use_batchnorm) add_bn("bn_last", bn_last_);
    if (!cfg_.share_first_last) add_act("act_last", act_last_);
    out.emplace_back("pool.w", pool_.w);
    out.emplace_back("pool.b", pool_.b);
    out.emplace_back("pool.v", pool_.v);
    add_lin("fc", fc_);
    add_lin("head", head_);
    out.emplace_back("ocs.w0", w0_);
    return out;
  }

  std::vector<std::pair<std::string, std::vector<T>*>> named_buffers() {
    std::vector<std::pair<std::string, std::vector<T>*>> out;
    if (!cfg_.use_batchnorm) return out;
    auto add_bn = [&](const std::string& p, BatchNorm2dLayer<T>& l) {
      out.emplace_back(p + ".running_mean", &l.running_mean);
      out.emplace_back(p + ".running_var", &l.running_var);
    };
    add_bn("bn1", bn1_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      std::string p = "stage" + std::to_string(i / 2 + 1) + ".block" + std::to_string(i % 2);
      add_bn(p + ".bn1", blocks_[i].bn1);
      add_bn(p + ".bn2", blocks_[i].bn2);
      if (blocks_[i].has_proj) add_bn(p + ".proj_bn", blocks_[i].proj_bn);
    }
    add_bn("bn_last", bn_last_);
    return out;
  }

 private:
  ActivationSpec<T> make_site_spec(std::size_t channels) const {
    if (cfg_.activation.size() == 1 && !cfg_.force_ensemble)
      return activation_init<T>(act_kind_from_name(cfg_.activation[0]), channels);
    std::vector<ActKind> kinds;
    for (const auto& a : cfg_.activation) kinds.push_back(act_kind_from_name(a));
    return make_ensemble<T>(kinds, channels);
  }

  ActivationSpec<T> make_interior_spec(std::size_t channels) const {
    if (cfg_.interior_policy == "all_sites") return make_site_spec(channels);
    return activation_init<T>(ActKind::relu);
  }

  ModelConfig cfg_;
  Conv2dLayer<T> conv1_, conv_last_;
  BatchNorm2dLayer<T> bn1_, bn_last_;
  ActivationSpec<T> act_first_, act_last_;
  std::vector<BasicBlock<T>> blocks_;
  AttentivePooling<T> pool_;
  LinearLayer<T> fc_, head_;
  Tensor<T> w0_;
};

// ---------------------------------------------------------------------------
// checkpoint: directory with a JSON manifest plus one raw little-endian f32
// array file per parameter/buffer

namespace detail {

inline std::string param_file_name(const std::string& name) {
  std::string f = name;
  for (char& c : f)
    if (c == '.' || c == '/') c = '_';
  return f + ".bin";
}

template <class T>
void write_f32_file(const std::filesystem::path& path, const std::vector<T>& values) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ModelError("checkpoint: cannot write " + path.string());
  for (T v : values) {
    float x = static_cast<float>(v);
    f.write(reinterpret_cast<const char*>(&x), 4);
  }
}

template <class T>
std::vector<T> read_f32_file(const std::filesystem::path& path, std::size_t count) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ModelError("checkpoint: cannot read " + path.string());
  std::vector<T> out(count);
  for (auto& v : out) {
    float x;
    f.read(reinterpret_cast<char*>(&x), 4);
    if (!f) throw ModelError("checkpoint: truncated " + path.string());
    v = static_cast<T>(x);
  }
  return out;
}

}  // namespace detail

template <class T>
void save_checkpoint(Model<T>& model, const std::filesystem::path& dir, std::uint64_t step) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "antispoof-checkpoint-v1";
  manifest["step"] = step;
  manifest["dtype"] = "f32";
  manifest["config"] = model.config().to_json();
  nlohmann::json params = nlohmann::json::array();
  for (auto& [name, t] : model.named_parameters()) {
    std::string file = detail::param_file_name(name);
    detail::write_f32_file(dir / file, t.data());
    params.push_back({{"name", name}, {"shape", t.shape()}, {"file", file}});
  }
  manifest["params"] = params;
  nlohmann::json buffers = nlohmann::json::array();
  for (auto& [name, v] : model.named_buffers()) {
    std::string file = detail::param_file_name(name);
    detail::write_f32_file(dir / file, *v);
    buffers.push_back({{"name", name}, {"shape", nlohmann::json::array({v->size()})},
                       {"file", file}});
  }
  manifest["buffers"] = buffers;
  std::ofstream f(dir / "manifest.json");
  if (!f) throw ModelError("checkpoint: cannot write manifest in " + dir.string());
  f << manifest.dump(2) << "\n";
}

template <class T>
Model<T> load_checkpoint(const std::filesystem::path& dir, std::uint64_t* step_out = nullptr) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw ModelError("checkpoint: missing manifest in " + dir.string());
  nlohmann::json manifest = nlohmann::json::parse(f);
  if (manifest.value("format", "") != "antispoof-checkpoint-v1")
    throw ModelError("checkpoint: unrecognized format in " + dir.string());
  ModelConfig cfg = ModelConfig::from_json(manifest.at("config"));
  Model<T> model = Model<T>::build(cfg, 0);
  if (step_out) *step_out = manifest.value("step", std::uint64_t(0));

  std::map<std::string, nlohmann::json> index;
  for (const auto& p : manifest.at("params")) index[p.at("name")] = p;
  for (auto& [name, t] : model.named_parameters()) {
    auto it = index.find(name);
    if (it == index.end()) throw ModelError("checkpoint: missing parameter " + name);
    Shape shape = it->second.at("shape").template get<Shape>();
    if (shape != t.shape())
      throw ModelError("checkpoint: shape mismatch for " + name + ": file " + shape_str(shape) +
                       " vs model " + shape_str(t.shape()));
    std::string file = it->second.at("file").template get<std::string>();
    t.data() = detail::read_f32_file<T>(dir / file, t.size());
  }
  std::map<std::string, nlohmann::json> bindex;
  for (const auto& p : manifest.at("buffers")) bindex[p.at("name")] = p;
  for (auto& [name, v] : model.named_buffers()) {
    auto it = bindex.find(name);
    if (it == bindex.end()) throw ModelError("checkpoint: missing buffer " + name);
    std::string file = it->second.at("file").template get<std::string>();
    *v = detail::read_f32_file<T>(dir / file, v->size());
  }
  return model;
}

}  // namespace antispoof
