#include "aind/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "aind/ops.hpp"

namespace aind {

void ModelConfig::validate() const {
  if (in_channels != 1 && in_channels != 3) throw ConfigError("in_channels must be 1 or 3");
  if (base_channels <= 0) throw ConfigError("base_channels must be positive");
  if (num_scales < 1 || num_scales > 4) throw ConfigError("num_scales must be in [1, 4]");
  if (blocks_per_scale < 0) throw ConfigError("blocks_per_scale must be non-negative");
  if (estimator_channels <= 0) throw ConfigError("estimator_channels must be positive");
  if (ain_hidden <= 0) throw ConfigError("ain_hidden must be positive");
  if (lambda_ms < 0.0 || lambda_ms > 1.0) throw ConfigError("lambda_ms must lie in [0, 1]");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0, 1)");
}

int ModelConfig::size_multiple() const { return std::max(4, 1 << (num_scales - 1)); }

ModelConfig full_scale_config() {
  ModelConfig c;
  c.base_channels = 64;
  c.num_scales = 3;
  c.blocks_per_scale = 4;
  c.estimator_channels = 32;
  c.ain_hidden = 64;
  return c;
}

ModelConfig micro_config() {
  ModelConfig c;
  c.base_channels = 8;
  c.num_scales = 3;
  c.blocks_per_scale = 1;
  c.estimator_channels = 8;
  c.ain_hidden = 8;
  return c;
}

template <typename T>
Var<T> Conv<T>::operator()(Tape<T>& tape, const Var<T>& x) const {
  return ops::conv2d(tape, x, weight, bias, stride, pad);
}

template <typename T>
Var<T> UpConv<T>::operator()(Tape<T>& tape, const Var<T>& x) const {
  return ops::transposed_conv2d(tape, x, weight, bias, stride);
}

namespace {

template <typename T>
void he_normal(Tensor<T>& w, int fan_in, Rng& rng) {
  const double sd = std::sqrt(2.0 / fan_in);
  for (T& v : w.data()) v = static_cast<T>(sd * rng.normal());
}

}  // namespace

template <typename T>
Conv<T> make_conv(ParamStore<T>& store, const std::string& name, Tag tag, int k, int cin, int cout,
                  Rng& rng) {
  Conv<T> c;
  c.weight = store.add(name + ".w", tag, Shape{k, k, cin, cout});
  c.bias = store.add(name + ".b", tag, Shape{1, 1, 1, cout});
  c.pad = k / 2;
  he_normal(*c.weight, k * k * cin, rng);
  return c;
}

template <typename T>
UpConv<T> make_up_conv(ParamStore<T>& store, const std::string& name, Tag tag, int cin, int cout,
                       Rng& rng) {
  UpConv<T> c;
  c.weight = store.add(name + ".w", tag, Shape{2, 2, cout, cin});
  c.bias = store.add(name + ".b", tag, Shape{1, 1, 1, cout});
  he_normal(*c.weight, cin, rng);
  return c;
}

template <typename T>
InstanceStats<T> instance_stats(const Tensor<T>& h, T eps) {
  const Shape s = h.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  if (plane == 0) throw ShapeError("instance_stats: empty spatial extent");
  InstanceStats<T> st{std::vector<T>(static_cast<std::size_t>(s.n) * s.c),
                      std::vector<T>(static_cast<std::size_t>(s.n) * s.c)};
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      double mu = 0.0;
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) mu += h.at(n, y, x, c);
      }
      mu /= static_cast<double>(plane);
      double var = 0.0;
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          const double d = h.at(n, y, x, c) - mu;
          var += d * d;
        }
      }
      st.mean[static_cast<std::size_t>(n) * s.c + c] = static_cast<T>(mu);
      st.var[static_cast<std::size_t>(n) * s.c + c] =
          static_cast<T>(var / static_cast<double>(plane) + eps);
    }
  }
  return st;
}

template <typename T>
Var<T> ain_apply(Tape<T>& tape, const Var<T>& h, const Var<T>& gamma, const Var<T>& beta) {
  auto normalized = ops::instance_norm(tape, h, static_cast<T>(kAinEpsilon));
  return ops::modulate(tape, normalized, gamma, beta);
}

template <typename T>
AinModule<T>::AinModule(ParamStore<T>& store, const std::string& prefix, int cond_channels,
                        int hidden, int channels, AinMode mode, T slope, Rng& rng)
    : mode_(mode), channels_(channels), slope_(slope) {
  if (mode_ == AinMode::kAdaptive) {
    shared_ = make_conv(store, prefix + ".shared", Tag::kAin, 3, cond_channels, hidden, rng);
    gamma_head_ = make_conv(store, prefix + ".gamma", Tag::kAin, 3, hidden, channels, rng);
    beta_head_ = make_conv(store, prefix + ".beta", Tag::kAin, 3, hidden, channels, rng);
    // Identity start: gamma* = 1, beta* = 0, i.e. plain instance normalization.
    std::fill(gamma_head_.weight->data().begin(), gamma_head_.weight->data().end(), T{0});
    std::fill(gamma_head_.bias->data().begin(), gamma_head_.bias->data().end(), T{1});
    std::fill(beta_head_.weight->data().begin(), beta_head_.weight->data().end(), T{0});
  } else {
    gamma_const_ = store.add(prefix + ".gamma_const", Tag::kAin, Shape{1, 1, 1, channels});
    beta_const_ = store.add(prefix + ".beta_const", Tag::kAin, Shape{1, 1, 1, channels});
    std::fill(gamma_const_->data().begin(), gamma_const_->data().end(), T{1});
  }
}

template <typename T>
typename AinModule<T>::Affine AinModule<T>::generate(Tape<T>& tape, const Var<T>& cond) const {
  if (mode_ == AinMode::kInConcat) return {gamma_const_, beta_const_};
  auto hidden = ops::leaky_relu(tape, shared_(tape, cond), slope_);
  return {gamma_head_(tape, hidden), beta_head_(tape, hidden)};
}

template <typename T>
Var<T> AinModule<T>::forward(Tape<T>& tape, const Var<T>& h, const Var<T>& cond) const {
  const auto affine = generate(tape, cond);
  return ain_apply(tape, h, affine.gamma, affine.beta);
}

template <typename T>
Var<T> ain_transform(Tape<T>& tape, const Var<T>& h, const Var<T>& sigma_hat,
                     const AinModule<T>& module) {
  const Shape hs = h->shape();
  const Shape ss = sigma_hat->shape();
  if (hs.n != ss.n || hs.h == 0 || ss.h % hs.h != 0 || ss.w % hs.w != 0 ||
      ss.h / hs.h != ss.w / hs.w) {
    throw ShapeError("ain_transform: noise map " + ss.str() + " is not an integer scale of " +
                     hs.str());
  }
  const int factor = ss.h / hs.h;
  auto cond = factor == 1 ? sigma_hat : ops::avg_pool(tape, sigma_hat, factor);
  return module.forward(tape, h, cond);
}

template <typename T>
AinResBlock<T>::AinResBlock(ParamStore<T>& store, const std::string& prefix, int channels,
                            int cond_channels, int hidden, AinMode mode, T slope, Rng& rng)
    : slope_(slope),
      conv1_(make_conv(store, prefix + ".conv1", Tag::kBackbone, 3, channels, channels, rng)),
      ain1_(store, prefix + ".ain1", cond_channels, hidden, channels, mode, slope, rng),
      conv2_(make_conv(store, prefix + ".conv2", Tag::kBackbone, 3, channels, channels, rng)),
      ain2_(store, prefix + ".ain2", cond_channels, hidden, channels, mode, slope, rng) {}

template <typename T>
Var<T> AinResBlock<T>::forward(Tape<T>& tape, const Var<T>& h, const Var<T>& cond) const {
  auto r = ain1_.forward(tape, conv1_(tape, h), cond);
  r = ops::leaky_relu(tape, r, slope_);
  r = ain2_.forward(tape, conv2_(tape, r), cond);
  return ops::add(tape, h, r);
}

template <typename T>
UnetEstimator<T>::UnetEstimator(ParamStore<T>& store, const std::string& prefix, int in_channels,
                                int width, T slope, Rng& rng)
    : slope_(slope),
      enc1_(make_conv(store, prefix + ".enc1", Tag::kEstimator, 3, in_channels, width, rng)),
      enc1b_(make_conv(store, prefix + ".enc1b", Tag::kEstimator, 3, width, width, rng)),
      enc2_(make_conv(store, prefix + ".enc2", Tag::kEstimator, 3, width, width, rng)),
      enc2b_(make_conv(store, prefix + ".enc2b", Tag::kEstimator, 3, width, width, rng)),
      enc3_(make_conv(store, prefix + ".enc3", Tag::kEstimator, 3, width, width, rng)),
      enc3b_(make_conv(store, prefix + ".enc3b", Tag::kEstimator, 3, width, width, rng)),
      dec2_(make_conv(store, prefix + ".dec2", Tag::kEstimator, 3, width, width, rng)),
      dec1_(make_conv(store, prefix + ".dec1", Tag::kEstimator, 3, width, width, rng)),
      head4_(make_conv(store, prefix + ".head4", Tag::kEstimator, 3, width, in_channels, rng)),
      head1_(make_conv(store, prefix + ".head1", Tag::kEstimator, 3, width, in_channels, rng)),
      up2_(make_up_conv(store, prefix + ".up2", Tag::kEstimator, width, width, rng)),
      up1_(make_up_conv(store, prefix + ".up1", Tag::kEstimator, width, width, rng)) {}

template <typename T>
EstimatorOutput<T> UnetEstimator<T>::forward(Tape<T>& tape, const Var<T>& y) const {
  const Shape s = y->shape();
  const int hp = (s.h + 3) / 4 * 4;
  const int wp = (s.w + 3) / 4 * 4;
  auto x = (hp == s.h && wp == s.w) ? y : ops::pad_replicate(tape, y, hp, wp);
  auto act = [&](const Var<T>& v) { return ops::leaky_relu(tape, v, slope_); };

  auto e1 = act(enc1b_(tape, act(enc1_(tape, x))));
  auto e2 = act(enc2b_(tape, act(enc2_(tape, ops::avg_pool(tape, e1, 2)))));
  auto b = act(enc3b_(tape, act(enc3_(tape, ops::avg_pool(tape, e2, 2)))));
  auto sigma4 = ops::softplus(tape, head4_(tape, b));
  auto d2 = act(dec2_(tape, ops::add(tape, up2_(tape, b), e2)));
  auto d1 = act(dec1_(tape, ops::add(tape, up1_(tape, d2), e1)));
  auto sigma1 = ops::softplus(tape, head1_(tape, d1));

  if (hp != s.h || wp != s.w) {
    sigma1 = ops::crop(tape, sigma1, s.h, s.w);
    sigma4 = ops::crop(tape, sigma4, (s.h + 3) / 4, (s.w + 3) / 4);
  }
  return {sigma1, sigma4};
}

template <typename T>
FcnEstimator<T>::FcnEstimator(ParamStore<T>& store, const std::string& prefix, int in_channels,
                              int width, T slope, Rng& rng)
    : slope_(slope) {
  convs_.push_back(make_conv(store, prefix + ".conv0", Tag::kEstimator, 3, in_channels, width, rng));
  for (int i = 1; i < 4; ++i) {
    convs_.push_back(
        make_conv(store, prefix + ".conv" + std::to_string(i), Tag::kEstimator, 3, width, width, rng));
  }
  convs_.push_back(make_conv(store, prefix + ".conv4", Tag::kEstimator, 3, width, in_channels, rng));
}

template <typename T>
EstimatorOutput<T> FcnEstimator<T>::forward(Tape<T>& tape, const Var<T>& y) const {
  auto h = y;
  for (std::size_t i = 0; i + 1 < convs_.size(); ++i) {
    h = ops::leaky_relu(tape, convs_[i](tape, h), slope_);
  }
  auto sigma1 = ops::softplus(tape, convs_.back()(tape, h));
  return {sigma1, ops::avg_pool(tape, sigma1, 4)};
}

std::size_t unet_estimator_param_count(int in_channels, int width) {
  const std::size_t c = in_channels;
  const std::size_t e = width;
  const std::size_t conv_in = 9 * c * e + e;
  const std::size_t conv_mid = 9 * e * e + e;
  const std::size_t head = 9 * e * c + c;
  const std::size_t up = 4 * e * e + e;
  return conv_in + 7 * conv_mid + 2 * head + 2 * up;
}

std::size_t fcn_estimator_param_count(int in_channels, int width) {
  const std::size_t c = in_channels;
  const std::size_t f = width;
  return (9 * c * f + f) + 3 * (9 * f * f + f) + (9 * f * c + c);
}

int fcn_width_matching(int in_channels, int unet_width) {
  const auto target = static_cast<long long>(unet_estimator_param_count(in_channels, unet_width));
  int best = 1;
  long long best_gap = -1;
  for (int w = 1; w <= 4 * unet_width; ++w) {
    const long long gap =
        std::llabs(static_cast<long long>(fcn_estimator_param_count(in_channels, w)) - target);
    if (best_gap < 0 || gap < best_gap) {
      best = w;
      best_gap = gap;
    }
  }
  return best;
}

template <typename T>
std::unique_ptr<Estimator<T>> make_estimator(EstimatorKind kind, ParamStore<T>& store,
                                             const std::string& prefix, int in_channels,
                                             int width, T slope, Rng& rng) {
  if (kind == EstimatorKind::kUnet) {
    return std::make_unique<UnetEstimator<T>>(store, prefix, in_channels, width, slope, rng);
  }
  return std::make_unique<FcnEstimator<T>>(store, prefix, in_channels,
                                           fcn_width_matching(in_channels, width), slope, rng);
}

template <typename T>
Var<T> fuse_noise_levels(Tape<T>& tape, const Var<T>& sigma4, const Var<T>& sigma1, T lambda) {
  auto up = ops::upsample_linear(tape, sigma4, 4);
  if (up->shape() != sigma1->shape()) {
    throw ShapeError("fuse_noise_levels: upsampled quarter map " + up->shape().str() +
                     " does not match full map " + sigma1->shape().str());
  }
  return ops::weighted_sum(tape, up, lambda, sigma1, T{1} - lambda);
}

template <typename T>
Reconstruction<T>::Reconstruction(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  const int levels = cfg.num_scales;
  const int cin = cfg.in_channels;
  const T slope = static_cast<T>(cfg.leaky_slope);
  const int in_conv_channels = cfg.ain_mode == AinMode::kInConcat ? 2 * cin : cin;
  in_conv_ = make_conv(store, "rec.in", Tag::kBackbone, 3, in_conv_channels, cfg.channels_at(0), rng);

  auto add_blocks = [&](int level, bool decoder) {
    for (int b = 0; b < cfg.blocks_per_scale; ++b) {
      const std::string prefix = std::string("rec.") + (decoder ? "dec" : "enc") +
                                 std::to_string(level) + "." + std::to_string(b);
      blocks_.emplace_back(store, prefix, cfg.channels_at(level), cin, cfg.ain_hidden,
                           cfg.ain_mode, slope, rng);
      block_level_.push_back(level);
      block_is_decoder_.push_back(decoder);
    }
  };
  for (int l = 0; l < levels; ++l) {
    add_blocks(l, false);
    if (l + 1 < levels) {
      down_.push_back(make_conv(store, "rec.down" + std::to_string(l), Tag::kBackbone, 3,
                                cfg.channels_at(l), cfg.channels_at(l + 1), rng));
    }
  }
  for (int l = levels - 2; l >= 0; --l) {
    up_.push_back(make_up_conv(store, "rec.up" + std::to_string(l), Tag::kBackbone,
                               cfg.channels_at(l + 1), cfg.channels_at(l), rng));
    fuse_.push_back(make_conv(store, "rec.fuse" + std::to_string(l), Tag::kBackbone, 3,
                              2 * cfg.channels_at(l), cfg.channels_at(l), rng));
    add_blocks(l, true);
  }
  last_conv_ = make_conv(store, "rec.last", Tag::kLastConv, 3, cfg.channels_at(0), cin, rng);
}

template <typename T>
Var<T> Reconstruction<T>::forward(Tape<T>& tape, const Var<T>& y, const Var<T>& sigma_hat) const {
  const int levels = cfg_.num_scales;
  const int mult = 1 << (levels - 1);
  const Shape s = y->shape();
  if (s.h % mult != 0 || s.w % mult != 0) {
    throw ShapeError("reconstruction input " + s.str() + " not a multiple of " +
                     std::to_string(mult));
  }
  if (sigma_hat->shape() != s) {
    throw ShapeError("reconstruction: noise map " + sigma_hat->shape().str() +
                     " does not match input " + s.str());
  }
  const T slope = static_cast<T>(cfg_.leaky_slope);
  auto act = [&](const Var<T>& v) { return ops::leaky_relu(tape, v, slope); };

  std::vector<Var<T>> cond(levels);
  cond[0] = sigma_hat;
  for (int l = 1; l < levels; ++l) cond[l] = ops::avg_pool(tape, sigma_hat, 1 << l);

  auto input = cfg_.ain_mode == AinMode::kInConcat ? ops::concat_channels(tape, y, sigma_hat) : y;
  auto h = act(in_conv_(tape, input));

  std::size_t bi = 0;
  std::vector<Var<T>> skips;
  for (int l = 0; l < levels; ++l) {
    for (; bi < blocks_.size() && !block_is_decoder_[bi] && block_level_[bi] == l; ++bi) {
      h = blocks_[bi].forward(tape, h, cond[l]);
    }
    if (l + 1 < levels) {
      skips.push_back(h);
      h = act(down_[l](tape, ops::avg_pool(tape, h, 2)));
    }
  }
  for (int l = levels - 2, j = 0; l >= 0; --l, ++j) {
    h = up_[j](tape, h);
    h = act(fuse_[j](tape, ops::concat_channels(tape, h, skips[l])));
    for (; bi < blocks_.size() && block_level_[bi] == l; ++bi) {
      h = blocks_[bi].forward(tape, h, cond[l]);
    }
  }
  auto out = last_conv_(tape, h);
  if (cfg_.residual_output) out = ops::add(tape, out, y);
  return out;
}

template <typename T>
Aindnet<T>::Aindnet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const T slope = static_cast<T>(cfg_.leaky_slope);
  estimator_ = make_estimator<T>(cfg_.estimator, store_, "est", cfg_.in_channels,
                                 cfg_.estimator_channels, slope, rng);
  reconstruction_ = std::make_unique<Reconstruction<T>>(store_, cfg_, rng);
}

template <typename T>
AindnetOutput<T> Aindnet<T>::forward(Tape<T>& tape, const Var<T>& y) const {
  const Shape s = y->shape();
  if (s.c != cfg_.in_channels) {
    throw ShapeError("model expects " + std::to_string(cfg_.in_channels) + " channels, got " +
                     s.str());
  }
  const int mult = cfg_.size_multiple();
  const int hp = (s.h + mult - 1) / mult * mult;
  const int wp = (s.w + mult - 1) / mult * mult;
  const bool padded = hp != s.h || wp != s.w;
  auto x = padded ? ops::pad_replicate(tape, y, hp, wp) : y;

  auto est = estimator_->forward(tape, x);
  auto sigma_hat = fuse_noise_levels(tape, est.sigma4, est.sigma1, static_cast<T>(cfg_.lambda_ms));
  auto x_hat = reconstruction_->forward(tape, x, sigma_hat);
  if (!padded) return {x_hat, est.sigma1, est.sigma4, sigma_hat};
  return {ops::crop(tape, x_hat, s.h, s.w), ops::crop(tape, est.sigma1, s.h, s.w),
          ops::crop(tape, est.sigma4, (s.h + 3) / 4, (s.w + 3) / 4),
          ops::crop(tape, sigma_hat, s.h, s.w)};
}

template <typename T>
Tensor<T> Aindnet<T>::denoise(const Tensor<T>& y) const {
  Tape<T> tape(false);
  return forward(tape, make_var(y.detached())).x_hat->detached();
}

template <typename T>
StandaloneEstimator<T>::StandaloneEstimator(EstimatorKind kind, int in_channels, int width,
                                            std::uint64_t seed, T slope) {
  Rng rng(seed);
  net = make_estimator<T>(kind, store, "est", in_channels, width, slope, rng);
}

#define AIND_INSTANTIATE_MODEL(T)                                                               \
  template struct Conv<T>;                                                                      \
  template struct UpConv<T>;                                                                    \
  template Conv<T> make_conv(ParamStore<T>&, const std::string&, Tag, int, int, int, Rng&);     \
  template UpConv<T> make_up_conv(ParamStore<T>&, const std::string&, Tag, int, int, Rng&);     \
  template InstanceStats<T> instance_stats(const Tensor<T>&, T);                                \
  template Var<T> ain_apply(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&);             \
  template Var<T> ain_transform(Tape<T>&, const Var<T>&, const Var<T>&, const AinModule<T>&);   \
  template std::unique_ptr<Estimator<T>> make_estimator(EstimatorKind, ParamStore<T>&,          \
                                                        const std::string&, int, int, T, Rng&); \
  template Var<T> fuse_noise_levels(Tape<T>&, const Var<T>&, const Var<T>&, T);                 \
  template class AinModule<T>;                                                                  \
  template class AinResBlock<T>;                                                                \
  template class UnetEstimator<T>;                                                              \
  template class FcnEstimator<T>;                                                               \
  template class Reconstruction<T>;                                                             \
  template class Aindnet<T>;                                                                    \
  template struct StandaloneEstimator<T>;

AIND_INSTANTIATE_MODEL(float)
AIND_INSTANTIATE_MODEL(double)

#undef AIND_INSTANTIATE_MODEL

}  // namespace aind
