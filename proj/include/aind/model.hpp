#pragma once

// AINDNet: a U-Net noise-level estimator whose full- and quarter-resolution
// outputs are fused into a conditioning map, and a U-Net reconstruction
// network built from residual blocks whose normalization layers are
// modulated pixel-wise by that map (adaptive instance normalization).

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "aind/params.hpp"
#include "aind/rng.hpp"
#include "aind/tape.hpp"
#include "aind/tensor.hpp"

namespace aind {

inline constexpr double kAinEpsilon = 1e-5;

enum class AinMode {
  kAdaptive,  // gamma/beta generated pixel-wise from the noise map
  kInConcat,  // ablation: learned per-channel gamma/beta, noise map concatenated to the input
};

enum class EstimatorKind { kUnet, kFcn };

struct ModelConfig {
  int in_channels = 3;  // 3 color, 1 grayscale; output has the same count
  int base_channels = 16;
  int num_scales = 3;  // scales 1, 1/2, 1/4
  int blocks_per_scale = 2;
  int estimator_channels = 16;
  int ain_hidden = 16;  // width of the shared conv in each AIN generator
  double lambda_ms = 0.8;
  double leaky_slope = 0.2;
  bool residual_output = false;
  AinMode ain_mode = AinMode::kAdaptive;
  EstimatorKind estimator = EstimatorKind::kUnet;

  void validate() const;
  int channels_at(int level) const { return base_channels << level; }
  // Spatial size multiple the network pads inputs to.
  int size_multiple() const;
  bool operator==(const ModelConfig&) const = default;
};

// Full-size configuration (64 base channels, 32-channel estimator).
ModelConfig full_scale_config();
// Small configuration used by the desk-scale training experiments.
ModelConfig micro_config();

template <typename T>
struct Conv {
  Var<T> weight;
  Var<T> bias;
  int stride = 1;
  int pad = 1;
  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const;
};

template <typename T>
struct UpConv {
  Var<T> weight;
  Var<T> bias;
  int stride = 2;
  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const;
};

// Registers a k x k conv with He-normal weights and zero bias.
template <typename T>
Conv<T> make_conv(ParamStore<T>& store, const std::string& name, Tag tag, int k, int cin, int cout,
                  Rng& rng);
template <typename T>
UpConv<T> make_up_conv(ParamStore<T>& store, const std::string& name, Tag tag, int cin, int cout,
                       Rng& rng);

// Per-sample, per-channel mean and variance (+ epsilon), indexed n * C + c.
template <typename T>
struct InstanceStats {
  std::vector<T> mean;
  std::vector<T> var;
};

template <typename T>
InstanceStats<T> instance_stats(const Tensor<T>& h, T eps = static_cast<T>(kAinEpsilon));

// gamma * (h - mu) / sigma + beta with channel statistics of h.
template <typename T>
Var<T> ain_apply(Tape<T>& tape, const Var<T>& h, const Var<T>& gamma, const Var<T>& beta);

template <typename T>
class AinModule {
 public:
  struct Affine {
    Var<T> gamma;
    Var<T> beta;
  };

  AinModule(ParamStore<T>& store, const std::string& prefix, int cond_channels, int hidden,
            int channels, AinMode mode, T slope, Rng& rng);

  // gamma*/beta* for a conditioning map already at the feature map's scale.
  Affine generate(Tape<T>& tape, const Var<T>& cond) const;
  Var<T> forward(Tape<T>& tape, const Var<T>& h, const Var<T>& cond) const;

  AinMode mode() const { return mode_; }
  int channels() const { return channels_; }

 private:
  AinMode mode_;
  int channels_;
  T slope_;
  Conv<T> shared_;
  Conv<T> gamma_head_;
  Conv<T> beta_head_;
  Var<T> gamma_const_;
  Var<T> beta_const_;
};

// Average-pools the full-resolution noise map to h's scale, then applies the
// module. Throws ShapeError when the scales are not an integer ratio.
template <typename T>
Var<T> ain_transform(Tape<T>& tape, const Var<T>& h, const Var<T>& sigma_hat,
                     const AinModule<T>& module);

// h + AIN2(conv2(act(AIN1(conv1(h))))).
template <typename T>
class AinResBlock {
 public:
  AinResBlock(ParamStore<T>& store, const std::string& prefix, int channels, int cond_channels,
              int hidden, AinMode mode, T slope, Rng& rng);
  Var<T> forward(Tape<T>& tape, const Var<T>& h, const Var<T>& cond) const;

  const AinModule<T>& ain1() const { return ain1_; }
  const AinModule<T>& ain2() const { return ain2_; }

 private:
  T slope_;
  Conv<T> conv1_;
  AinModule<T> ain1_;
  Conv<T> conv2_;
  AinModule<T> ain2_;
};

template <typename T>
struct EstimatorOutput {
  Var<T> sigma1;  // (N, H, W, C)
  Var<T> sigma4;  // (N, ceil(H/4), ceil(W/4), C)
};

template <typename T>
class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual EstimatorOutput<T> forward(Tape<T>& tape, const Var<T>& y) const = 0;
};

// Two convs per scale down to 1/4, where the quarter-resolution head sits;
// the decoder merges each skip by addition and applies one conv before the
// full-resolution head. Softplus outputs.
template <typename T>
class UnetEstimator final : public Estimator<T> {
 public:
  UnetEstimator(ParamStore<T>& store, const std::string& prefix, int in_channels, int width,
                T slope, Rng& rng);
  EstimatorOutput<T> forward(Tape<T>& tape, const Var<T>& y) const override;

 private:
  T slope_;
  Conv<T> enc1_, enc1b_, enc2_, enc2b_, enc3_, enc3b_, dec2_, dec1_, head4_, head1_;
  UpConv<T> up2_, up1_;
};

// Five full-resolution 3x3 convs; the quarter map is the 4x4 pool of the
// full-resolution output.
template <typename T>
class FcnEstimator final : public Estimator<T> {
 public:
  FcnEstimator(ParamStore<T>& store, const std::string& prefix, int in_channels, int width,
               T slope, Rng& rng);
  EstimatorOutput<T> forward(Tape<T>& tape, const Var<T>& y) const override;

 private:
  T slope_;
  std::vector<Conv<T>> convs_;
};

std::size_t unet_estimator_param_count(int in_channels, int width);
std::size_t fcn_estimator_param_count(int in_channels, int width);
// FCN width whose parameter count is closest to the U-Net estimator's.
int fcn_width_matching(int in_channels, int unet_width);

template <typename T>
std::unique_ptr<Estimator<T>> make_estimator(EstimatorKind kind, ParamStore<T>& store,
                                             const std::string& prefix, int in_channels,
                                             int width, T slope, Rng& rng);

// lambda * L(sigma4) + (1 - lambda) * sigma1, L = 4x half-pixel bilinear.
template <typename T>
Var<T> fuse_noise_levels(Tape<T>& tape, const Var<T>& sigma4, const Var<T>& sigma1, T lambda);

template <typename T>
class Reconstruction {
 public:
  Reconstruction(ParamStore<T>& store, const ModelConfig& cfg, Rng& rng);
  // y and sigma_hat at full resolution; H, W multiples of 2^(num_scales-1).
  Var<T> forward(Tape<T>& tape, const Var<T>& y, const Var<T>& sigma_hat) const;

  const std::vector<AinResBlock<T>>& blocks() const { return blocks_; }

 private:
  ModelConfig cfg_;
  Conv<T> in_conv_;
  std::vector<AinResBlock<T>> blocks_;
  std::vector<int> block_level_;
  std::vector<bool> block_is_decoder_;
  std::vector<Conv<T>> down_;
  std::vector<UpConv<T>> up_;
  std::vector<Conv<T>> fuse_;
  Conv<T> last_conv_;
};

template <typename T>
struct AindnetOutput {
  Var<T> x_hat;
  Var<T> sigma1;
  Var<T> sigma4;
  Var<T> sigma_hat;  // fused conditioning map
};

template <typename T>
class Aindnet {
 public:
  Aindnet(const ModelConfig& cfg, std::uint64_t seed);
  Aindnet(const Aindnet&) = delete;
  Aindnet& operator=(const Aindnet&) = delete;
  Aindnet(Aindnet&&) = default;
  Aindnet& operator=(Aindnet&&) = default;

  // Inputs of any size are replicate-padded to size_multiple() and the
  // outputs cropped back.
  AindnetOutput<T> forward(Tape<T>& tape, const Var<T>& y) const;

  // Inference convenience: no tape, returns x_hat.
  Tensor<T> denoise(const Tensor<T>& y) const;

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  const Estimator<T>& estimator() const { return *estimator_; }
  const Reconstruction<T>& reconstruction() const { return *reconstruction_; }

 private:
  ModelConfig cfg_;
  ParamStore<T> store_;
  std::unique_ptr<Estimator<T>> estimator_;
  std::unique_ptr<Reconstruction<T>> reconstruction_;
};

// Estimator with its own parameter store, for estimator-only training.
template <typename T>
struct StandaloneEstimator {
  StandaloneEstimator(EstimatorKind kind, int in_channels, int width, std::uint64_t seed,
                      T slope = static_cast<T>(0.2));
  ParamStore<T> store;
  std::unique_ptr<Estimator<T>> net;
};

extern template class AinModule<float>;
extern template class AinModule<double>;
extern template class AinResBlock<float>;
extern template class AinResBlock<double>;
extern template class UnetEstimator<float>;
extern template class UnetEstimator<double>;
extern template class FcnEstimator<float>;
extern template class FcnEstimator<double>;
extern template class Reconstruction<float>;
extern template class Reconstruction<double>;
extern template class Aindnet<float>;
extern template class Aindnet<double>;
extern template struct StandaloneEstimator<float>;
extern template struct StandaloneEstimator<double>;

}  // namespace aind
