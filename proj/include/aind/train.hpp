#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aind/checkpoint.hpp"
#include "aind/losses.hpp"
#include "aind/model.hpp"
#include "aind/noise.hpp"
#include "aind/optim.hpp"
#include "aind/rng.hpp"

namespace aind {

enum class TrainMode {
  kScratchSn,   // synthetic pairs with noise-level ground truth, joint loss
  kScratchRn,   // fixed pairs, reconstruction loss only, random init
  kRetrainAll,  // fixed pairs, reconstruction loss, all parameters from init
  kTransfer,    // fixed pairs, reconstruction loss, ain/estimator/last_conv from init
};

std::string_view mode_name(TrainMode mode);
TrainMode parse_train_mode(std::string_view s);

// Tags updated in a given mode. `ablation` drops one tag from the result.
TagSet partition_parameters(TrainMode mode, std::optional<Tag> ablation = std::nullopt);

struct TrainConfig {
  TrainMode mode = TrainMode::kScratchSn;
  AdamConfig adam;
  int batch_size = 8;
  int patch_size = 32;
  int steps = 1000;
  LossWeights loss;
  bool augment = true;  // random flips and quarter turns
  int log_every = 50;
  int val_every = 500;  // 0 disables periodic validation
  std::uint64_t seed = 1;
  std::optional<Tag> freeze_ablation;

  void validate() const;
};

// How synthetic pairs are corrupted.
struct NoiseSpec {
  enum class Kind { kAwgn, kHeteroscedastic };
  Kind kind = Kind::kHeteroscedastic;
  Range awgn_sigma{25.0 / 255.0, 25.0 / 255.0};
  NoiseDomain domain = default_source_domain();

  void validate() const;
  // AWGN draws are reported as sigma_c with sigma_s = 0 and a linear response.
  NoiseParams draw(Rng& rng) const;
  NoisyImage apply(const Tensor<float>& clean, const NoiseParams& p) const;
  NoisyImage corrupt(const Tensor<float>& clean, Rng& rng) const { return apply(clean, draw(rng)); }
};

struct Batch {
  Var<float> noisy;
  Var<float> clean;
  Var<float> sigma1;  // null when the source has no noise-level ground truth
};

class PairSource {
 public:
  virtual ~PairSource() = default;
  virtual Batch next(Rng& rng, int batch_size, int patch_size, bool augment) = 0;
  virtual std::size_t size() const = 0;
  virtual bool has_sigma() const = 0;
};

// Clean images corrupted on the fly; every draw is a new noise realization.
class SyntheticPairSource final : public PairSource {
 public:
  SyntheticPairSource(std::vector<Tensor<float>> clean, NoiseSpec spec);
  Batch next(Rng& rng, int batch_size, int patch_size, bool augment) override;
  std::size_t size() const override { return clean_.size(); }
  bool has_sigma() const override { return true; }

 private:
  std::vector<Tensor<float>> clean_;
  NoiseSpec spec_;
};

struct ImagePair {
  Tensor<float> noisy;
  Tensor<float> clean;
  Tensor<float> sigma1;  // may be empty
};

// A fixed set of realized pairs; crops are drawn at the same window of both.
class FixedPairSource final : public PairSource {
 public:
  explicit FixedPairSource(std::vector<ImagePair> pairs);
  Batch next(Rng& rng, int batch_size, int patch_size, bool augment) override;
  std::size_t size() const override { return pairs_.size(); }
  bool has_sigma() const override;

 private:
  std::vector<ImagePair> pairs_;
};

// Realizes one noisy version of every clean image.
std::vector<ImagePair> realize_pairs(const std::vector<Tensor<float>>& clean,
                                     const NoiseSpec& spec, std::uint64_t seed);

struct MetricRecord {
  int step = 0;
  double loss = 0.0;
  double recon = 0.0;
  std::optional<double> asymm;
  std::optional<double> val_psnr;
};

// "step=100 loss=0.031 recon=0.029 asymm=0.041 val_psnr=28.4100"
std::string format_metric(const MetricRecord& r);

using MetricsSink = std::function<void(const MetricRecord&)>;

// Mean PSNR of the clipped single-pass output over the pairs.
double mean_denoise_psnr(const Aindnet<float>& net, const std::vector<ImagePair>& pairs);

struct TrainRequest {
  PairSource* data = nullptr;
  TrainConfig config;
  ModelConfig model;                  // used when there is no init checkpoint
  const Checkpoint* init = nullptr;   // required for retrain_all and transfer
  const std::vector<ImagePair>* validation = nullptr;
  MetricsSink sink;
};

// sample -> forward -> loss -> backward -> Adam on the trainable partition.
// The joint loss is used in scratch_sn mode, the reconstruction loss
// otherwise. Deterministic for a given seed.
Checkpoint train(const TrainRequest& request);

enum class EstimatorObjective { kMsAsymm, kMsL1 };

// Estimator-only training. kMsL1 is the plain regression used when the
// estimators themselves are being compared.
void train_estimator(StandaloneEstimator<float>& est, PairSource& data, const TrainConfig& cfg,
                     const MetricsSink& sink = {},
                     EstimatorObjective objective = EstimatorObjective::kMsAsymm);

}  // namespace aind
