#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aind/checkpoint.hpp"
#include "aind/metrics.hpp"
#include "aind/noise.hpp"
#include "aind/train.hpp"

namespace aind {

using ImageFn = std::function<Tensor<float>(const Tensor<float>&)>;

// Average of fn over the 8 dihedral transforms, each output mapped back.
Tensor<float> self_ensemble_denoise(const ImageFn& fn, const Tensor<float>& y);

// (sigma_s, sigma_c) grid used for estimator accuracy tables.
std::vector<std::pair<double, double>> estimator_grid();

struct EstimatorCase {
  int cell = 0;
  Tensor<float> noisy;
  Tensor<float> sigma1;
};

// One synthesized case per (grid cell, clean image). The camera response of
// each case is drawn from crf_range.
std::vector<EstimatorCase> estimator_cases(const std::vector<Tensor<float>>& clean,
                                           const std::vector<std::pair<double, double>>& grid,
                                           Range crf_range, std::uint64_t seed);

struct EstimatorCell {
  double sigma_s = 0.0;
  double sigma_c = 0.0;
  double mae = 0.0;
  double err_std = 0.0;
};

struct EstimatorAccuracy {
  std::vector<EstimatorCell> cells;
  double avg_mae = 0.0;  // mean over cells
  double avg_std = 0.0;

  std::string table() const;
};

// MAE and population STD of (estimate - sigma1) over every pixel of every
// case in a cell. `estimate` maps a noisy image to a full-resolution map.
EstimatorAccuracy estimator_accuracy(const ImageFn& estimate,
                                     const std::vector<EstimatorCase>& cases,
                                     const std::vector<std::pair<double, double>>& grid);

ImageFn estimator_fn(const Estimator<float>& est);
ImageFn denoiser_fn(const Aindnet<float>& net);

struct ImageScore {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> mae;  // estimator vs ground-truth sigma, when available
  std::optional<double> err_std;
};

struct EvalReport {
  std::string config_hash;
  std::string checkpoint_checksum;
  std::uint64_t seed = 0;
  std::string dataset_id;
  std::vector<ImageScore> images;

  // Arithmetic means of the per-image values.
  double mean_psnr() const;
  double mean_ssim() const;
  std::optional<double> mean_mae() const;
  std::optional<double> mean_err_std() const;

  std::string table() const;
  std::string tsv() const;
};

struct EvalOptions {
  bool ensemble = false;
  std::string dataset_id;
  std::uint64_t seed = 0;
};

// Scores the clipped output of `net` (or the noisy input itself when net is
// null) against the clean references.
EvalReport evaluate_pairs(const Aindnet<float>* net, const std::vector<ImagePair>& pairs,
                          const std::vector<std::string>& ids, const EvalOptions& opts);

struct FewshotRequest {
  const Checkpoint* source = nullptr;
  std::vector<Tensor<float>> pool_clean;  // target-domain training images
  std::vector<Tensor<float>> test_clean;  // held-out images
  NoiseSpec target;
  std::vector<int> ks;
  std::vector<TrainMode> modes;
  TrainConfig train;  // mode is overridden per row
  std::uint64_t seed = 0;
};

struct FewshotRow {
  TrainMode mode = TrainMode::kTransfer;
  int k = 0;
  std::optional<double> psnr;  // absent: scratch training with no data
};

struct FewshotTable {
  std::vector<FewshotRow> rows;
  std::string config_hash;
  std::uint64_t seed = 0;

  std::optional<double> lookup(TrainMode mode, int k) const;
  // Modes as rows, k as columns.
  std::string table() const;
  // One line per (mode, k).
  std::string tsv() const;
};

// Fine-tunes on the first k realized target pairs for every (mode, k) and
// scores on the held-out set. k = 0 evaluates the source model unchanged for
// retrain_all and transfer.
FewshotTable fewshot_transfer_experiment(const FewshotRequest& request);

// Formats PSNR, printing "inf" for identical images.
std::string format_db(double v);

}  // namespace aind
