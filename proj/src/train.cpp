#include "aind/train.hpp"

#include <cmath>
#include <cstdio>

#include "aind/metrics.hpp"

namespace aind {

std::string_view mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kScratchSn: return "scratch_sn";
    case TrainMode::kScratchRn: return "scratch_rn";
    case TrainMode::kRetrainAll: return "retrain_all";
    case TrainMode::kTransfer: return "transfer";
  }
  return "?";
}

TrainMode parse_train_mode(std::string_view s) {
  for (TrainMode m : {TrainMode::kScratchSn, TrainMode::kScratchRn, TrainMode::kRetrainAll,
                      TrainMode::kTransfer}) {
    if (mode_name(m) == s) return m;
  }
  throw ConfigError("unknown training mode '" + std::string(s) + "'");
}

TagSet partition_parameters(TrainMode mode, std::optional<Tag> ablation) {
  TagSet tags = mode == TrainMode::kTransfer ? TagSet{Tag::kAin, Tag::kEstimator, Tag::kLastConv}
                                             : TagSet::all();
  if (ablation) tags.erase(*ablation);
  return tags;
}

void TrainConfig::validate() const {
  adam.validate();
  loss.validate();
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (patch_size <= 0) throw ConfigError("patch_size must be positive");
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (log_every <= 0) throw ConfigError("log_every must be positive");
  if (val_every < 0) throw ConfigError("val_every must be non-negative");
  if (freeze_ablation && *freeze_ablation == Tag::kBackbone) {
    throw ConfigError("freeze ablation must be one of ain, estimator, last_conv");
  }
}

void NoiseSpec::validate() const {
  if (awgn_sigma.lo < 0.0 || awgn_sigma.lo > awgn_sigma.hi) {
    throw ConfigError("AWGN sigma range must satisfy 0 <= lo <= hi");
  }
  domain.validate();
}

NoiseParams NoiseSpec::draw(Rng& rng) const {
  if (kind == Kind::kAwgn) {
    NoiseParams p;
    p.sigma_c = rng.uniform(awgn_sigma.lo, awgn_sigma.hi);
    p.seed = rng.next_u64();
    return p;
  }
  NoiseSampler sampler(domain, rng.next_u64());
  return sampler.next();
}

NoisyImage NoiseSpec::apply(const Tensor<float>& clean, const NoiseParams& p) const {
  if (kind == Kind::kAwgn) return sample_awgn(clean, p.sigma_c, p.seed);
  return synthesize_pair(clean, p);
}

namespace {

struct Window {
  int index;
  int y;
  int x;
  int k;  // dihedral element
};

Window draw_window(Rng& rng, std::size_t count, const std::function<Shape(int)>& shape_of,
                   int patch, bool augment) {
  Window w{};
  w.index = rng.uniform_int(0, static_cast<int>(count) - 1);
  const Shape s = shape_of(w.index);
  if (s.h < patch || s.w < patch) {
    throw ShapeError("image " + s.str() + " is smaller than the patch size " +
                     std::to_string(patch));
  }
  w.y = rng.uniform_int(0, s.h - patch);
  w.x = rng.uniform_int(0, s.w - patch);
  w.k = augment ? rng.uniform_int(0, 7) : 0;
  return w;
}

Tensor<float> take(const Tensor<float>& img, const Window& w, int patch) {
  return dihedral(crop_patch(img, 0, w.y, w.x, patch, patch), w.k);
}

}  // namespace

SyntheticPairSource::SyntheticPairSource(std::vector<Tensor<float>> clean, NoiseSpec spec)
    : clean_(std::move(clean)), spec_(std::move(spec)) {
  spec_.validate();
}

Batch SyntheticPairSource::next(Rng& rng, int batch_size, int patch_size, bool augment) {
  if (clean_.empty()) throw ConfigError("empty dataset");
  std::vector<Tensor<float>> noisy, clean, sigma;
  for (int b = 0; b < batch_size; ++b) {
    const Window w = draw_window(
        rng, clean_.size(), [this](int i) { return clean_[i].shape(); }, patch_size, augment);
    Tensor<float> patch = take(clean_[w.index], w, patch_size);
    NoisyImage ni = spec_.corrupt(patch, rng);
    noisy.push_back(std::move(ni.noisy));
    sigma.push_back(std::move(ni.sigma1));
    clean.push_back(std::move(patch));
  }
  return {make_var(stack_batch(noisy)), make_var(stack_batch(clean)), make_var(stack_batch(sigma))};
}

FixedPairSource::FixedPairSource(std::vector<ImagePair> pairs) : pairs_(std::move(pairs)) {
  for (const auto& p : pairs_) {
    if (p.noisy.shape() != p.clean.shape() ||
        (!p.sigma1.empty() && p.sigma1.shape() != p.clean.shape())) {
      throw ShapeError("pair members differ in shape");
    }
  }
}

bool FixedPairSource::has_sigma() const {
  if (pairs_.empty()) return false;
  for (const auto& p : pairs_) {
    if (p.sigma1.empty()) return false;
  }
  return true;
}

Batch FixedPairSource::next(Rng& rng, int batch_size, int patch_size, bool augment) {
  if (pairs_.empty()) throw ConfigError("empty dataset");
  const bool with_sigma = has_sigma();
  std::vector<Tensor<float>> noisy, clean, sigma;
  for (int b = 0; b < batch_size; ++b) {
    const Window w = draw_window(
        rng, pairs_.size(), [this](int i) { return pairs_[i].clean.shape(); }, patch_size, augment);
    const ImagePair& p = pairs_[w.index];
    noisy.push_back(take(p.noisy, w, patch_size));
    clean.push_back(take(p.clean, w, patch_size));
    if (with_sigma) sigma.push_back(take(p.sigma1, w, patch_size));
  }
  Batch out{make_var(stack_batch(noisy)), make_var(stack_batch(clean)), nullptr};
  if (with_sigma) out.sigma1 = make_var(stack_batch(sigma));
  return out;
}

std::vector<ImagePair> realize_pairs(const std::vector<Tensor<float>>& clean,
                                     const NoiseSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<ImagePair> out;
  out.reserve(clean.size());
  for (const auto& c : clean) {
    NoisyImage ni = spec.corrupt(c, rng);
    out.push_back({std::move(ni.noisy), c.detached(), std::move(ni.sigma1)});
  }
  return out;
}

std::string format_metric(const MetricRecord& r) {
  char buf[256];
  int n = std::snprintf(buf, sizeof buf, "step=%d loss=%.6g recon=%.6g", r.step, r.loss, r.recon);
  std::string out(buf, static_cast<std::size_t>(n));
  if (r.asymm) {
    n = std::snprintf(buf, sizeof buf, " asymm=%.6g", *r.asymm);
    out.append(buf, static_cast<std::size_t>(n));
  }
  if (r.val_psnr) {
    n = std::snprintf(buf, sizeof buf, " val_psnr=%.4f", *r.val_psnr);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

double mean_denoise_psnr(const Aindnet<float>& net, const std::vector<ImagePair>& pairs) {
  if (pairs.empty()) throw ConfigError("no evaluation pairs");
  double total = 0.0;
  for (const auto& p : pairs) total += psnr(clip01(net.denoise(p.noisy)), p.clean);
  return total / static_cast<double>(pairs.size());
}

Checkpoint train(const TrainRequest& request) {
  const TrainConfig& cfg = request.config;
  cfg.validate();
  if (request.data == nullptr || request.data->size() == 0) throw ConfigError("empty dataset");
  const bool from_init = cfg.mode == TrainMode::kRetrainAll || cfg.mode == TrainMode::kTransfer;
  if (from_init && request.init == nullptr) {
    throw ConfigError(std::string(mode_name(cfg.mode)) + " mode requires an init checkpoint");
  }
  if (request.init != nullptr && cfg.steps == 0) return *request.init;

  const bool joint = cfg.mode == TrainMode::kScratchSn;
  if (joint && !request.data->has_sigma()) {
    throw ConfigError("scratch_sn training needs noise-level ground truth");
  }

  const ModelConfig& mc = request.init != nullptr ? request.init->model : request.model;
  Aindnet<float> net(mc, mix_seed(cfg.seed, 101));
  // A scratch run with an init checkpoint resumes it, optimizer state included.
  if (request.init != nullptr) request.init->restore(net, !from_init);

  const TagSet trainable = partition_parameters(cfg.mode, cfg.freeze_ablation);
  auto& store = net.params();
  for (auto& e : store.entries()) e.value->set_requires_grad(trainable.contains(e.tag));

  Rng rng(mix_seed(cfg.seed, 202));
  for (int step = 1; step <= cfg.steps; ++step) {
    Batch batch = request.data->next(rng, cfg.batch_size, cfg.patch_size, cfg.augment);
    Tape<float> tape;
    auto out = net.forward(tape, batch.noisy);
    MetricRecord rec;
    rec.step = step;
    Var<float> loss;
    if (joint) {
      auto jl = joint_loss_sn(tape, out.x_hat, batch.clean, out.sigma1, out.sigma4, batch.sigma1,
                              cfg.loss);
      loss = jl.total;
      rec.recon = jl.recon->item();
      rec.asymm = jl.asymm->item();
    } else {
      loss = recon_loss_rn(tape, out.x_hat, batch.clean);
      rec.recon = loss->item();
    }
    rec.loss = loss->item();
    tape.backward(loss);
    adam_step(store, cfg.adam, trainable);
    store.zero_grad();

    const bool validate_now = request.validation != nullptr && cfg.val_every > 0 &&
                              (step % cfg.val_every == 0 || step == cfg.steps);
    if (validate_now) rec.val_psnr = mean_denoise_psnr(net, *request.validation);
    if (request.sink && (validate_now || step % cfg.log_every == 0 || step == cfg.steps)) {
      request.sink(rec);
    }
  }
  for (auto& e : store.entries()) e.value->set_requires_grad(true);
  return Checkpoint::capture(net, true);
}

void train_estimator(StandaloneEstimator<float>& est, PairSource& data, const TrainConfig& cfg,
                     const MetricsSink& sink, EstimatorObjective objective) {
  cfg.validate();
  if (data.size() == 0) throw ConfigError("empty dataset");
  if (!data.has_sigma()) throw ConfigError("estimator training needs noise-level ground truth");
  Rng rng(mix_seed(cfg.seed, 303));
  const TagSet all = TagSet::all();
  for (int step = 1; step <= cfg.steps; ++step) {
    Batch batch = data.next(rng, cfg.batch_size, cfg.patch_size, cfg.augment);
    Tape<float> tape;
    auto out = est.net->forward(tape, batch.noisy);
    const auto w1 = static_cast<float>(cfg.loss.w1);
    const auto w4 = static_cast<float>(cfg.loss.w4);
    auto loss = objective == EstimatorObjective::kMsL1
                    ? ms_l1_loss(tape, out.sigma1, out.sigma4, batch.sigma1, w1, w4)
                    : ms_asymm_loss(tape, out.sigma1, out.sigma4, batch.sigma1, w1, w4,
                                    static_cast<float>(cfg.loss.alpha));
    MetricRecord rec;
    rec.step = step;
    rec.loss = loss->item();
    rec.asymm = rec.loss;
    tape.backward(loss);
    adam_step(est.store, cfg.adam, all);
    est.store.zero_grad();
    if (sink && (step % cfg.log_every == 0 || step == cfg.steps)) sink(rec);
  }
}

}  // namespace aind
