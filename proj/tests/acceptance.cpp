// Acceptance gates. Each criterion prints exactly one line:
//   criterion <n> PASS|FAIL <summary>
// Run one with --criterion N, or all of them without arguments.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aind/checkpoint.hpp"
#include "aind/commands.hpp"
#include "aind/eval.hpp"
#include "aind/losses.hpp"
#include "aind/metrics.hpp"
#include "aind/model.hpp"
#include "aind/noise.hpp"
#include "aind/train.hpp"
#include "support/model_gradcheck.hpp"
#include "support/op_gradcheck.hpp"
#include "support/tempdir.hpp"

namespace {

using namespace aind;
namespace fs = std::filesystem;

struct Verdict {
  bool pass = false;
  std::string summary;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<Tensor<float>> scenes(std::uint64_t first, int count, int h, int w) {
  std::vector<Tensor<float>> out;
  for (int i = 0; i < count; ++i) out.push_back(make_scene(first + static_cast<std::uint64_t>(i), h, w, 3));
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// 1. Central-difference checks in double precision over five seeds.
Verdict gradient_oracle() {
  constexpr double kTol = 1e-4;
  double worst = 0.0;
  std::string where;
  auto note = [&](double err, const std::string& what) {
    if (err > worst) {
      worst = err;
      where = what;
    }
  };
  for (const auto& op : testing::op_names()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) note(testing::op_grad_error<double>(op, seed, 1e-5), op);
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    note(testing::resblock_grad_check(seed).worst(), "ain_resblock");
    const auto r = testing::micro_model_grad_check(seed, 6);
    note(r.worst(), "micro_model:" + r.worst_name());
  }
  return {worst <= kTol, std::to_string(testing::op_names().size()) + " ops + resblock + micro model, 5 seeds; worst rel err " +
                             fmt("%.3g", worst) + " (" + where + ") <= 1e-4"};
}

// Broadcasts one value per (image, channel) over the spatial grid.
Var<float> channel_map(Shape s, const std::vector<float>& per_channel) {
  Tensor<float> t(s);
  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        for (int c = 0; c < s.c; ++c) t.at(n, y, x, c) = per_channel[static_cast<std::size_t>(n * s.c + c)];
      }
    }
  }
  return make_var(std::move(t));
}

// 2. Instance statistics fed back as the affine parameters reproduce the input.
Verdict ain_identity() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const Shape s{2, 16, 16, 8};
    auto h = make_var(testing::random_tensor<float>(s, rng, -2.0, 3.0));
    const auto st = instance_stats(*h);
    std::vector<float> sd(st.var.size());
    for (std::size_t i = 0; i < sd.size(); ++i) sd[i] = std::sqrt(st.var[i]);
    Tape<float> tape(false);
    const auto out = ain_apply(tape, h, channel_map(s, sd), channel_map(s, st.mean));
    for (std::size_t i = 0; i < h->size(); ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(out->data()[i] - h->data()[i])));
    }
  }
  return {worst <= 1e-4, "max |AIN(h; sigma_c, mu_c) - h| = " + fmt("%.3g", worst) + " <= 1e-4 over 5 seeds"};
}

// 3. Hand-computed asymmetric penalties at |error| = 0.2, alpha = 0.25.
Verdict asymm_exactness() {
  Tape<double> tape(false);
  auto map = [](double v) { return constant<double>({1, 1, 1, 1}, v); };
  const double over = asymm_loss_single(tape, map(0.5), map(0.3), 0.25)->item();
  const double under = asymm_loss_single(tape, map(0.1), map(0.3), 0.25)->item();
  const double ratio = under / over;
  const bool pass = std::abs(over - 0.01) <= 1e-15 && std::abs(under - 0.03) <= 1e-15 &&
                    std::abs(ratio - 3.0) <= 1e-12;
  return {pass, "over " + fmt("%.17g", over) + ", under " + fmt("%.17g", under) + ", ratio " + fmt("%.15g", ratio)};
}

double sample_std(const std::vector<double>& v) {
  double m = mean(v), s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// 4. Empirical noise statistics against the closed forms.
Verdict noise_oracle() {
  const std::vector<float> levels{0.1f, 0.3f, 0.5f, 0.7f, 0.9f};
  double worst_linear = 0.0;
  int draw = 0;
  for (auto [ss, sc] : estimator_grid()) {
    for (float x : levels) {
      NoiseParams p;
      p.sigma_s = ss;
      p.sigma_c = sc;
      p.seed = static_cast<std::uint64_t>(1000 + draw++);
      const Tensor<float> clean(Shape{1, 250, 400, 1}, x);
      const auto out = sample_heteroscedastic(clean, p);
      std::vector<double> diff(clean.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = out.noisy_linear.data()[i] - x;
      const double expect = std::sqrt(x * ss * ss + sc * sc);
      worst_linear = std::max(worst_linear, std::abs(sample_std(diff) - expect) / expect);
    }
  }

  double worst_crf = 0.0;
  const int n = 10000;
  for (auto [ss, sc] : estimator_grid()) {
    for (float x : {0.3f, 0.5f, 0.8f}) {
      NoiseParams p;
      p.sigma_s = ss;
      p.sigma_c = sc;
      p.crf_gamma = 2.2;
      const Tensor<float> clean(Shape{1, 1, 1, 1}, x);
      const double predicted = synthesize_pair(clean, p).sigma1.data()[0];
      std::vector<double> out(n);
      for (int i = 0; i < n; ++i) {
        p.seed = static_cast<std::uint64_t>(50000 + draw * n + i);
        out[static_cast<std::size_t>(i)] = synthesize_pair(clean, p).noisy.data()[0];
      }
      ++draw;
      const double mc = sample_std(out);
      worst_crf = std::max(worst_crf, std::abs(predicted - mc) / mc);
    }
  }
  const bool pass = worst_linear <= 0.02 && worst_crf <= 0.05;
  return {pass, "linear std worst rel err " + fmt("%.4f", worst_linear) +
                    " <= 0.02 (6 pairs x 5 levels, 1e5 samples); CRF 2.2 propagation worst rel err " +
                    fmt("%.4f", worst_crf) + " <= 0.05 (6 pairs at sRGB 0.3/0.5/0.8, 1e4 realizations)"};
}

TrainConfig toy_train(int steps, double lr, std::uint64_t seed) {
  TrainConfig c;
  c.steps = steps;
  c.batch_size = 8;
  c.patch_size = 32;
  c.adam.lr = lr;
  c.val_every = 0;
  c.log_every = std::max(1, steps);
  c.seed = seed;
  return c;
}

NoiseSpec awgn_spec(double sigma) {
  NoiseSpec n;
  n.kind = NoiseSpec::Kind::kAwgn;
  n.awgn_sigma = {sigma, sigma};
  return n;
}

NoiseSpec domain_spec(const NoiseDomain& d) {
  NoiseSpec n;
  n.kind = NoiseSpec::Kind::kHeteroscedastic;
  n.domain = d;
  return n;
}

Checkpoint train_source(const NoiseSpec& noise, int steps, std::uint64_t seed) {
  SyntheticPairSource data(scenes(100, 32, 64, 64), noise);
  TrainRequest req;
  req.data = &data;
  req.config = toy_train(steps, 1e-3, seed);
  req.config.mode = TrainMode::kScratchSn;
  req.model = micro_config();
  return train(req);
}

// 5. Transfer leaves the backbone untouched and moves every other group.
Verdict transfer_partition() {
  const Checkpoint source = train_source(domain_spec(default_source_domain()), 30, 5);
  FixedPairSource target(realize_pairs(scenes(700, 8, 64, 64), domain_spec(default_target_domain()), 9));
  TrainRequest req;
  req.data = &target;
  req.config = toy_train(100, 1e-3, 6);
  req.config.mode = TrainMode::kTransfer;
  req.init = &source;
  req.model = source.model;
  const Checkpoint after = train(req);

  auto changed = [&](Tag tag) {
    int n = 0;
    for (std::size_t i = 0; i < after.params.size(); ++i) {
      if (after.params[i].tag == tag && after.params[i].value.storage() != source.params[i].value.storage()) ++n;
    }
    return n;
  };
  const bool backbone_same = after.tag_digest(Tag::kBackbone) == source.tag_digest(Tag::kBackbone);
  const int ain = changed(Tag::kAin), est = changed(Tag::kEstimator), last = changed(Tag::kLastConv);
  const bool pass = backbone_same && ain > 0 && est > 0 && last > 0;
  return {pass, std::string("backbone digest ") + (backbone_same ? "identical" : "CHANGED") +
                    " after 100 steps; changed tensors ain=" + std::to_string(ain) +
                    " estimator=" + std::to_string(est) + " last_conv=" + std::to_string(last)};
}

double mean_psnr(const Aindnet<float>& net, const std::vector<ImagePair>& pairs, bool noisy_only = false) {
  std::vector<double> v;
  for (const auto& p : pairs) v.push_back(psnr(clip01(noisy_only ? p.noisy : net.denoise(p.noisy)), p.clean));
  return mean(v);
}

// 6. Micro model on AWGN sigma = 25.
Verdict toy_denoising() {
  const Checkpoint ck = train_source(awgn_spec(25.0 / 255.0), 2000, 21);
  const Aindnet<float> net = ck.instantiate();
  const auto test = realize_pairs(scenes(9000, 8, 64, 64), awgn_spec(25.0 / 255.0), 77);
  const double noisy = mean_psnr(net, test, true);
  const double out = mean_psnr(net, test);
  const std::size_t params = net.params().num_scalars();
  const bool pass = params <= 200000 && out >= noisy + 3.0;
  return {pass, std::to_string(params) + " params, 2000 steps of 32x32 patches; held-out PSNR " + fmt("%.2f", out) +
                    " dB vs noisy " + fmt("%.2f", noisy) + " dB (gain " + fmt("%.2f", out - noisy) + " >= 3)"};
}

// 7. Few-shot transfer beats scratch training on the shifted domain.
Verdict fewshot_trend() {
  const Checkpoint source = train_source(domain_spec(default_source_domain()), 2000, 31);
  FewshotRequest req;
  req.source = &source;
  req.pool_clean = scenes(3000, 4, 64, 64);
  req.test_clean = scenes(4000, 8, 64, 64);
  req.target = domain_spec(default_target_domain());
  req.ks = {0, 1, 4};
  req.modes = {TrainMode::kScratchRn, TrainMode::kRetrainAll, TrainMode::kTransfer};
  req.train = toy_train(400, 1e-3, 0);
  req.seed = 33;
  const FewshotTable t = fewshot_transfer_experiment(req);
  std::fputs(t.table().c_str(), stderr);
  const auto tf0 = t.lookup(TrainMode::kTransfer, 0);
  const auto tf1 = t.lookup(TrainMode::kTransfer, 1);
  const auto tf4 = t.lookup(TrainMode::kTransfer, 4);
  const auto sc1 = t.lookup(TrainMode::kScratchRn, 1);
  const auto sc4 = t.lookup(TrainMode::kScratchRn, 4);
  if (!tf0 || !tf1 || !tf4 || !sc1 || !sc4) return {false, "missing few-shot rows"};
  const bool pass = *tf1 >= *sc1 + 0.5 && *tf4 >= *sc4 + 0.5 && *tf0 > *sc1;
  return {pass, "transfer k0/k1/k4 " + fmt("%.2f", *tf0) + "/" + fmt("%.2f", *tf1) + "/" + fmt("%.2f", *tf4) +
                    " dB; scratch k1/k4 " + fmt("%.2f", *sc1) + "/" + fmt("%.2f", *sc4) +
                    " dB (margins " + fmt("%.2f", *tf1 - *sc1) + ", " + fmt("%.2f", *tf4 - *sc4) + " >= 0.5)"};
}

// 8. U-Net estimator against the five-conv FCN of matched size.
Verdict estimator_ordering() {
  const int width = 16;
  SyntheticPairSource data(scenes(100, 32, 64, 64), domain_spec(default_source_domain()));
  const auto cases = estimator_cases(scenes(5000, 8, 64, 64), estimator_grid(), default_source_domain().crf_gamma, 77);
  std::map<EstimatorKind, std::pair<double, std::size_t>> result;
  for (EstimatorKind kind : {EstimatorKind::kUnet, EstimatorKind::kFcn}) {
    StandaloneEstimator<float> est(kind, 3, width, 41);
    train_estimator(est, data, toy_train(5000, 1e-3, 42), {}, EstimatorObjective::kMsL1);
    const auto acc = estimator_accuracy(estimator_fn(*est.net), cases, estimator_grid());
    std::fputs(acc.table().c_str(), stderr);
    result[kind] = {acc.avg_mae, est.store.num_scalars()};
  }
  const auto [unet, unet_params] = result[EstimatorKind::kUnet];
  const auto [fcn, fcn_params] = result[EstimatorKind::kFcn];
  const bool pass = unet < fcn && unet <= 0.05;
  return {pass, "avg MAE U-Net " + fmt("%.4f", unet) + " (" + std::to_string(unet_params) + " params) vs FCN " +
                    fmt("%.4f", fcn) + " (" + std::to_string(fcn_params) + " params); U-Net must be lower and <= 0.05"};
}

// 9. Geometric self-ensemble does not hurt and runs eight forwards.
Verdict ensemble_non_degradation() {
  const Checkpoint ck = train_source(awgn_spec(25.0 / 255.0), 600, 51);
  const Aindnet<float> net = ck.instantiate();
  const auto test = realize_pairs(scenes(9100, 6, 48, 64), awgn_spec(25.0 / 255.0), 52);
  std::vector<double> single, ensemble;
  bool eight = true;
  for (const auto& p : test) {
    int calls = 0;
    const ImageFn base = denoiser_fn(net);
    const ImageFn counted = [&](const Tensor<float>& y) {
      ++calls;
      return base(y);
    };
    single.push_back(psnr(clip01(net.denoise(p.noisy)), p.clean));
    ensemble.push_back(psnr(clip01(self_ensemble_denoise(counted, p.noisy)), p.clean));
    eight = eight && calls == 8;
  }
  const double s = mean(single), e = mean(ensemble);
  return {eight && e >= s - 0.01, "ensemble " + fmt("%.4f", e) + " dB vs single " + fmt("%.4f", s) +
                                      " dB on 48x64 images; forwards per image " + (eight ? "8" : "NOT 8")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10. Two full synthesize -> train -> eval runs are byte-identical.
Verdict determinism() {
  testing::TempDir dir("accept10");
  const std::string config = R"({"seed": 61, "model": {"base_channels": 8, "num_scales": 3, "blocks_per_scale": 1,
      "estimator_channels": 8, "ain_hidden": 8},
      "train": {"steps": 40, "batch_size": 4, "patch_size": 32, "log_every": 10, "val_every": 20},
      "data": {"procedural_count": 10, "procedural_size": 48, "val_count": 2}})";
  std::ofstream(dir / "run.json") << config;
  std::ostringstream log;
  for (const char* run : {"a", "b"}) {
    CommandOptions o;
    o.config = dir / "run.json";
    o.out = dir / run / "data";
    cmd_synthesize(o, log);
    std::ofstream(dir / run / "train.json")
        << R"({"seed": 61, "model": {"base_channels": 8, "num_scales": 3, "blocks_per_scale": 1,
      "estimator_channels": 8, "ain_hidden": 8},
      "train": {"steps": 40, "batch_size": 4, "patch_size": 32, "log_every": 10, "val_every": 20},
      "data": {"dataset_dir": ")" + (dir / run / "data").string() + R"(", "val_count": 2}})";
    o.config = dir / run / "train.json";
    o.out = dir / run / "model";
    cmd_train(o, log);
    CommandOptions e;
    e.init = dir / run / "model" / kCheckpointFile;
    e.out = dir / run / "eval";
    e.inputs = {(dir / run / "data").string()};
    cmd_eval(e, log);
  }
  const bool data_same = slurp(dir / "a" / "data" / "manifest.json") == slurp(dir / "b" / "data" / "manifest.json");
  const bool ck_same = slurp(dir / "a" / "model" / kCheckpointFile) == slurp(dir / "b" / "model" / kCheckpointFile);
  const bool metrics_same = slurp(dir / "a" / "model" / "metrics.log") == slurp(dir / "b" / "model" / "metrics.log");
  const bool report_same = slurp(dir / "a" / "eval" / "report.tsv") == slurp(dir / "b" / "eval" / "report.tsv") &&
                           slurp(dir / "a" / "eval" / "report.txt") == slurp(dir / "b" / "eval" / "report.txt");
  const std::string checksum = Checkpoint::load(dir / "a" / "model" / kCheckpointFile).checksum();
  auto word = [](bool b) { return b ? "identical" : "DIFFER"; };
  return {data_same && ck_same && metrics_same && report_same,
          std::string("datasets ") + word(data_same) + ", checkpoints " + word(ck_same) + " (sha256 " +
              checksum.substr(0, 16) + "), metrics " + word(metrics_same) + ", reports " + word(report_same)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient oracle", gradient_oracle},
      {"AIN identity recovery", ain_identity},
      {"asymmetric loss exactness", asymm_exactness},
      {"noise-model oracle", noise_oracle},
      {"transfer partition", transfer_partition},
      {"toy end-to-end denoising", toy_denoising},
      {"few-shot transfer trend", fewshot_trend},
      {"estimator ordering", estimator_ordering},
      {"self-ensemble non-degradation", ensemble_non_degradation},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (only != 0 && only != n) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %s %s: %s [%.1fs]\n", n, v.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                v.summary.c_str(), secs);
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
