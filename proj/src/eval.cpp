#include "aind/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "aind/parallel.hpp"

namespace aind {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, spec, v);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

double mean_of(const std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  return total / static_cast<double>(v.size());
}

}  // namespace

std::string format_db(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt("%.4f", v);
}

Tensor<float> self_ensemble_denoise(const ImageFn& fn, const Tensor<float>& y) {
  std::vector<double> acc(y.size(), 0.0);
  for (int k = 0; k < 8; ++k) {
    const Tensor<float> out = dihedral_inverse(fn(dihedral(y, k)), k);
    if (out.shape() != y.shape()) throw ShapeError("denoiser changed the image shape");
    auto d = out.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d[i];
  }
  Tensor<float> result(y.shape());
  auto r = result.data();
  for (std::size_t i = 0; i < acc.size(); ++i) r[i] = static_cast<float>(acc[i] / 8.0);
  return result;
}

std::vector<std::pair<double, double>> estimator_grid() {
  return {{0.08, 0.02}, {0.08, 0.04}, {0.08, 0.06}, {0.12, 0.02}, {0.12, 0.04}, {0.12, 0.06}};
}

std::vector<EstimatorCase> estimator_cases(const std::vector<Tensor<float>>& clean,
                                           const std::vector<std::pair<double, double>>& grid,
                                           Range crf_range, std::uint64_t seed) {
  if (clean.empty()) throw ConfigError("estimator evaluation needs at least one image");
  Rng rng(seed);
  std::vector<EstimatorCase> cases;
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    for (const auto& img : clean) {
      NoiseParams p;
      p.sigma_s = grid[cell].first;
      p.sigma_c = grid[cell].second;
      p.crf_gamma = rng.uniform(crf_range.lo, crf_range.hi);
      p.seed = rng.next_u64();
      NoisyImage ni = synthesize_pair(img, p);
      cases.push_back({static_cast<int>(cell), std::move(ni.noisy), std::move(ni.sigma1)});
    }
  }
  return cases;
}

std::string EstimatorAccuracy::table() const {
  std::ostringstream os;
  os << "sigma_s  sigma_c      MAE      STD\n";
  for (const auto& c : cells) {
    os << fmt("%7.3f", c.sigma_s) << "  " << fmt("%7.3f", c.sigma_c) << "  "
       << fmt("%7.4f", c.mae) << "  " << fmt("%7.4f", c.err_std) << "\n";
  }
  os << "average           " << fmt("%7.4f", avg_mae) << "  " << fmt("%7.4f", avg_std) << "\n";
  return os.str();
}

EstimatorAccuracy estimator_accuracy(const ImageFn& estimate,
                                     const std::vector<EstimatorCase>& cases,
                                     const std::vector<std::pair<double, double>>& grid) {
  if (!estimate) throw StateError("no estimator to evaluate");
  if (grid.empty()) throw ConfigError("empty estimator grid");
  std::vector<double> sum(grid.size(), 0.0), sum_abs(grid.size(), 0.0), sum_sq(grid.size(), 0.0);
  std::vector<double> count(grid.size(), 0.0);
  for (const auto& c : cases) {
    if (c.cell < 0 || static_cast<std::size_t>(c.cell) >= grid.size()) {
      throw ConfigError("estimator case outside the grid");
    }
    const Tensor<float> est = estimate(c.noisy);
    if (est.shape() != c.sigma1.shape()) throw ShapeError("estimate shape differs from sigma map");
    auto e = est.data();
    auto g = c.sigma1.data();
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double d = static_cast<double>(e[i]) - static_cast<double>(g[i]);
      sum[c.cell] += d;
      sum_abs[c.cell] += std::abs(d);
      sum_sq[c.cell] += d * d;
    }
    count[c.cell] += static_cast<double>(e.size());
  }
  EstimatorAccuracy acc;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (count[i] == 0.0) throw ConfigError("estimator grid cell without cases");
    const double mean = sum[i] / count[i];
    const double var = std::max(0.0, sum_sq[i] / count[i] - mean * mean);
    acc.cells.push_back({grid[i].first, grid[i].second, sum_abs[i] / count[i], std::sqrt(var)});
    acc.avg_mae += acc.cells.back().mae;
    acc.avg_std += acc.cells.back().err_std;
  }
  acc.avg_mae /= static_cast<double>(grid.size());
  acc.avg_std /= static_cast<double>(grid.size());
  return acc;
}

ImageFn estimator_fn(const Estimator<float>& est) {
  return [&est](const Tensor<float>& y) {
    Tape<float> tape(false);
    return *est.forward(tape, make_var(y.detached())).sigma1;
  };
}

ImageFn denoiser_fn(const Aindnet<float>& net) {
  return [&net](const Tensor<float>& y) { return net.denoise(y); };
}

double EvalReport::mean_psnr() const {
  std::vector<double> v;
  for (const auto& s : images) v.push_back(s.psnr);
  return v.empty() ? 0.0 : mean_of(v);
}

double EvalReport::mean_ssim() const {
  std::vector<double> v;
  for (const auto& s : images) v.push_back(s.ssim);
  return v.empty() ? 0.0 : mean_of(v);
}

std::optional<double> EvalReport::mean_mae() const {
  std::vector<double> v;
  for (const auto& s : images) {
    if (!s.mae) return std::nullopt;
    v.push_back(*s.mae);
  }
  if (v.empty()) return std::nullopt;
  return mean_of(v);
}

std::optional<double> EvalReport::mean_err_std() const {
  std::vector<double> v;
  for (const auto& s : images) {
    if (!s.err_std) return std::nullopt;
    v.push_back(*s.err_std);
  }
  if (v.empty()) return std::nullopt;
  return mean_of(v);
}

std::string EvalReport::table() const {
  std::size_t idw = 7;
  for (const auto& s : images) idw = std::max(idw, s.id.size());
  std::ostringstream os;
  os << "# config_hash " << config_hash << "\n# seed " << seed << "\n# dataset " << dataset_id
     << "\n";
  if (!checkpoint_checksum.empty()) os << "# checkpoint " << checkpoint_checksum << "\n";
  os << pad_right("image", idw) << "  " << pad_left("PSNR", 9) << "  " << pad_left("SSIM", 7)
     << "  " << pad_left("MAE", 7) << "  " << pad_left("STD", 7) << "\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt("%.4f", *v) : std::string("-"); };
  for (const auto& s : images) {
    os << pad_right(s.id, idw) << "  " << pad_left(format_db(s.psnr), 9) << "  "
       << pad_left(fmt("%.4f", s.ssim), 7) << "  " << pad_left(opt(s.mae), 7) << "  "
       << pad_left(opt(s.err_std), 7) << "\n";
  }
  os << pad_right("average", idw) << "  " << pad_left(format_db(mean_psnr()), 9) << "  "
     << pad_left(fmt("%.4f", mean_ssim()), 7) << "  " << pad_left(opt(mean_mae()), 7) << "  "
     << pad_left(opt(mean_err_std()), 7) << "\n";
  return os.str();
}

std::string EvalReport::tsv() const {
  std::ostringstream os;
  auto opt = [](const std::optional<double>& v) { return v ? fmt("%.17g", *v) : std::string(""); };
  os << "image\tpsnr\tssim\tmae\terr_std\tconfig_hash\tseed\tdataset\n";
  auto line = [&](const std::string& id, double p, double s, const std::optional<double>& m,
                  const std::optional<double>& e) {
    os << id << "\t" << (std::isinf(p) ? std::string("inf") : fmt("%.17g", p)) << "\t"
       << fmt("%.17g", s) << "\t" << opt(m) << "\t" << opt(e) << "\t" << config_hash << "\t"
       << seed << "\t" << dataset_id << "\n";
  };
  for (const auto& s : images) line(s.id, s.psnr, s.ssim, s.mae, s.err_std);
  line("average", mean_psnr(), mean_ssim(), mean_mae(), mean_err_std());
  return os.str();
}

EvalReport evaluate_pairs(const Aindnet<float>* net, const std::vector<ImagePair>& pairs,
                          const std::vector<std::string>& ids, const EvalOptions& opts) {
  if (pairs.empty()) throw ConfigError("nothing to evaluate");
  if (ids.size() != pairs.size()) throw ConfigError("one id per image is required");
  EvalReport report;
  report.seed = opts.seed;
  report.dataset_id = opts.dataset_id;
  if (net != nullptr) report.config_hash = config_hash(net->config());
  report.images.resize(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const ImagePair& p = pairs[i];
    if (p.clean.empty()) throw ConfigError("image " + ids[i] + " has no clean reference");
    Tensor<float> out;
    if (net == nullptr) {
      out = p.noisy.detached();
    } else if (opts.ensemble) {
      out = self_ensemble_denoise(denoiser_fn(*net), p.noisy);
    } else {
      out = net->denoise(p.noisy);
    }
    out = clip01(out);
    ImageScore s;
    s.id = ids[i];
    s.psnr = psnr(out, p.clean);
    s.ssim = ssim(out, p.clean);
    if (net != nullptr && !p.sigma1.empty()) {
      const Tensor<float> est = estimator_fn(net->estimator())(p.noisy);
      double sum = 0.0, sum_abs = 0.0, sum_sq = 0.0;
      auto e = est.data();
      auto g = p.sigma1.data();
      for (std::size_t j = 0; j < e.size(); ++j) {
        const double d = static_cast<double>(e[j]) - static_cast<double>(g[j]);
        sum += d;
        sum_abs += std::abs(d);
        sum_sq += d * d;
      }
      const double n = static_cast<double>(e.size());
      s.mae = sum_abs / n;
      s.err_std = std::sqrt(std::max(0.0, sum_sq / n - (sum / n) * (sum / n)));
    }
    report.images[i] = std::move(s);
  });
  return report;
}

std::optional<double> FewshotTable::lookup(TrainMode mode, int k) const {
  for (const auto& r : rows) {
    if (r.mode == mode && r.k == k) return r.psnr;
  }
  return std::nullopt;
}

std::string FewshotTable::table() const {
  std::vector<int> ks;
  std::vector<TrainMode> modes;
  for (const auto& r : rows) {
    if (std::find(ks.begin(), ks.end(), r.k) == ks.end()) ks.push_back(r.k);
    if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) modes.push_back(r.mode);
  }
  std::ostringstream os;
  os << "# config_hash " << config_hash << "\n# seed " << seed << "\n";
  os << pad_right("mode \\ k", 12);
  for (int k : ks) os << "  " << pad_left(std::to_string(k), 8);
  os << "\n";
  for (TrainMode m : modes) {
    os << pad_right(std::string(mode_name(m)), 12);
    for (int k : ks) {
      std::string cell = "-";
      for (const auto& r : rows) {
        if (r.mode == m && r.k == k && r.psnr) cell = fmt("%.2f", *r.psnr);
      }
      os << "  " << pad_left(cell, 8);
    }
    os << "\n";
  }
  return os.str();
}

std::string FewshotTable::tsv() const {
  std::ostringstream os;
  os << "mode\tk\tpsnr\tconfig_hash\tseed\n";
  for (const auto& r : rows) {
    os << mode_name(r.mode) << "\t" << r.k << "\t" << (r.psnr ? fmt("%.17g", *r.psnr) : "") << "\t"
       << config_hash << "\t" << seed << "\n";
  }
  return os.str();
}

FewshotTable fewshot_transfer_experiment(const FewshotRequest& request) {
  if (request.source == nullptr) throw ConfigError("few-shot experiment needs a source checkpoint");
  if (request.test_clean.empty()) throw ConfigError("few-shot experiment needs held-out images");
  for (int k : request.ks) {
    if (k < 0) throw ConfigError("k must be non-negative");
    if (static_cast<std::size_t>(k) > request.pool_clean.size()) {
      throw ConfigError("k=" + std::to_string(k) + " exceeds the " +
                        std::to_string(request.pool_clean.size()) + " available target pairs");
    }
  }
  const auto pool = realize_pairs(request.pool_clean, request.target, mix_seed(request.seed, 1));
  const auto test = realize_pairs(request.test_clean, request.target, mix_seed(request.seed, 2));

  FewshotTable table;
  table.config_hash = request.source->config_hash();
  table.seed = request.seed;
  const Aindnet<float> source_net = request.source->instantiate();
  const double source_psnr = mean_denoise_psnr(source_net, test);

  for (TrainMode mode : request.modes) {
    if (mode == TrainMode::kScratchSn) throw ConfigError("few-shot modes exclude scratch_sn");
    for (int k : request.ks) {
      FewshotRow row{mode, k, std::nullopt};
      if (k == 0) {
        if (mode != TrainMode::kScratchRn) row.psnr = source_psnr;
      } else {
        FixedPairSource data(std::vector<ImagePair>(pool.begin(), pool.begin() + k));
        TrainRequest tr;
        tr.data = &data;
        tr.config = request.train;
        tr.config.mode = mode;
        tr.config.seed = mix_seed(request.seed, 1000 + static_cast<std::uint64_t>(k));
        tr.model = request.source->model;
        tr.init = mode == TrainMode::kScratchRn ? nullptr : request.source;
        const Checkpoint trained = train(tr);
        row.psnr = mean_denoise_psnr(trained.instantiate(), test);
      }
      table.rows.push_back(row);
    }
  }
  return table;
}

}  // namespace aind
