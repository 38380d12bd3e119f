#include "aind/commands.hpp"

#include <fstream>
#include <ostream>

#include "aind/checkpoint.hpp"
#include "aind/dataset.hpp"
#include "aind/eval.hpp"
#include "aind/image_io.hpp"
#include "aind/parallel.hpp"

namespace aind {

namespace fs = std::filesystem;

namespace {

// Independent streams derived from the run seed.
enum Stream : std::uint64_t {
  kCleanStream = 1,
  kSynthStream = 2,
  kRealizeStream = 3,
  kValStream = 4,
  kTrainStream = 5,
  kPoolStream = 6,
  kTestStream = 7,
  kFewshotStream = 8,
};

void require_out(const CommandOptions& opts) {
  if (opts.out.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(opts.out, ec);
  if (ec) throw IoError("cannot create " + opts.out.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::optional<Checkpoint> load_init(const CommandOptions& opts) {
  if (!opts.init) return std::nullopt;
  return Checkpoint::load(*opts.init);
}

// The checkpoint's architecture wins; an explicit, different one in the
// config is an error rather than a silent override.
void adopt_architecture(RunConfig& cfg, const Checkpoint& ck) {
  if (cfg.model_given && !(cfg.model == ck.model)) {
    throw ConfigError("config model " + to_json(cfg.model).dump() +
                      " does not match checkpoint architecture " + to_json(ck.model).dump());
  }
  cfg.model = ck.model;
}

void run_training(const CommandOptions& opts, std::ostream& log, std::optional<TrainMode> forced) {
  require_out(opts);
  RunConfig cfg = resolve_config(opts);
  if (forced) cfg.train.mode = *forced;
  const std::optional<Checkpoint> init = load_init(opts);
  if (cfg.train.mode == TrainMode::kTransfer && !init) {
    throw ConfigError("transfer requires --init <checkpoint>");
  }
  if (init) adopt_architecture(cfg, *init);
  cfg.train.seed = mix_seed(cfg.seed, kTrainStream);
  cfg.validate();
  write_text(opts.out / "resolved_config.json", resolved_config_text(cfg) + "\n");

  const bool synthetic = cfg.train.mode == TrainMode::kScratchSn;
  std::vector<ImagePair> train_pairs;
  std::vector<ImagePair> val_pairs;
  std::vector<Tensor<float>> train_clean;
  if (!cfg.data.dataset_dir.empty()) {
    train_pairs = read_dataset(cfg.data.dataset_dir).pairs();
    const std::size_t nval = static_cast<std::size_t>(cfg.data.val_count);
    if (train_pairs.size() > nval) {
      val_pairs.assign(train_pairs.end() - static_cast<std::ptrdiff_t>(nval), train_pairs.end());
      train_pairs.resize(train_pairs.size() - nval);
    }
  } else {
    const int total = cfg.data.procedural_count + cfg.data.val_count;
    auto clean = load_clean_images(cfg.data.clean_dir, total, cfg.data.procedural_size,
                                   cfg.model.in_channels, mix_seed(cfg.seed, kCleanStream));
    std::vector<Tensor<float>> val_clean;
    const std::size_t nval = static_cast<std::size_t>(cfg.data.val_count);
    if (clean.size() > nval) {
      for (std::size_t i = clean.size() - nval; i < clean.size(); ++i) val_clean.push_back(clean[i].detached());
      clean.resize(clean.size() - nval);
    }
    const NoiseSpec& spec = synthetic ? cfg.noise : cfg.target_noise;
    val_pairs = realize_pairs(val_clean, spec, mix_seed(cfg.seed, kValStream));
    if (synthetic) {
      train_clean = std::move(clean);
    } else {
      train_pairs = realize_pairs(clean, spec, mix_seed(cfg.seed, kRealizeStream));
    }
  }

  std::unique_ptr<PairSource> source;
  if (!train_clean.empty()) {
    source = std::make_unique<SyntheticPairSource>(std::move(train_clean), cfg.noise);
  } else {
    source = std::make_unique<FixedPairSource>(std::move(train_pairs));
  }

  std::ofstream metrics(opts.out / "metrics.log", std::ios::trunc);
  if (!metrics) throw IoError("cannot write metrics log in " + opts.out.string());
  const TagSet trainable = partition_parameters(cfg.train.mode, cfg.train.freeze_ablation);
  const std::string header = "mode=" + std::string(mode_name(cfg.train.mode)) +
                             " trainable_tags=" + trainable.str();
  metrics << header << "\n";
  log << header << "\n";

  TrainRequest req;
  req.data = source.get();
  req.config = cfg.train;
  req.model = cfg.model;
  req.init = init ? &*init : nullptr;
  req.validation = val_pairs.empty() ? nullptr : &val_pairs;
  req.sink = [&](const MetricRecord& r) {
    const std::string line = format_metric(r);
    metrics << line << "\n";
    metrics.flush();
    log << line << "\n";
  };
  const Checkpoint ck = train(req);
  const fs::path path = opts.out / kCheckpointFile;
  ck.save(path);
  log << "checkpoint=" << path.string() << " sha256=" << Checkpoint::load(path).checksum() << "\n";
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& p : list_images(in)) out.push_back(p);
    } else {
      out.emplace_back(in);
    }
  }
  return out;
}

}  // namespace

RunConfig resolve_config(const CommandOptions& opts) {
  RunConfig cfg = opts.config ? load_run_config(*opts.config) : RunConfig{};
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.steps) cfg.train.steps = *opts.steps;
  if (opts.freeze_ablation) cfg.train.freeze_ablation = opts.freeze_ablation;
  cfg.validate();
  return cfg;
}

void cmd_synthesize(const CommandOptions& opts, std::ostream& log) {
  require_out(opts);
  const RunConfig cfg = resolve_config(opts);
  std::vector<Tensor<float>> clean;
  std::vector<std::string> ids;
  if (!cfg.data.clean_dir.empty()) {
    if (!fs::is_directory(cfg.data.clean_dir)) {
      throw IoError("clean image directory does not exist: " + cfg.data.clean_dir);
    }
    for (const auto& p : list_images(cfg.data.clean_dir)) {
      clean.push_back(convert_channels(read_image(p), cfg.model.in_channels));
      ids.push_back(p.stem().string());
    }
    if (clean.empty()) throw IoError("no images in " + cfg.data.clean_dir);
  } else {
    clean = load_clean_images("", cfg.data.procedural_count, cfg.data.procedural_size,
                              cfg.model.in_channels, mix_seed(cfg.seed, kCleanStream));
    for (std::size_t i = 0; i < clean.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "scene%04zu", i);
      ids.emplace_back(buf);
    }
  }
  Rng rng(mix_seed(cfg.seed, kSynthStream));
  std::vector<DatasetItem> items;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const NoiseParams p = cfg.noise.draw(rng);
    NoisyImage ni = cfg.noise.apply(clean[i], p);
    items.push_back({ids[i], {std::move(ni.noisy), clean[i].detached(), std::move(ni.sigma1)},
                     std::move(ni.sigma4), p});
  }
  write_dataset(opts.out, items, cfg.seed);
  write_text(opts.out / "resolved_config.json", resolved_config_text(cfg) + "\n");
  log << "synthesized " << items.size() << " pairs into " << opts.out.string() << "\n";
}

void cmd_train(const CommandOptions& opts, std::ostream& log) { run_training(opts, log, std::nullopt); }

void cmd_transfer(const CommandOptions& opts, std::ostream& log) {
  run_training(opts, log, TrainMode::kTransfer);
}

void cmd_denoise(const CommandOptions& opts, std::ostream& log) {
  require_out(opts);
  if (!opts.init) throw ConfigError("denoise requires --init <checkpoint>");
  RunConfig cfg = resolve_config(opts);
  const Checkpoint ck = Checkpoint::load(*opts.init);
  adopt_architecture(cfg, ck);
  const Aindnet<float> net = ck.instantiate();
  const auto inputs = expand_inputs(opts.inputs);
  if (inputs.empty()) throw ConfigError("denoise needs at least one input image");
  std::vector<Tensor<float>> images(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    images[i] = read_image(inputs[i]);
    if (images[i].shape().c != net.config().in_channels) {
      throw ShapeError(inputs[i].string() + " has " + std::to_string(images[i].shape().c) +
                       " channels, the checkpoint expects " +
                       std::to_string(net.config().in_channels));
    }
  }
  std::vector<Tensor<float>> outputs(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t i) {
    outputs[i] = clip01(opts.ensemble ? self_ensemble_denoise(denoiser_fn(net), images[i])
                                      : net.denoise(images[i]));
  });
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const fs::path path = opts.out / (inputs[i].stem().string() + "_denoised.png");
    write_png(path, outputs[i]);
    log << inputs[i].string() << " -> " << path.string() << "\n";
  }
}

void cmd_eval(const CommandOptions& opts, std::ostream& log) {
  require_out(opts);
  RunConfig cfg = resolve_config(opts);
  std::string dataset_dir = cfg.data.dataset_dir;
  if (!opts.inputs.empty()) dataset_dir = opts.inputs.front();
  if (dataset_dir.empty()) throw ConfigError("eval needs a dataset directory");
  const Dataset ds = read_dataset(dataset_dir);
  if (ds.items.empty()) throw ConfigError("dataset " + dataset_dir + " is empty");

  std::optional<Checkpoint> ck = load_init(opts);
  std::optional<Aindnet<float>> net;
  if (ck) {
    adopt_architecture(cfg, *ck);
    net.emplace(ck->instantiate());
  }
  EvalOptions eo;
  eo.ensemble = opts.ensemble;
  eo.dataset_id = ds.id;
  eo.seed = cfg.seed;
  EvalReport report = evaluate_pairs(net ? &*net : nullptr, ds.pairs(), ds.ids(), eo);
  if (ck) {
    report.config_hash = ck->config_hash();
    report.checkpoint_checksum = ck->checksum();
  } else {
    report.config_hash = "none";
  }
  write_text(opts.out / "report.txt", report.table());
  write_text(opts.out / "report.tsv", report.tsv());
  log << report.table();
}

void cmd_fewshot(const CommandOptions& opts, std::ostream& log) {
  require_out(opts);
  if (!opts.init) throw ConfigError("fewshot requires --init <source checkpoint>");
  RunConfig cfg = resolve_config(opts);
  const Checkpoint source = Checkpoint::load(*opts.init);
  adopt_architecture(cfg, source);
  cfg.validate();
  write_text(opts.out / "resolved_config.json", resolved_config_text(cfg) + "\n");

  FewshotRequest req;
  req.source = &source;
  const int size = cfg.data.procedural_size;
  if (!cfg.data.clean_dir.empty()) {
    auto clean = load_clean_images(cfg.data.clean_dir, 0, size, cfg.model.in_channels, 0);
    const std::size_t pool = static_cast<std::size_t>(cfg.fewshot.pool_count);
    if (clean.size() <= pool) {
      throw ConfigError("clean_dir needs more than pool_count images to hold out a test set");
    }
    for (std::size_t i = 0; i < clean.size(); ++i) {
      (i < pool ? req.pool_clean : req.test_clean).push_back(std::move(clean[i]));
    }
  } else {
    req.pool_clean = load_clean_images("", cfg.fewshot.pool_count, size, cfg.model.in_channels,
                                       mix_seed(cfg.seed, kPoolStream));
    req.test_clean = load_clean_images("", cfg.data.test_count, size, cfg.model.in_channels,
                                       mix_seed(cfg.seed, kTestStream));
  }
  req.target = cfg.target_noise;
  req.ks = cfg.fewshot.k;
  req.modes = cfg.fewshot.modes;
  req.train = cfg.train;
  req.seed = mix_seed(cfg.seed, kFewshotStream);
  FewshotTable table = fewshot_transfer_experiment(req);
  table.seed = cfg.seed;
  write_text(opts.out / "fewshot.txt", table.table());
  write_text(opts.out / "fewshot.tsv", table.tsv());
  log << table.table();
}

}  // namespace aind
