#include "aind/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace aind {

using nlohmann::json;

namespace {

// Reads fields from one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string_view ain_mode_name(AinMode m) { return m == AinMode::kAdaptive ? "adaptive" : "in_concat"; }
AinMode parse_ain_mode(std::string_view s) {
  if (s == "adaptive") return AinMode::kAdaptive;
  if (s == "in_concat") return AinMode::kInConcat;
  throw ConfigError("unknown ain_mode '" + std::string(s) + "'");
}

std::string_view estimator_name(EstimatorKind k) { return k == EstimatorKind::kUnet ? "unet" : "fcn"; }
EstimatorKind parse_estimator(std::string_view s) {
  if (s == "unet") return EstimatorKind::kUnet;
  if (s == "fcn") return EstimatorKind::kFcn;
  throw ConfigError("unknown estimator '" + std::string(s) + "'");
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

void read_range(ObjectReader& r, const char* key, Range& out) {
  std::vector<double> v{out.lo, out.hi};
  r.get(key, v);
  if (v.size() != 2) throw ConfigError(r.where() + "." + key + ": expected [lo, hi]");
  out = {v[0], v[1]};
}

json noise_json(const NoiseSpec& n) {
  return {{"kind", n.kind == NoiseSpec::Kind::kAwgn ? "awgn" : "heteroscedastic"},
          {"awgn_sigma", range_json(n.awgn_sigma)},
          {"sigma_s", range_json(n.domain.sigma_s)},
          {"sigma_c", range_json(n.domain.sigma_c)},
          {"crf_gamma", range_json(n.domain.crf_gamma)},
          {"field_amplitude", n.domain.field_amplitude}};
}

void read_noise(const json& j, const std::string& where, NoiseSpec& n) {
  ObjectReader r(j, where);
  std::string kind = n.kind == NoiseSpec::Kind::kAwgn ? "awgn" : "heteroscedastic";
  r.get("kind", kind);
  if (kind == "awgn") {
    n.kind = NoiseSpec::Kind::kAwgn;
  } else if (kind == "heteroscedastic") {
    n.kind = NoiseSpec::Kind::kHeteroscedastic;
  } else {
    throw ConfigError(where + ".kind: unknown noise kind '" + kind + "'");
  }
  read_range(r, "awgn_sigma", n.awgn_sigma);
  read_range(r, "sigma_s", n.domain.sigma_s);
  read_range(r, "sigma_c", n.domain.sigma_c);
  read_range(r, "crf_gamma", n.domain.crf_gamma);
  r.get("field_amplitude", n.domain.field_amplitude);
  r.finish();
}

json train_json(const TrainConfig& t) {
  return {{"mode", mode_name(t.mode)},
          {"lr", t.adam.lr},
          {"beta1", t.adam.beta1},
          {"beta2", t.adam.beta2},
          {"adam_eps", t.adam.eps},
          {"batch_size", t.batch_size},
          {"patch_size", t.patch_size},
          {"steps", t.steps},
          {"lambda_asymm", t.loss.lambda_asymm},
          {"w1", t.loss.w1},
          {"w4", t.loss.w4},
          {"alpha", t.loss.alpha},
          {"augment", t.augment},
          {"log_every", t.log_every},
          {"val_every", t.val_every},
          {"freeze_ablation",
           t.freeze_ablation ? json(std::string(tag_name(*t.freeze_ablation))) : json(nullptr)}};
}

void read_train(const json& j, TrainConfig& t) {
  ObjectReader r(j, "train");
  std::string mode(mode_name(t.mode));
  r.get("mode", mode);
  t.mode = parse_train_mode(mode);
  r.get("lr", t.adam.lr);
  r.get("beta1", t.adam.beta1);
  r.get("beta2", t.adam.beta2);
  r.get("adam_eps", t.adam.eps);
  r.get("batch_size", t.batch_size);
  r.get("patch_size", t.patch_size);
  r.get("steps", t.steps);
  r.get("lambda_asymm", t.loss.lambda_asymm);
  r.get("w1", t.loss.w1);
  r.get("w4", t.loss.w4);
  r.get("alpha", t.loss.alpha);
  r.get("augment", t.augment);
  r.get("log_every", t.log_every);
  r.get("val_every", t.val_every);
  if (const json* fa = r.sub("freeze_ablation"); fa != nullptr && !fa->is_null()) {
    if (!fa->is_string()) throw ConfigError("train.freeze_ablation: wrong type");
    t.freeze_ablation = parse_tag(fa->get<std::string>());
  }
  r.finish();
}

}  // namespace

void DataConfig::validate() const {
  if (procedural_count < 0 || val_count < 0 || test_count < 0) {
    throw ConfigError("data counts must be non-negative");
  }
  if (procedural_size < 16) throw ConfigError("procedural_size must be at least 16");
}

void FewshotSettings::validate() const {
  if (k.empty()) throw ConfigError("fewshot.k must not be empty");
  for (int v : k) {
    if (v < 0) throw ConfigError("fewshot.k values must be non-negative");
    if (v > pool_count) {
      throw ConfigError("fewshot k=" + std::to_string(v) + " exceeds the " +
                        std::to_string(pool_count) + " available target pairs");
    }
  }
  if (modes.empty()) throw ConfigError("fewshot.modes must not be empty");
  for (TrainMode m : modes) {
    if (m == TrainMode::kScratchSn) throw ConfigError("fewshot.modes cannot include scratch_sn");
  }
}

RunConfig::RunConfig() { target_noise.domain = default_target_domain(); }

void RunConfig::validate() const {
  model.validate();
  train.validate();
  noise.validate();
  target_noise.validate();
  data.validate();
  fewshot.validate();
}

json to_json(const ModelConfig& c) {
  return {{"in_channels", c.in_channels},
          {"base_channels", c.base_channels},
          {"num_scales", c.num_scales},
          {"blocks_per_scale", c.blocks_per_scale},
          {"estimator_channels", c.estimator_channels},
          {"ain_hidden", c.ain_hidden},
          {"lambda_ms", c.lambda_ms},
          {"leaky_slope", c.leaky_slope},
          {"residual_output", c.residual_output},
          {"ain_mode", ain_mode_name(c.ain_mode)},
          {"estimator", estimator_name(c.estimator)}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  ObjectReader r(j, "model");
  r.get("in_channels", c.in_channels);
  r.get("base_channels", c.base_channels);
  r.get("num_scales", c.num_scales);
  r.get("blocks_per_scale", c.blocks_per_scale);
  r.get("estimator_channels", c.estimator_channels);
  r.get("ain_hidden", c.ain_hidden);
  r.get("lambda_ms", c.lambda_ms);
  r.get("leaky_slope", c.leaky_slope);
  r.get("residual_output", c.residual_output);
  std::string ain(ain_mode_name(c.ain_mode));
  r.get("ain_mode", ain);
  c.ain_mode = parse_ain_mode(ain);
  std::string est(estimator_name(c.estimator));
  r.get("estimator", est);
  c.estimator = parse_estimator(est);
  r.finish();
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json modes = json::array();
  for (TrainMode m : c.fewshot.modes) modes.push_back(mode_name(m));
  return {{"seed", c.seed},
          {"model", to_json(c.model)},
          {"train", train_json(c.train)},
          {"noise", noise_json(c.noise)},
          {"target_noise", noise_json(c.target_noise)},
          {"data",
           {{"clean_dir", c.data.clean_dir},
            {"dataset_dir", c.data.dataset_dir},
            {"procedural_count", c.data.procedural_count},
            {"procedural_size", c.data.procedural_size},
            {"val_count", c.data.val_count},
            {"test_count", c.data.test_count}}},
          {"fewshot", {{"k", c.fewshot.k}, {"modes", modes}, {"pool_count", c.fewshot.pool_count}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  ObjectReader r(j, "config");
  r.get("seed", c.seed);
  if (const json* m = r.sub("model")) {
    c.model = model_config_from_json(*m);
    c.model_given = true;
  }
  if (const json* t = r.sub("train")) read_train(*t, c.train);
  if (const json* n = r.sub("noise")) read_noise(*n, "noise", c.noise);
  if (const json* n = r.sub("target_noise")) read_noise(*n, "target_noise", c.target_noise);
  if (const json* d = r.sub("data")) {
    ObjectReader dr(*d, "data");
    dr.get("clean_dir", c.data.clean_dir);
    dr.get("dataset_dir", c.data.dataset_dir);
    dr.get("procedural_count", c.data.procedural_count);
    dr.get("procedural_size", c.data.procedural_size);
    dr.get("val_count", c.data.val_count);
    dr.get("test_count", c.data.test_count);
    dr.finish();
  }
  if (const json* f = r.sub("fewshot")) {
    ObjectReader fr(*f, "fewshot");
    fr.get("k", c.fewshot.k);
    fr.get("pool_count", c.fewshot.pool_count);
    std::vector<std::string> modes;
    for (TrainMode m : c.fewshot.modes) modes.emplace_back(mode_name(m));
    fr.get("modes", modes);
    c.fewshot.modes.clear();
    for (const auto& m : modes) c.fewshot.modes.push_back(parse_train_mode(m));
    fr.finish();
  }
  r.finish();
  c.validate();
  return c;
}

RunConfig parse_run_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string resolved_config_text(const RunConfig& c) { return to_json(c).dump(2); }

}  // namespace aind
