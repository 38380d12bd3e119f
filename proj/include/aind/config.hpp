#pragma once

// JSON run description. Every object rejects unknown keys; omitted keys take
// their defaults, and to_json() writes every field back out.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aind/model.hpp"
#include "aind/train.hpp"

namespace aind {

struct DataConfig {
  std::string clean_dir;    // PNG/PPM/PGM images; empty selects procedural scenes
  std::string dataset_dir;  // output of `synthesize`; when set, training uses its fixed pairs
  int procedural_count = 32;
  int procedural_size = 64;
  int val_count = 4;   // held-out images for validation PSNR
  int test_count = 8;  // held-out images for few-shot evaluation

  void validate() const;
};

struct FewshotSettings {
  std::vector<int> k{0, 1, 4};
  std::vector<TrainMode> modes{TrainMode::kScratchRn, TrainMode::kRetrainAll, TrainMode::kTransfer};
  int pool_count = 8;  // target-domain training pairs available

  void validate() const;
};

struct RunConfig {
  std::uint64_t seed = 1;
  ModelConfig model;
  TrainConfig train;
  NoiseSpec noise;         // synthetic (source) domain
  NoiseSpec target_noise;  // shifted domain standing in for real noise
  DataConfig data;
  FewshotSettings fewshot;
  bool model_given = false;  // the parsed text carried a "model" object

  RunConfig();
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
// Pretty-printed, every field present.
std::string resolved_config_text(const RunConfig& c);

}  // namespace aind
