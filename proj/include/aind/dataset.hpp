#pragma once

// Synthesized dataset directory:
//   manifest.json
//   <id>_clean.png  <id>_noisy.png            8-bit previews for interchange
//   <id>_clean.f32  <id>_noisy.f32            float payloads used for training/eval
//   <id>_sigma1.f32 <id>_sigma4.f32           ground-truth std maps

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aind/noise.hpp"
#include "aind/train.hpp"

namespace aind {

struct DatasetItem {
  std::string id;
  ImagePair pair;
  Tensor<float> sigma4;
  NoiseParams noise;
};

struct Dataset {
  std::string id;  // SHA-256 of the manifest
  std::vector<DatasetItem> items;

  std::vector<ImagePair> pairs() const;
  std::vector<std::string> ids() const;
};

void write_dataset(const std::filesystem::path& dir, const std::vector<DatasetItem>& items,
                   std::uint64_t seed);
Dataset read_dataset(const std::filesystem::path& dir);

// Clean images for a run: every image in clean_dir (converted to the model's
// channel count), or `count` procedural scenes of size x size.
std::vector<Tensor<float>> load_clean_images(const std::string& clean_dir, int count, int size,
                                             int channels, std::uint64_t seed);

}  // namespace aind
