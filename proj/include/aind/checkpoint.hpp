#pragma once

// Single-file model checkpoint:
//   "AINDCKPT" | u32 version | u64 header length | JSON header | payload | 32-byte SHA-256
// The header holds the architecture config and the parameter table (name,
// tag, shape, dtype, byte offsets into the payload). The payload is raw
// little-endian float32. The trailing digest covers everything before it.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aind/model.hpp"
#include "aind/params.hpp"
#include "aind/tensor.hpp"

namespace aind {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointParam {
  std::string name;
  Tag tag = Tag::kBackbone;
  Tensor<float> value;
  // Adam state; empty when the checkpoint carries no optimizer state.
  std::vector<float> moment1;
  std::vector<float> moment2;
  std::int64_t steps = 0;
};

struct Checkpoint {
  ModelConfig model;
  std::vector<CheckpointParam> params;

  static Checkpoint capture(const Aindnet<float>& net, bool with_optimizer = true);
  // Copies values (and optionally Adam state) into a model built from the
  // same config. Any architecture difference is a ConfigError.
  void restore(Aindnet<float>& net, bool with_optimizer) const;
  Aindnet<float> instantiate() const;

  bool has_optimizer_state() const;

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  // SHA-256 of the serialized file.
  std::string checksum() const;
  // SHA-256 of the canonical architecture config.
  std::string config_hash() const;
  // SHA-256 over the value bytes of every parameter with this tag, in order.
  std::string tag_digest(Tag tag) const;
};

std::string config_hash(const ModelConfig& cfg);

// Same digest as Checkpoint::tag_digest, read directly from a live store.
std::string tag_digest(const ParamStore<float>& store, Tag tag);

}  // namespace aind
