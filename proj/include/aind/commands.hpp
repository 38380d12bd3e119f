#pragma once

// The CLI subcommands as library calls. Each returns normally on success and
// throws an aind::Error subclass on any validation or I/O failure.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aind/config.hpp"

namespace aind {

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> init;  // checkpoint to start from / to evaluate
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  bool ensemble = false;
  std::optional<Tag> freeze_ablation;
  std::filesystem::path out;
  std::vector<std::string> inputs;  // positional arguments
};

// Config file (or defaults) with command-line overrides applied.
RunConfig resolve_config(const CommandOptions& opts);

// Writes <out>/manifest.json plus the pair files.
void cmd_synthesize(const CommandOptions& opts, std::ostream& log);
// Writes <out>/checkpoint.aind, <out>/metrics.log, <out>/resolved_config.json.
void cmd_train(const CommandOptions& opts, std::ostream& log);
// cmd_train forced into transfer mode; --init is required.
void cmd_transfer(const CommandOptions& opts, std::ostream& log);
// Denoises every input image into <out>/<stem>_denoised.png.
void cmd_denoise(const CommandOptions& opts, std::ostream& log);
// Scores a dataset directory; writes <out>/report.txt and <out>/report.tsv.
void cmd_eval(const CommandOptions& opts, std::ostream& log);
// Few-shot table; writes <out>/fewshot.txt and <out>/fewshot.tsv.
void cmd_fewshot(const CommandOptions& opts, std::ostream& log);

inline constexpr const char* kCheckpointFile = "checkpoint.aind";

}  // namespace aind
