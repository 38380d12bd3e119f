#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "aind/commands.hpp"
#include "aind/errors.hpp"
#include "aind/parallel.hpp"

namespace {

// Failures print exactly one line: "error: <category>: <message>".
int fail(const std::string& category, const std::string& message) {
  std::string flat = message;
  for (char& c : flat) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::fprintf(stderr, "error: %s: %s\n", category.c_str(), flat.c_str());
  return 2;
}

struct RawOptions {
  std::string config;
  std::string init;
  std::uint64_t seed = 0;
  int steps = 0;
  bool ensemble = false;
  std::string freeze_ablation;
  std::string out;
  std::vector<std::string> inputs;
};

void add_common(CLI::App* sub, RawOptions& raw) {
  sub->add_option("--config", raw.config, "JSON run configuration");
  sub->add_option("--init", raw.init, "checkpoint to start from or evaluate");
  sub->add_option("--seed", raw.seed, "override the configured seed");
  sub->add_option("--steps", raw.steps, "override the number of training steps");
  sub->add_flag("--ensemble", raw.ensemble, "average over the 8 flips/rotations");
  sub->add_option("--freeze-ablation", raw.freeze_ablation, "keep one more tag frozen")
      ->check(CLI::IsMember({"ain", "estimator", "last_conv"}));
  sub->add_option("--out", raw.out, "output directory");
}

aind::CommandOptions to_options(const CLI::App* sub, const RawOptions& raw) {
  aind::CommandOptions o;
  if (!raw.config.empty()) o.config = raw.config;
  if (!raw.init.empty()) o.init = raw.init;
  if (sub->count("--seed") > 0) o.seed = raw.seed;
  if (sub->count("--steps") > 0) o.steps = raw.steps;
  o.ensemble = raw.ensemble;
  if (!raw.freeze_ablation.empty()) o.freeze_ablation = aind::parse_tag(raw.freeze_ablation);
  o.out = raw.out;
  o.inputs = raw.inputs;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-instance-normalization denoiser: synthesis, training, transfer, evaluation"};
  app.require_subcommand(1);
  RawOptions raw;

  using Command = std::function<void(const aind::CommandOptions&, std::ostream&)>;
  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"synthesize", {"write a noisy/clean dataset with noise-level maps", aind::cmd_synthesize}},
      {"train", {"train a model in the configured mode", aind::cmd_train}},
      {"transfer", {"adapt a trained model to a new noise domain", aind::cmd_transfer}},
      {"denoise", {"denoise image files", aind::cmd_denoise}},
      {"eval", {"score a dataset directory", aind::cmd_eval}},
      {"fewshot", {"few-shot transfer comparison table", aind::cmd_fewshot}},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    add_common(sub, raw);
    if (name == "denoise") sub->add_option("images", raw.inputs, "image files or directories");
    if (name == "eval") sub->add_option("dataset", raw.inputs, "dataset directory");
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    aind::thread_count();
    for (const auto& [name, sub] : subs) {
      if (sub->parsed()) {
        commands.at(name).second(to_options(sub, raw), std::cout);
        return 0;
      }
    }
    return fail("usage", "no subcommand");
  } catch (const aind::Error& e) {
    return fail(e.category(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
}
