#include "aind/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aind/hash.hpp"
#include "aind/image_io.hpp"

namespace aind {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<ImagePair> Dataset::pairs() const {
  std::vector<ImagePair> out;
  for (const auto& it : items) {
    out.push_back({it.pair.noisy.detached(), it.pair.clean.detached(), it.pair.sigma1.detached()});
  }
  return out;
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  for (const auto& it : items) out.push_back(it.id);
  return out;
}

void write_dataset(const fs::path& dir, const std::vector<DatasetItem>& items, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json list = json::array();
  for (const auto& it : items) {
    const Shape s = it.pair.clean.shape();
    const Shape s4 = it.sigma4.shape();
    write_png(dir / (it.id + "_clean.png"), it.pair.clean);
    write_png(dir / (it.id + "_noisy.png"), it.pair.noisy);
    write_raw(dir / (it.id + "_clean.f32"), it.pair.clean);
    write_raw(dir / (it.id + "_noisy.f32"), it.pair.noisy);
    write_raw(dir / (it.id + "_sigma1.f32"), it.pair.sigma1);
    write_raw(dir / (it.id + "_sigma4.f32"), it.sigma4);
    list.push_back({{"id", it.id},
                    {"shape", {s.n, s.h, s.w, s.c}},
                    {"sigma4_shape", {s4.n, s4.h, s4.w, s4.c}},
                    {"sigma_s", it.noise.sigma_s},
                    {"sigma_c", it.noise.sigma_c},
                    {"crf_gamma", it.noise.crf_gamma},
                    {"field_amplitude", it.noise.field_amplitude},
                    {"noise_seed", it.noise.seed}});
  }
  const json manifest = {{"format", "aind-dataset"}, {"version", 1}, {"seed", seed},
                         {"count", items.size()}, {"items", list}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

Dataset read_dataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no manifest.json in " + dir.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  Dataset ds;
  ds.id = sha256_hex(text);
  try {
    const json manifest = json::parse(text);
    if (manifest.at("format").get<std::string>() != "aind-dataset") {
      throw IoError(dir.string() + ": not a dataset manifest");
    }
    for (const auto& row : manifest.at("items")) {
      DatasetItem it;
      it.id = row.at("id").get<std::string>();
      const auto d = row.at("shape").get<std::vector<int>>();
      const auto d4 = row.at("sigma4_shape").get<std::vector<int>>();
      if (d.size() != 4 || d4.size() != 4) throw IoError("bad shape in manifest");
      const Shape s{d[0], d[1], d[2], d[3]};
      const Shape s4{d4[0], d4[1], d4[2], d4[3]};
      const fs::path clean = dir / (it.id + "_clean.f32");
      if (!fs::exists(clean)) throw IoError("missing clean reference for " + it.id);
      it.pair.clean = read_raw(clean, s);
      it.pair.noisy = read_raw(dir / (it.id + "_noisy.f32"), s);
      it.pair.sigma1 = read_raw(dir / (it.id + "_sigma1.f32"), s);
      it.sigma4 = read_raw(dir / (it.id + "_sigma4.f32"), s4);
      it.noise.sigma_s = row.at("sigma_s").get<double>();
      it.noise.sigma_c = row.at("sigma_c").get<double>();
      it.noise.crf_gamma = row.at("crf_gamma").get<double>();
      it.noise.field_amplitude = row.at("field_amplitude").get<double>();
      it.noise.seed = row.at("noise_seed").get<std::uint64_t>();
      ds.items.push_back(std::move(it));
    }
  } catch (const json::exception& e) {
    throw IoError(dir.string() + ": malformed manifest: " + e.what());
  }
  return ds;
}

std::vector<Tensor<float>> load_clean_images(const std::string& clean_dir, int count, int size,
                                             int channels, std::uint64_t seed) {
  std::vector<Tensor<float>> out;
  if (!clean_dir.empty()) {
    for (const auto& p : list_images(clean_dir)) out.push_back(convert_channels(read_image(p), channels));
    if (out.empty()) throw IoError("no images in " + clean_dir);
    return out;
  }
  for (int i = 0; i < count; ++i) {
    out.push_back(make_scene(mix_seed(seed, static_cast<std::uint64_t>(i)), size, size, channels));
  }
  return out;
}

}  // namespace aind
