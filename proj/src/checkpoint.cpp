#include "aind/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "aind/config.hpp"
#include "aind/hash.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in host order and must be little-endian");

namespace aind {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'A', 'I', 'N', 'D', 'C', 'K', 'P', 'T'};
constexpr std::size_t kDigestBytes = 32;

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof v);
}

template <typename U>
U get(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + sizeof(U) > bytes.size()) throw IoError("checkpoint truncated");
  U v;
  std::memcpy(&v, bytes.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  out.insert(out.end(), p, p + v.size_bytes());
}

std::vector<float> get_floats(std::span<const std::uint8_t> payload, std::size_t offset,
                              std::size_t count) {
  if (offset + count * sizeof(float) > payload.size()) throw IoError("checkpoint payload truncated");
  std::vector<float> v(count);
  std::memcpy(v.data(), payload.data() + offset, count * sizeof(float));
  return v;
}

std::vector<std::uint8_t> digest_bytes(const std::string& hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

}  // namespace

Checkpoint Checkpoint::capture(const Aindnet<float>& net, bool with_optimizer) {
  Checkpoint ck;
  ck.model = net.config();
  for (const auto& e : net.params().entries()) {
    CheckpointParam p;
    p.name = e.name;
    p.tag = e.tag;
    p.value = e.value->detached();
    if (with_optimizer && e.moment1.size() == e.value->size()) {
      p.moment1 = e.moment1;
      p.moment2 = e.moment2;
      p.steps = e.steps;
    }
    ck.params.push_back(std::move(p));
  }
  return ck;
}

void Checkpoint::restore(Aindnet<float>& net, bool with_optimizer) const {
  if (!(net.config() == model)) {
    throw ConfigError("checkpoint architecture " + to_json(model).dump() +
                      " does not match model " + to_json(net.config()).dump());
  }
  auto& entries = net.params().entries();
  if (entries.size() != params.size()) throw ConfigError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    const auto& p = params[i];
    if (e.name != p.name || e.tag != p.tag || e.value->shape() != p.value.shape()) {
      throw ConfigError("checkpoint parameter " + p.name + " does not match model parameter " +
                        e.name);
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    const auto& p = params[i];
    std::copy(p.value.data().begin(), p.value.data().end(), e.value->data().begin());
    e.value->clear_grad();
    if (with_optimizer) {
      e.moment1 = p.moment1;
      e.moment2 = p.moment2;
      e.steps = p.steps;
    } else {
      e.moment1.clear();
      e.moment2.clear();
      e.steps = 0;
    }
  }
}

Aindnet<float> Checkpoint::instantiate() const {
  Aindnet<float> net(model, 0);
  restore(net, false);
  return net;
}

bool Checkpoint::has_optimizer_state() const {
  for (const auto& p : params) {
    if (!p.moment1.empty()) return true;
  }
  return false;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  std::vector<std::uint8_t> payload;
  json table = json::array();
  for (const auto& p : params) {
    const Shape s = p.value.shape();
    json row = {{"name", p.name},
                {"tag", tag_name(p.tag)},
                {"shape", {s.n, s.h, s.w, s.c}},
                {"dtype", "f32"},
                {"offset", payload.size()}};
    put_floats(payload, p.value.data());
    if (!p.moment1.empty()) {
      if (p.moment1.size() != p.value.size() || p.moment2.size() != p.value.size()) {
        throw StateError("optimizer state of " + p.name + " has the wrong length");
      }
      row["adam"] = {{"m_offset", payload.size()},
                     {"v_offset", payload.size() + p.value.size() * sizeof(float)},
                     {"steps", p.steps}};
      put_floats(payload, p.moment1);
      put_floats(payload, p.moment2);
    }
    table.push_back(std::move(row));
  }
  const std::string header =
      json{{"model", to_json(model)}, {"params", table}, {"payload_bytes", payload.size()}}.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint64_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  const auto digest = digest_bytes(sha256_hex(std::span<const std::uint8_t>(out)));
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

Checkpoint Checkpoint::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + kDigestBytes ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError("not a checkpoint file");
  }
  const auto body = bytes.first(bytes.size() - kDigestBytes);
  const auto stored = bytes.last(kDigestBytes);
  const auto actual = digest_bytes(sha256_hex(body));
  if (!std::equal(actual.begin(), actual.end(), stored.begin())) {
    throw IoError("checkpoint checksum mismatch");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = get<std::uint32_t>(body, pos);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(body, pos);
  if (pos + header_len > body.size()) throw IoError("checkpoint header truncated");
  json header;
  try {
    header = json::parse(body.begin() + static_cast<std::ptrdiff_t>(pos),
                         body.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const auto payload = body.subspan(pos + header_len);

  Checkpoint ck;
  try {
    ck.model = model_config_from_json(header.at("model"));
    if (header.at("payload_bytes").get<std::size_t>() != payload.size()) {
      throw IoError("checkpoint payload size mismatch");
    }
    for (const auto& row : header.at("params")) {
      if (row.at("dtype").get<std::string>() != "f32") throw IoError("unsupported dtype");
      const auto dims = row.at("shape").get<std::vector<int>>();
      if (dims.size() != 4) throw IoError("bad parameter shape");
      CheckpointParam p;
      p.name = row.at("name").get<std::string>();
      p.tag = parse_tag(row.at("tag").get<std::string>());
      const Shape s{dims[0], dims[1], dims[2], dims[3]};
      p.value = Tensor<float>(s, get_floats(payload, row.at("offset").get<std::size_t>(), s.numel()));
      if (row.contains("adam")) {
        const auto& a = row.at("adam");
        p.moment1 = get_floats(payload, a.at("m_offset").get<std::size_t>(), s.numel());
        p.moment2 = get_floats(payload, a.at("v_offset").get<std::size_t>(), s.numel());
        p.steps = a.at("steps").get<std::int64_t>();
      }
      ck.params.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  }
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::string Checkpoint::checksum() const { return sha256_hex(std::span<const std::uint8_t>(serialize())); }

std::string Checkpoint::config_hash() const { return aind::config_hash(model); }

std::string Checkpoint::tag_digest(Tag tag) const {
  Sha256 h;
  for (const auto& p : params) {
    if (p.tag == tag) h.update(p.value.data().data(), p.value.data().size_bytes());
  }
  return h.hex_digest();
}

std::string config_hash(const ModelConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

std::string tag_digest(const ParamStore<float>& store, Tag tag) {
  Sha256 h;
  for (const auto& e : store.entries()) {
    if (e.tag == tag) h.update(e.value->data().data(), e.value->data().size_bytes());
  }
  return h.hex_digest();
}

}  // namespace aind
