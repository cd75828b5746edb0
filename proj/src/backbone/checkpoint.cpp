#include "mfatdnn/backbone/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace mfatdnn::backbone {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

using nlohmann::json;

json config_to_json(const ModelConfig& cfg) {
  json stem = json::array();
  for (const auto& l : cfg.mfa.stem) stem.push_back({{"stride_f", l.stride_f}, {"stride_t", l.stride_t}});
  return {
      {"variant", std::string(variant_name(cfg.variant))},
      {"mel_bins", cfg.mel_bins},
      {"first_kernel", cfg.first_kernel},
      {"mfa",
       {{"channels", cfg.mfa.channels},
        {"scale", cfg.mfa.scale},
        {"reduction", cfg.mfa.reduction},
        {"out_channels", cfg.mfa.out_channels},
        {"mel_bins", cfg.mfa.mel_bins},
        {"tdnn_kernel", cfg.mfa.tdnn_kernel},
        {"stem", stem}}},
      {"cnn", {{"channels", cfg.cnn.channels}, {"freq_strides", cfg.cnn.freq_strides}}},
      {"backbone",
       {{"channels", cfg.backbone.channels},
        {"res2_scale", cfg.backbone.res2_scale},
        {"kernel", cfg.backbone.kernel},
        {"dilations", cfg.backbone.dilations},
        {"se_channels", cfg.backbone.se_channels},
        {"attention_channels", cfg.backbone.attention_channels},
        {"embed_dim", cfg.backbone.embed_dim}}},
  };
}

ModelConfig config_from_json(const json& j) {
  try {
    ModelConfig c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.mel_bins = j.at("mel_bins").get<std::size_t>();
    c.first_kernel = j.at("first_kernel").get<std::size_t>();
    const json& m = j.at("mfa");
    c.mfa.channels = m.at("channels").get<std::size_t>();
    c.mfa.scale = m.at("scale").get<std::size_t>();
    c.mfa.reduction = m.at("reduction").get<std::size_t>();
    c.mfa.out_channels = m.at("out_channels").get<std::size_t>();
    c.mfa.mel_bins = m.at("mel_bins").get<std::size_t>();
    c.mfa.tdnn_kernel = m.at("tdnn_kernel").get<std::size_t>();
    c.mfa.stem.clear();
    for (const auto& l : m.at("stem"))
      c.mfa.stem.push_back({l.at("stride_f").get<std::size_t>(), l.at("stride_t").get<std::size_t>()});
    const json& cn = j.at("cnn");
    c.cnn.channels = cn.at("channels").get<std::size_t>();
    c.cnn.freq_strides = cn.at("freq_strides").get<std::array<std::size_t, 4>>();
    const json& b = j.at("backbone");
    c.backbone.channels = b.at("channels").get<std::size_t>();
    c.backbone.res2_scale = b.at("res2_scale").get<std::size_t>();
    c.backbone.kernel = b.at("kernel").get<std::size_t>();
    c.backbone.dilations = b.at("dilations").get<std::array<std::size_t, 3>>();
    c.backbone.se_channels = b.at("se_channels").get<std::size_t>();
    c.backbone.attention_channels = b.at("attention_channels").get<std::size_t>();
    c.backbone.embed_dim = b.at("embed_dim").get<std::size_t>();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model config: ") + e.what());
  }
}

void save_checkpoint(const Model<float>& model, const std::filesystem::path& path,
                     std::uint64_t step) {
  json inventory = json::array();
  for (const auto& e : model.params()) {
    const auto dims = e.param->value.shape().dims();
    inventory.push_back({{"name", e.name},
                         {"shape", std::vector<std::size_t>(dims.begin(), dims.end())},
                         {"buffer", e.param->buffer}});
  }
  const json manifest = {{"format", std::string(kCheckpointFormat)},
                         {"variant", std::string(variant_name(model.config().variant))},
                         {"config", config_to_json(model.config())},
                         {"step", step},
                         {"params", inventory}};
  const std::string text = manifest.dump();

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write checkpoint " + path.string());
    const auto len = static_cast<std::uint32_t>(text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& e : model.params()) {
      const auto& v = e.param->value.vec();
      out.write(reinterpret_cast<const char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(float)));
    }
    if (!out) throw InputError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

struct RawCheckpoint {
  json manifest;
  std::vector<float> blob;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4) throw TruncatedFileError("checkpoint truncated: missing manifest length");
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data(), 4);
  if (bytes.size() < 4 + static_cast<std::size_t>(len))
    throw TruncatedFileError("checkpoint truncated inside the manifest");
  RawCheckpoint raw;
  try {
    raw.manifest = json::parse(bytes.begin() + 4, bytes.begin() + 4 + len);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  const std::string format = raw.manifest.value("format", std::string());
  if (format != kCheckpointFormat)
    throw VersionMismatchError("checkpoint format '" + format + "', expected '" +
                               std::string(kCheckpointFormat) + "'");
  std::size_t expected = 0;
  for (const auto& p : raw.manifest.at("params")) {
    std::size_t n = 1;
    for (std::size_t d : p.at("shape").get<std::vector<std::size_t>>()) n *= d;
    expected += n;
  }
  const std::size_t payload = bytes.size() - 4 - len;
  if (payload < expected * sizeof(float))
    throw TruncatedFileError("checkpoint truncated: " + std::to_string(payload) + " blob bytes, " +
                             std::to_string(expected * sizeof(float)) + " expected");
  if (payload > expected * sizeof(float))
    throw FormatError("checkpoint has " + std::to_string(payload - expected * sizeof(float)) +
                      " trailing bytes");
  raw.blob.resize(expected);
  std::memcpy(raw.blob.data(), bytes.data() + 4 + len, expected * sizeof(float));
  return raw;
}

void check_inventory(const Model<float>& model, const json& params) {
  const auto& entries = model.params().entries();
  const std::size_t n = std::min(entries.size(), params.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = params[i].at("name").get<std::string>();
    const auto shape = params[i].at("shape").get<std::vector<std::size_t>>();
    const auto dims = entries[i].param->value.shape().dims();
    const bool same_shape = std::equal(shape.begin(), shape.end(), dims.begin(), dims.end());
    if (name != entries[i].name || !same_shape) {
      throw ShapeMismatchError(entries[i].name,
                               "checkpoint parameter '" + name + "' does not match model parameter '" +
                                   entries[i].name + "' " + entries[i].param->value.shape().str());
    }
  }
  if (entries.size() != params.size()) {
    const std::string first =
        entries.size() > n ? entries[n].name : params[n].at("name").get<std::string>();
    throw ShapeMismatchError(first, "checkpoint has " + std::to_string(params.size()) +
                                        " tensors, model has " + std::to_string(entries.size()) +
                                        "; first unmatched: " + first);
  }
}

void assign(Model<float>& model, const std::vector<float>& blob) {
  std::size_t off = 0;
  for (const auto& e : model.params()) {
    auto& v = e.param->value.vec();
    std::copy_n(blob.begin() + static_cast<std::ptrdiff_t>(off), v.size(), v.begin());
    off += v.size();
  }
}

}  // namespace

std::unique_ptr<Model<float>> load_checkpoint(const std::filesystem::path& path,
                                              CheckpointInfo* info) {
  RawCheckpoint raw = read_raw(path);
  const ModelConfig cfg = config_from_json(raw.manifest.at("config"));
  auto model = std::make_unique<Model<float>>(cfg);
  check_inventory(*model, raw.manifest.at("params"));
  assign(*model, raw.blob);
  if (info) *info = {cfg, raw.manifest.value("step", std::uint64_t{0})};
  return model;
}

void load_checkpoint_into(Model<float>& model, const std::filesystem::path& path,
                          CheckpointInfo* info) {
  RawCheckpoint raw = read_raw(path);
  check_inventory(model, raw.manifest.at("params"));
  assign(model, raw.blob);
  if (info) *info = {config_from_json(raw.manifest.at("config")), raw.manifest.value("step", std::uint64_t{0})};
}

}  // namespace mfatdnn::backbone
