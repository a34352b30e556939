#include "eegatt/serialize.hpp"

#include "eegatt/error.hpp"
#include "eegatt/io.hpp"
#include "json.hpp"

namespace eegatt::nn {

using nlohmann::json;

std::string encode_params(const ParamBundle& params) {
  io::ByteWriter w;
  w.bytes(std::string_view(kParamMagic, 8));
  w.u32(kParamVersion);
  w.u32(static_cast<std::uint32_t>(params.params.size()));
  for (const auto& p : params.params) {
    w.str(p.name);
    w.u8(p.trainable ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(p.reg_group));
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.u64(d);
    for (double v : p.value.values()) w.f64(v);
  }
  return w.buffer();
}

ParamBundle decode_params(std::string bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  r.expect_magic(std::string_view(kParamMagic, 8));
  const auto version = r.u32();
  if (version != kParamVersion) fail(ErrorCode::kFormat, source + ": unsupported parameter container version " + std::to_string(version));
  const auto count = r.u32();
  ParamBundle b;
  for (std::uint32_t i = 0; i < count; ++i) {
    Param p;
    p.name = r.str();
    p.trainable = r.u8() != 0;
    const auto group = r.u8();
    if (group > 2) fail(ErrorCode::kFormat, source + ": bad penalty group for '" + p.name + "'");
    p.reg_group = static_cast<RegGroup>(group);
    const auto rank = r.u32();
    if (rank > 8) fail(ErrorCode::kFormat, source + ": implausible rank for '" + p.name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const auto n = shape_size(shape);
    if (n * 8 > r.remaining()) fail(ErrorCode::kFormat, source + ": truncated values for '" + p.name + "'");
    std::vector<double> values(n);
    for (auto& v : values) v = r.f64();
    p.value = Tensor(std::move(shape), std::move(values));
    b.params.push_back(std::move(p));
  }
  if (r.remaining() != 0) fail(ErrorCode::kFormat, source + ": trailing bytes after parameter container");
  return b;
}

void save_params(const ParamBundle& params, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_params(params));
}

void assign_params(Network& network, const ParamBundle& loaded, const std::string& source) {
  auto& dst = network.params().params;
  if (loaded.params.size() != dst.size()) {
    fail(ErrorCode::kFormat, source + ": holds " + std::to_string(loaded.params.size()) + " tensors, network expects " +
                                 std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const auto& src = loaded.params[i];
    if (src.name != dst[i].name || src.value.shape() != dst[i].value.shape()) {
      fail(ErrorCode::kFormat, source + ": tensor '" + src.name + "' " + shape_str(src.value.shape()) +
                                   " does not match '" + dst[i].name + "' " + shape_str(dst[i].value.shape()));
    }
    dst[i].value = src.value;
  }
}

void load_params(Network& network, const std::filesystem::path& path) {
  assign_params(network, decode_params(io::read_file(path), path.string()), path.string());
}

std::string spec_to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const auto& L : spec.layers) {
    json j;
    j["kind"] = layer_kind_name(L.kind);
    j["name"] = L.name;
    if (!L.inputs.empty()) j["inputs"] = L.inputs;
    switch (L.kind) {
      case LayerKind::kInput:
        if (L.index_input) {
          j["index_input"] = true;
        } else {
          j["shape"] = L.shape;
        }
        break;
      case LayerKind::kSpatialConv:
      case LayerKind::kTemporalConv:
        j["kernel"] = {L.kernel_h, L.kernel_w};
        j["filters"] = L.filters;
        break;
      case LayerKind::kMaxPool:
        j["pool"] = L.pool_w;
        j["stride"] = L.pool_stride;
        break;
      case LayerKind::kDropout:
        j["rate"] = L.rate;
        break;
      case LayerKind::kDense:
        j["units"] = L.units;
        break;
      case LayerKind::kEmbedding:
        j["vocab"] = L.vocab;
        j["dim"] = L.embed_dim;
        break;
      case LayerKind::kBatchNorm:
        j["epsilon"] = L.epsilon;
        j["momentum"] = L.momentum;
        break;
      default:
        break;
    }
    layers.push_back(std::move(j));
  }
  json outputs = json::array();
  for (const auto& h : spec.outputs) outputs.push_back({{"task", h.task}, {"layer", h.layer}});
  json root{{"name", spec.name}, {"layers", layers}, {"outputs", outputs}};
  return root.dump(2) + "\n";
}

NetworkSpec spec_from_json(const std::string& text, const std::string& source) {
  try {
    const json root = json::parse(text);
    NetworkSpec spec;
    spec.name = root.at("name").get<std::string>();
    for (const auto& j : root.at("layers")) {
      LayerSpec L;
      L.kind = layer_kind_from_name(j.at("kind").get<std::string>());
      L.name = j.at("name").get<std::string>();
      if (j.contains("inputs")) L.inputs = j.at("inputs").get<std::vector<std::string>>();
      L.index_input = j.value("index_input", false);
      if (j.contains("shape")) L.shape = j.at("shape").get<Shape>();
      if (j.contains("kernel")) {
        L.kernel_h = j.at("kernel").at(0).get<std::size_t>();
        L.kernel_w = j.at("kernel").at(1).get<std::size_t>();
      }
      L.filters = j.value("filters", std::size_t{0});
      L.pool_w = j.value("pool", std::size_t{3});
      L.pool_stride = j.value("stride", std::size_t{3});
      L.rate = j.value("rate", 0.0);
      L.units = j.value("units", std::size_t{0});
      L.vocab = j.value("vocab", std::size_t{0});
      L.embed_dim = j.value("dim", std::size_t{0});
      L.epsilon = j.value("epsilon", 1e-3);
      L.momentum = j.value("momentum", 0.99);
      spec.layers.push_back(std::move(L));
    }
    for (const auto& h : root.at("outputs")) {
      spec.outputs.push_back({h.at("task").get<std::string>(), h.at("layer").get<std::string>()});
    }
    infer_shapes(spec);
    return spec;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, source + ": malformed network spec: " + e.what());
  }
}

}  // namespace eegatt::nn
