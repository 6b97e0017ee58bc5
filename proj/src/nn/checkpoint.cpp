#include "aliascope/nn/checkpoint.hpp"

#include <map>
#include <string>

#include "aliascope/binary_io.hpp"

namespace aliascope::nn {

namespace {

constexpr char kMagic[] = "ALCK";
constexpr std::uint32_t kVersion = 1;

void write_tensor(ByteWriter& w, const std::string& name, const Tensor<float>& t) {
  if (name.size() > 0xFFFF) throw FormatError("tensor name too long: " + name);
  if (t.rank() > 0xFF) throw FormatError("tensor rank too large: " + name);
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.raw(name);
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (float v : t.values()) w.f32(v);
}

}  // namespace

nlohmann::json to_json(const ModelSpec& spec) {
  return {{"family", std::string(family_name(spec.family))},
          {"base_width", spec.base_width},
          {"depth", spec.depth},
          {"n_classes", spec.n_classes},
          {"input_size", spec.input_size},
          {"input_channels", spec.input_channels},
          {"stem_stride", spec.stem_stride},
          {"stem_pool", spec.stem_pool}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.family = parse_family(j.at("family").get<std::string>());
  spec.base_width = j.at("base_width").get<std::size_t>();
  spec.depth = j.at("depth").get<std::size_t>();
  spec.n_classes = j.at("n_classes").get<std::size_t>();
  spec.input_size = j.at("input_size").get<std::size_t>();
  spec.input_channels = j.at("input_channels").get<std::size_t>();
  spec.stem_stride = j.at("stem_stride").get<std::size_t>();
  spec.stem_pool = j.at("stem_pool").get<bool>();
  spec.validate();
  return spec;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"lr_drop_epoch", c.lr_drop_epoch},
          {"lr_drop_factor", c.lr_drop_factor},
          {"weight_decay", c.weight_decay},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lr_drop_epoch = j.at("lr_drop_epoch").get<std::size_t>();
  c.lr_drop_factor = j.at("lr_drop_factor").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(Checkpoint& ck) {
  auto params = ck.model.parameters();
  auto buffers = ck.model.buffers();
  const bool with_optimizer = ck.optimizer.first_moment.size() == params.size();

  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : ck.history) {
    history.push_back({{"epoch", r.epoch}, {"learning_rate", r.learning_rate}, {"loss", r.loss},
                       {"accuracy", r.accuracy}});
  }
  const std::size_t tensor_count = params.size() + buffers.size() + (with_optimizer ? 2 * params.size() : 0);
  const nlohmann::json header = {{"model", to_json(ck.model.spec())},
                                 {"train_config", to_json(ck.config)},
                                 {"init_seed", ck.init_seed},
                                 {"epoch", ck.epoch},
                                 {"history", history},
                                 {"adam_step", ck.optimizer.step},
                                 {"tensor_count", tensor_count}};
  const std::string text = header.dump();

  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  for (const auto& p : params) write_tensor(w, p.name, *p.value);
  for (const auto& b : buffers) write_tensor(w, b.name, *b.value);
  if (with_optimizer) {
    for (std::size_t i = 0; i < params.size(); ++i) write_tensor(w, "adam.m." + params[i].name, ck.optimizer.first_moment[i]);
    for (std::size_t i = 0; i < params.size(); ++i) write_tensor(w, "adam.v." + params[i].name, ck.optimizer.second_moment[i]);
  }
  w.seal();
  return w.bytes();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != kMagic) {
    throw FormatError("unrecognized format: missing ALCK magic");
  }
  {
    ByteReader r(bytes);
    r.raw(4);
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
      throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                        std::to_string(kVersion) + ")");
    }
  }
  const auto payload = verify_crc_trailer(bytes, "checkpoint");
  ByteReader r(payload);
  r.raw(8);
  const std::uint32_t header_size = r.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.raw(header_size));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  const ModelSpec spec = model_spec_from_json(header.at("model"));
  Checkpoint ck{FloatModel(spec, header.at("init_seed").get<std::uint64_t>()),
                train_config_from_json(header.at("train_config")),
                header.at("init_seed").get<std::uint64_t>(),
                header.at("epoch").get<std::size_t>(),
                {},
                {}};
  for (const auto& h : header.at("history")) {
    ck.history.push_back({h.at("epoch").get<std::size_t>(), h.at("learning_rate").get<double>(),
                          h.at("loss").get<double>(), h.at("accuracy").get<double>()});
  }

  std::map<std::string, Tensor<float>> tensors;
  const auto count = header.at("tensor_count").get<std::size_t>();
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint16_t name_size = r.u16();
    std::string name = r.raw(name_size);
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    std::vector<float> data(numel_of(shape));
    for (float& v : data) v = r.f32();
    if (!tensors.emplace(name, Tensor<float>(shape, std::move(data))).second) {
      throw FormatError("duplicate tensor name in checkpoint: " + name);
    }
  }
  if (r.remaining() != 0) throw FormatError("checkpoint has unexpected trailing data");

  auto take = [&](const std::string& name, Tensor<float>& dst) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint is missing tensor " + name);
    if (it->second.shape() != dst.shape()) {
      throw FormatError("tensor " + name + " has shape " + shape_string(it->second.shape()) + ", model expects " +
                        shape_string(dst.shape()));
    }
    dst = std::move(it->second);
    tensors.erase(it);
  };

  auto params = ck.model.parameters();
  for (auto& p : params) take(p.name, *p.value);
  for (auto& b : ck.model.buffers()) take(b.name, *b.value);
  ck.optimizer.step = header.at("adam_step").get<std::uint64_t>();
  if (!tensors.empty()) {
    ck.optimizer = make_adam_state(params);
    ck.optimizer.step = header.at("adam_step").get<std::uint64_t>();
    for (std::size_t i = 0; i < params.size(); ++i) take("adam.m." + params[i].name, ck.optimizer.first_moment[i]);
    for (std::size_t i = 0; i < params.size(); ++i) take("adam.v." + params[i].name, ck.optimizer.second_moment[i]);
  }
  if (!tensors.empty()) throw FormatError("checkpoint has unknown tensor " + tensors.begin()->first);
  return ck;
}

void save_checkpoint(Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace aliascope::nn
