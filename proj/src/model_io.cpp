#include "cclab/model_io.hpp"

#include <cstring>

#include "binio.hpp"
#include "cclab/error.hpp"

namespace cclab {

namespace {

constexpr char kMagic[6] = {'C', 'C', 'M', 'D', 'L', '1'};

std::vector<std::uint32_t> hyper(const LayerSpec& l) {
  if (const auto* d = std::get_if<Dense>(&l)) return {d->in, d->out};
  if (const auto* c = std::get_if<Conv2D>(&l)) return {c->in_ch, c->out_ch, c->k, c->stride};
  if (const auto* m = std::get_if<MaxPool>(&l)) return {m->k};
  return {};
}

LayerSpec make_layer(std::uint8_t id, const std::vector<std::uint32_t>& h) {
  auto want = [&](std::size_t n) {
    if (h.size() != n) throw FormatError("model file: bad hyperparameter count");
  };
  switch (id) {
    case 0:
      want(0);
      return Flatten{};
    case 1:
      want(2);
      return Dense{h[0], h[1]};
    case 2:
      want(0);
      return Relu{};
    case 3:
      want(4);
      return Conv2D{h[0], h[1], h[2], h[3]};
    case 4:
      want(1);
      return MaxPool{h[0]};
    default:
      throw FormatError("model file: unknown layer type id " + std::to_string(id));
  }
}

void write_tensor(detail::ByteWriter& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) w.u32(static_cast<std::uint32_t>(d));
  for (double v : t.values) w.f64(v);
}

Tensor read_tensor(detail::ByteReader& r) {
  const auto rank = r.u32();
  if (rank > 8) throw FormatError("model file: implausible tensor rank");
  std::vector<std::size_t> dims(rank);
  for (auto& d : dims) d = r.u32();
  Tensor t(dims);
  if (t.size() * 8 > r.remaining()) throw FormatError("model file: truncated payload");
  for (auto& v : t.values) v = r.f64();
  return t;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const ModelState& state) {
  detail::ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u16(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(state.spec.name.size()));
  w.raw(state.spec.name.data(), state.spec.name.size());
  w.u32(3);
  w.u32(state.spec.input.c);
  w.u32(state.spec.input.h);
  w.u32(state.spec.input.w);
  w.u8(static_cast<std::uint8_t>(state.init));
  w.u64(state.seed);
  w.u32(static_cast<std::uint32_t>(state.spec.layers.size()));
  for (std::size_t i = 0; i < state.spec.layers.size(); ++i) {
    const auto& l = state.spec.layers[i];
    w.u8(layer_type_id(l));
    const auto h = hyper(l);
    w.u32(static_cast<std::uint32_t>(h.size()));
    for (auto v : h) w.u32(v);
    if (!state.params[i].weight.values.empty()) {
      write_tensor(w, state.params[i].weight);
      write_tensor(w, state.params[i].bias);
    }
  }
  return std::move(w.bytes());
}

ModelState deserialize_model(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size(), "model file");
  if (std::memcmp(r.take(sizeof kMagic), kMagic, sizeof kMagic) != 0)
    throw FormatError("model file: bad magic (expected CCMDL1)");
  const auto version = r.u16();
  if (version != kModelFormatVersion)
    throw FormatError("model file: unsupported version " + std::to_string(version));

  ModelState state;
  const auto name_len = r.u32();
  const auto* name = r.take(name_len);
  state.spec.name.assign(reinterpret_cast<const char*>(name), name_len);
  if (r.u32() != 3) throw FormatError("model file: input shape must have 3 dims");
  state.spec.input.c = r.u32();
  state.spec.input.h = r.u32();
  state.spec.input.w = r.u32();
  const auto init = r.u8();
  if (init != static_cast<std::uint8_t>(InitScheme::glorot_uniform))
    throw FormatError("model file: unknown init scheme");
  state.init = static_cast<InitScheme>(init);
  state.seed = r.u64();
  const auto n_layers = r.u32();
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto id = r.u8();
    std::vector<std::uint32_t> h(r.u32());
    if (h.size() > 8) throw FormatError("model file: implausible hyperparameter count");
    for (auto& v : h) v = r.u32();
    state.spec.layers.push_back(make_layer(id, h));
    LayerParams p;
    if (id == 1 || id == 3) {
      p.weight = read_tensor(r);
      p.bias = read_tensor(r);
    }
    state.params.push_back(std::move(p));
  }
  if (r.remaining() != 0) throw FormatError("model file: trailing bytes");

  // Shapes must agree with what the layer list implies.
  ModelSpec check = state.spec;
  resolve(check);
  const auto fresh = init_model(check, 0);
  for (std::size_t i = 0; i < fresh.params.size(); ++i) {
    if (fresh.params[i].weight.shape != state.params[i].weight.shape ||
        fresh.params[i].bias.shape != state.params[i].bias.shape)
      throw FormatError("model file: parameter shapes do not match layer " + std::to_string(i));
  }
  return state;
}

void save_model(const ModelState& state, const std::string& path) {
  detail::write_file(path, serialize_model(state));
}

ModelState load_model(const std::string& path) { return deserialize_model(detail::read_file(path)); }

}  // namespace cclab
