// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// Checkpoint directory:
//   model.json   version, variant, channel layout, backbone config, config echo
//   weights.bin  little-endian: uint32 tensor count; per tensor: uint16 name
//                length, name bytes, uint8 rank, rank x uint32 dims, float32 payload

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mavseg/nn/model.hpp"

namespace mavseg::nn {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int version = kCheckpointVersion;
  Variant variant = Variant::Standard;
  routing::ChannelLayout layout;
  UNetConfig unet;
  nlohmann::json config = nlohmann::json::object();  // echo of the producing experiment config
  std::vector<NamedArray> parameters;

  const NamedArray& parameter(const std::string& name) const {
    for (auto& p : parameters)
      if (p.name == name) return p;
    throw ValidationError("checkpoint: no parameter named " + name);
  }
};

template <class T>
Checkpoint make_checkpoint(const Model<T>& model, nlohmann::json config = nlohmann::json::object()) {
  return {kCheckpointVersion, model.variant(), model.layout(), model.config(), std::move(config),
          model.export_parameters()};
}

/// Instantiates a model of any scalar type from checkpoint weights.
template <class T>
Model<T> make_model(const Checkpoint& ckpt) {
  Rng scratch(0);
  Model<T> m(ckpt.variant, ckpt.layout, ckpt.unet, scratch);
  m.import_parameters(ckpt.parameters);
  return m;
}

inline nlohmann::json layout_json(const routing::ChannelLayout& l) {
  return {{"specific", l.specific}, {"has_agnostic", l.has_agnostic}};
}

inline routing::ChannelLayout layout_from_json(const nlohmann::json& j) {
  routing::ChannelLayout l;
  l.specific = j.at("specific").get<std::vector<std::string>>();
  l.has_agnostic = j.at("has_agnostic").get<bool>();
  l.validate();
  return l;
}

inline nlohmann::json unet_json(const UNetConfig& c) {
  return {{"in_channels", c.in_channels},
          {"levels", c.levels},
          {"base_features", c.base_features},
          {"out_classes", c.out_classes},
          {"norm", c.norm == Norm::Instance ? "instance" : "none"}};
}

inline UNetConfig unet_from_json(const nlohmann::json& j, UNetConfig c = {}) {
  if (j.contains("in_channels")) c.in_channels = j.at("in_channels").get<std::size_t>();
  if (j.contains("levels")) c.levels = j.at("levels").get<std::size_t>();
  if (j.contains("base_features")) c.base_features = j.at("base_features").get<std::size_t>();
  if (j.contains("out_classes")) c.out_classes = j.at("out_classes").get<std::size_t>();
  if (j.contains("norm")) {
    const auto n = j.at("norm").get<std::string>();
    require(n == "instance" || n == "none", "unet: norm must be 'instance' or 'none'");
    c.norm = n == "instance" ? Norm::Instance : Norm::None;
  }
  return c;
}

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  std::uint32_t u(int bytes) {
    if (pos_ + static_cast<std::size_t>(bytes) > b_.size()) throw CorruptCheckpoint("weights.bin: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint32_t(b_[pos_++]) << (8 * i);
    return v;
  }
  std::string str(std::size_t n) {
    if (pos_ + n > b_.size()) throw CorruptCheckpoint("weights.bin: truncated name");
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }
  std::size_t remaining() const { return b_.size() - pos_; }

private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_weights(const std::vector<NamedArray>& params) {
  std::vector<std::uint8_t> b;
  detail::put_u32(b, static_cast<std::uint32_t>(params.size()));
  for (auto& p : params) {
    require(p.name.size() <= 0xFFFF, "checkpoint: parameter name too long");
    require(p.shape.size() <= 0xFF, "checkpoint: tensor rank too large");
    detail::put_u16(b, static_cast<std::uint16_t>(p.name.size()));
    b.insert(b.end(), p.name.begin(), p.name.end());
    b.push_back(static_cast<std::uint8_t>(p.shape.size()));
    for (auto d : p.shape) detail::put_u32(b, static_cast<std::uint32_t>(d));
    for (float v : p.data) detail::put_u32(b, std::bit_cast<std::uint32_t>(v));
  }
  return b;
}

inline std::vector<NamedArray> decode_weights(const std::vector<std::uint8_t>& bytes) {
  detail::Reader r(bytes);
  const std::uint32_t count = r.u(4);
  std::vector<NamedArray> out;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.str(r.u(2));
    if (!names.insert(a.name).second) throw CorruptCheckpoint("weights.bin: duplicate tensor name " + a.name);
    const std::uint32_t rank = r.u(1);
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u(4);
      if (dim == 0) throw CorruptCheckpoint("weights.bin: zero dimension in " + a.name);
      a.shape.push_back(dim);
      n *= dim;
      if (n > (std::uint64_t{1} << 40)) throw CorruptCheckpoint("weights.bin: tensor " + a.name + " too large");
    }
    if (n * 4 > r.remaining()) throw CorruptCheckpoint("weights.bin: truncated payload for " + a.name);
    a.data.resize(static_cast<std::size_t>(n));
    for (auto& v : a.data) v = std::bit_cast<float>(r.u(4));
    out.push_back(std::move(a));
  }
  if (!r.done()) throw CorruptCheckpoint("weights.bin: trailing bytes after " + std::to_string(count) + " tensors");
  return out;
}

inline nlohmann::json checkpoint_json(const Checkpoint& c) {
  return {{"version", c.version},
          {"variant", std::string(to_string(c.variant))},
          {"layout", layout_json(c.layout)},
          {"unet", unet_json(c.unet)},
          {"config", c.config}};
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "model.json");
    if (!f) throw IoError("cannot write " + (dir / "model.json").string());
    f << checkpoint_json(c).dump(2) << '\n';
  }
  const auto bytes = encode_weights(c.parameters);
  std::ofstream f(dir / "weights.bin", std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + (dir / "weights.bin").string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream jf(dir / "model.json");
  if (!jf) throw ValidationError("checkpoint: cannot open " + (dir / "model.json").string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(jf);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("checkpoint: model.json: ") + e.what());
  }
  Checkpoint c;
  try {
    c.version = j.at("version").get<int>();
    if (c.version != kCheckpointVersion)
      throw VersionError("checkpoint: unsupported version " + std::to_string(c.version));
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.layout = layout_from_json(j.at("layout"));
    c.unet = unet_from_json(j.at("unet"));
    c.config = j.value("config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("checkpoint: model.json: ") + e.what());
  }
  std::ifstream wf(dir / "weights.bin", std::ios::binary);
  if (!wf) throw ValidationError("checkpoint: cannot open " + (dir / "weights.bin").string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(wf), std::istreambuf_iterator<char>()};
  c.parameters = decode_weights(bytes);
  return c;
}

enum class ReinitMode { Channel, Path };

/// Turns a standard checkpoint into an agnostic-channel or agnostic-path one.
/// Weights shared with the source are copied bit-exactly. New first-layer input
/// slices and pathway convolutions are freshly drawn; in path mode the specific
/// pre-convolution starts as the identity so the copied backbone still sees its
/// original inputs.
inline Checkpoint reinit_agnostic(const Checkpoint& source, ReinitMode mode, Rng& rng) {
  require(source.variant == Variant::Standard, "reinit_agnostic: source checkpoint must be the standard variant, got " +
                                                   std::string(to_string(source.variant)));
  auto layout = source.layout;
  layout.has_agnostic = true;
  const Variant target = mode == ReinitMode::Channel ? Variant::AgnosticChannel : Variant::AgnosticPath;
  Model<float> fresh(target, layout, source.unet, rng);

  const std::size_t csp = layout.specific.size();
  const std::string first = "unet.enc0.conv0.weight";
  for (auto& [name, t] : fresh.parameters()) {
    auto dst = t.data();
    if (name == "path.pre.weight") {
      // Identity: centre tap of channel c -> c.
      const std::size_t taps = kPreKernel * kPreKernel * kPreKernel;
      std::fill(dst.begin(), dst.end(), 0.0f);
      for (std::size_t c = 0; c < csp; ++c) dst[((c * csp + c) * taps) + taps / 2] = 1.0f;
      continue;
    }
    if (name.rfind("path.", 0) == 0) continue;
    const NamedArray& src = source.parameter(name);
    if (name == first) {
      // [F, Cin, 3, 3, 3]: copy the first csp input slices of every filter.
      const std::size_t f = t.dim(0), cin_new = t.dim(1), cin_old = src.shape[1];
      require(cin_old == csp, "reinit_agnostic: unexpected first-layer width in source");
      for (std::size_t o = 0; o < f; ++o)
        for (std::size_t ci = 0; ci < cin_old; ++ci)
          std::copy_n(src.data.begin() + static_cast<std::ptrdiff_t>((o * cin_old + ci) * 27), 27,
                      dst.begin() + static_cast<std::ptrdiff_t>((o * cin_new + ci) * 27));
      continue;
    }
    require(src.shape == t.shape(), "reinit_agnostic: shape mismatch for " + name);
    std::copy(src.data.begin(), src.data.end(), dst.begin());
  }
  auto out = make_checkpoint(fresh, source.config);
  return out;
}

}  // namespace mavseg::nn
