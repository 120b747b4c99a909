// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// Segmentation networks. All variants share a plain 3D U-Net backbone:
//
//   standard          U-Net(specific)
//   agnostic_channel  U-Net(specific ++ agnostic)
//   agnostic_path     U-Net(conv(specific) ++ path(agnostic)), path: 1 -> 8 -> 8 -> 8
//   single            U-Net(one modality)
//   shuffle           U-Net(specific, channels permuted during training)

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mavseg/nn/ops.hpp"
#include "mavseg/rng.hpp"
#include "mavseg/routing/routing.hpp"

namespace mavseg::nn {

enum class Variant { Standard, AgnosticChannel, AgnosticPath, Single, Shuffle };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Standard: return "standard";
    case Variant::AgnosticChannel: return "agnostic-channel";
    case Variant::AgnosticPath: return "agnostic-path";
    case Variant::Single: return "single";
    case Variant::Shuffle: return "shuffle";
  }
  return "?";
}

inline Variant variant_from_string(std::string_view s) {
  for (auto v : {Variant::Standard, Variant::AgnosticChannel, Variant::AgnosticPath, Variant::Single, Variant::Shuffle})
    if (to_string(v) == s) return v;
  throw ValidationError("unknown model variant '" + std::string(s) + "'");
}

inline bool has_agnostic(Variant v) { return v == Variant::AgnosticChannel || v == Variant::AgnosticPath; }

enum class Norm { Instance, None };

struct UNetConfig {
  std::size_t in_channels = 1;
  std::size_t levels = 3;
  std::size_t base_features = 8;
  std::size_t out_classes = 1;
  Norm norm = Norm::Instance;

  bool operator==(const UNetConfig&) const = default;

  std::size_t divisor() const { return std::size_t{1} << (levels - 1); }

  void validate() const {
    require(in_channels >= 1, "unet: in_channels must be >= 1");
    require(levels >= 2, "unet: levels must be >= 2");
    require(base_features >= 1, "unet: base_features must be >= 1");
    require(out_classes == 1, "unet: only binary segmentation (out_classes = 1) is supported");
  }
};

/// Feature widths of the agnostic pathway; the first input is always 1 channel.
inline constexpr std::size_t kPathFeatures = 8;
inline constexpr std::size_t kPathLayers = 3;
/// Pointwise: mixes the specific channels without blurring them.
inline constexpr std::size_t kPreKernel = 1;

/// Flat, named, float32 parameter storage used by checkpoints.
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> data;
  bool operator==(const NamedArray&) const = default;
};

/// Conv3d parameters plus He-normal initialization.
template <class T>
struct Conv {
  Tensor<T> weight, bias;
  std::size_t padding = 1;

  Conv() = default;
  Conv(std::size_t in, std::size_t out, std::size_t k, Rng& rng) : padding(k / 2) {
    const double sd = std::sqrt(2.0 / static_cast<double>(in * k * k * k));
    std::vector<T> w(out * in * k * k * k);
    for (auto& v : w) v = static_cast<T>(sd * normal(rng));
    weight = Tensor<T>::from({out, in, k, k, k}, std::move(w), true);
    bias = Tensor<T>::zeros({out}, true);
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return conv3(x, weight, bias, 1, padding); }
};

template <class T>
class Model {
public:
  /// Input channel count of the assembly the model consumes.
  static std::size_t input_channels(Variant v, std::size_t n_specific) {
    switch (v) {
      case Variant::Standard:
      case Variant::Shuffle: return n_specific;
      case Variant::AgnosticChannel:
      case Variant::AgnosticPath: return n_specific + 1;
      case Variant::Single: return 1;
    }
    return 0;
  }

  /// Channel count at the U-Net's first convolution.
  static std::size_t unet_channels(Variant v, std::size_t n_specific) {
    return v == Variant::AgnosticPath ? n_specific + kPathFeatures : input_channels(v, n_specific);
  }

  Model(Variant variant, routing::ChannelLayout layout, UNetConfig unet, Rng& rng)
      : variant_(variant), layout_(std::move(layout)), cfg_(unet) {
    require(has_agnostic(variant_) == layout_.has_agnostic,
            "model: layout agnostic slot does not match variant " + std::string(to_string(variant_)));
    require(!layout_.specific.empty(), "model: layout has no specific channels");
    cfg_.in_channels = unet_channels(variant_, layout_.specific.size());
    cfg_.validate();
    build(rng);
  }

  Variant variant() const { return variant_; }
  const routing::ChannelLayout& layout() const { return layout_; }
  const UNetConfig& config() const { return cfg_; }
  std::size_t input_channels() const { return input_channels(variant_, layout_.specific.size()); }

  /// Named parameters in a fixed order.
  std::vector<std::pair<std::string, Tensor<T>>>& parameters() { return params_; }
  const std::vector<std::pair<std::string, Tensor<T>>>& parameters() const { return params_; }

  Tensor<T>& parameter(const std::string& name) {
    for (auto& [n, t] : params_)
      if (n == name) return t;
    throw ValidationError("model: no parameter named " + name);
  }

  void zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
  }

  /// input: [B, input_channels, X, Y, Z] -> logits [B, 1, X, Y, Z].
  Tensor<T> forward(const Tensor<T>& input) const {
    const Geo g = geo(input, "model forward");
    require(g.c == input_channels(), "model: expected " + std::to_string(input_channels()) + " input channels, got " +
                                         std::to_string(g.c));
    const std::size_t div = cfg_.divisor();
    require(g.x % div == 0 && g.y % div == 0 && g.z % div == 0,
            "model: spatial dims " + shape_str(input.shape()) + " not divisible by " + std::to_string(div));
    if (variant_ == Variant::AgnosticPath) {
      const std::size_t csp = layout_.specific.size();
      return unet(path_features(narrow_channels(input, 0, csp), narrow_channels(input, csp, 1)));
    }
    return unet(input);
  }

  /// conv(specific) ++ path(agnostic); feeds the U-Net of the path variant.
  Tensor<T> path_features(const Tensor<T>& specific, const Tensor<T>& agnostic) const {
    require(variant_ == Variant::AgnosticPath, "model: path_features on a model without a pathway");
    require(geo(agnostic, "agnostic path").c == 1, "agnostic path: expected 1 input channel");
    // Hidden layers use the backbone's norm + ReLU; the last stays linear, like
    // the specific pre-conv it is concatenated with.
    Tensor<T> h = agnostic;
    for (std::size_t i = 0; i < path_.size(); ++i) h = i + 1 < path_.size() ? act(path_[i](h)) : path_[i](h);
    return concat_channels<T>({pre_(specific), h});
  }

  /// Backbone only; input has config().in_channels channels.
  Tensor<T> unet(const Tensor<T>& x) const {
    std::vector<Tensor<T>> skips;
    Tensor<T> h = x;
    for (std::size_t l = 0; l < cfg_.levels; ++l) {
      if (l > 0) h = maxpool2(h);
      h = block(enc_[l], h);
      if (l + 1 < cfg_.levels) skips.push_back(h);
    }
    for (std::size_t l = cfg_.levels - 1; l-- > 0;) {
      h = upsample_nearest2(h);
      h = block(dec_[l], concat_channels<T>({skips[l], h}));
    }
    return head_(h);
  }

  std::vector<NamedArray> export_parameters() const {
    std::vector<NamedArray> out;
    for (auto& [n, t] : params_) {
      NamedArray a{n, t.shape(), {}};
      a.data.reserve(t.size());
      for (T v : t.data()) a.data.push_back(static_cast<float>(v));
      out.push_back(std::move(a));
    }
    return out;
  }

  /// Copies values by name; every model parameter must be present with a matching shape.
  void import_parameters(const std::vector<NamedArray>& arrays) {
    std::map<std::string, const NamedArray*> by_name;
    for (auto& a : arrays) by_name[a.name] = &a;
    for (auto& [n, t] : params_) {
      auto it = by_name.find(n);
      require(it != by_name.end(), "model: checkpoint lacks parameter " + n);
      require(it->second->shape == t.shape(), "model: shape mismatch for parameter " + n + ": " +
                                                  shape_str(it->second->shape) + " vs " + shape_str(t.shape()));
      auto dst = t.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second->data[i]);
    }
    require(by_name.size() == params_.size(), "model: checkpoint has parameters this model does not use");
  }

private:
  using Block = std::pair<Conv<T>, Conv<T>>;

  Tensor<T> act(const Tensor<T>& t) const { return relu(cfg_.norm == Norm::Instance ? instance_norm(t) : t); }

  Tensor<T> block(const Block& b, const Tensor<T>& x) const { return act(b.second(act(b.first(x)))); }

  void add(const std::string& name, const Conv<T>& c) {
    params_.emplace_back(name + ".weight", c.weight);
    params_.emplace_back(name + ".bias", c.bias);
  }

  void build(Rng& rng) {
    if (variant_ == Variant::AgnosticPath) {
      const std::size_t csp = layout_.specific.size();
      pre_ = Conv<T>(csp, csp, kPreKernel, rng);
      add("path.pre", pre_);
      std::size_t in = 1;
      for (std::size_t i = 0; i < kPathLayers; ++i) {
        path_.emplace_back(in, kPathFeatures, 3, rng);
        add("path.conv" + std::to_string(i), path_.back());
        in = kPathFeatures;
      }
    }
    std::size_t in = cfg_.in_channels;
    for (std::size_t l = 0; l < cfg_.levels; ++l) {
      const std::size_t f = cfg_.base_features << l;
      enc_.emplace_back(Conv<T>(in, f, 3, rng), Conv<T>(f, f, 3, rng));
      add("unet.enc" + std::to_string(l) + ".conv0", enc_.back().first);
      add("unet.enc" + std::to_string(l) + ".conv1", enc_.back().second);
      in = f;
    }
    dec_.resize(cfg_.levels - 1);
    for (std::size_t l = cfg_.levels - 1; l-- > 0;) {
      const std::size_t f = cfg_.base_features << l;
      dec_[l] = {Conv<T>(f + in, f, 3, rng), Conv<T>(f, f, 3, rng)};
      add("unet.dec" + std::to_string(l) + ".conv0", dec_[l].first);
      add("unet.dec" + std::to_string(l) + ".conv1", dec_[l].second);
      in = f;
    }
    head_ = Conv<T>(in, cfg_.out_classes, 1, rng);
    add("unet.head", head_);
  }

  Variant variant_;
  routing::ChannelLayout layout_;
  UNetConfig cfg_;
  Conv<T> pre_;
  std::vector<Conv<T>> path_;
  std::vector<Block> enc_;
  std::vector<Block> dec_;
  Conv<T> head_;
  std::vector<std::pair<std::string, Tensor<T>>> params_;
};

/// Packs assemblies into one [B, C, X, Y, Z] batch tensor.
template <class T>
Tensor<T> batch_tensor(const std::vector<const routing::InputAssembly*>& batch) {
  require(!batch.empty(), "batch_tensor: empty batch");
  const auto& d = batch[0]->dims;
  const std::size_t c = batch[0]->channel_count();
  std::vector<T> data;
  data.reserve(batch.size() * batch[0]->channels.size());
  for (auto* a : batch) {
    require(a->dims == d && a->channel_count() == c, "batch_tensor: inconsistent assemblies");
    for (float v : a->channels) data.push_back(static_cast<T>(v));
  }
  return Tensor<T>::from({batch.size(), c, d.nx, d.ny, d.nz}, std::move(data));
}

}  // namespace mavseg::nn
