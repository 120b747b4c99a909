// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <vector>

#include "mavseg/nn/checkpoint.hpp"
#include "mavseg/volume/preprocess.hpp"

namespace mavseg::harness {

/// Window starts along one axis: stride = window/2, last window flush with the end.
inline std::vector<std::size_t> window_starts(std::size_t n, std::size_t window) {
  require(window >= 1 && n >= window, "sliding window: volume extent " + std::to_string(n) + " smaller than window " +
                                          std::to_string(window));
  const std::size_t stride = std::max<std::size_t>(1, window / 2);
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s + window < n; s += stride) out.push_back(s);
  out.push_back(n - window);
  return out;
}

/// Full-volume logits: sliding windows of size `window`, logits averaged where
/// windows overlap.
template <class T>
std::vector<float> predict_logits(const nn::Model<T>& model, const routing::InputAssembly& a, const Extent& window) {
  const Dims& d = a.dims;
  const std::size_t channels = a.channel_count();
  const auto xs = window_starts(d.nx, window[0]), ys = window_starts(d.ny, window[1]), zs = window_starts(d.nz, window[2]);
  std::vector<double> sum(d.count(), 0.0);
  std::vector<std::uint32_t> hits(d.count(), 0);
  const Dims w{window[0], window[1], window[2]};
  nn::NoGradGuard no_grad;
  for (auto oz : zs)
    for (auto oy : ys)
      for (auto ox : xs) {
        std::vector<T> input(channels * w.count());
        for (std::size_t c = 0; c < channels; ++c) {
          const float* src = a.channel(c);
          for (std::size_t z = 0; z < w.nz; ++z)
            for (std::size_t y = 0; y < w.ny; ++y)
              for (std::size_t x = 0; x < w.nx; ++x)
                input[c * w.count() + w.index(x, y, z)] = static_cast<T>(src[d.index(ox + x, oy + y, oz + z)]);
        }
        const auto logits = model.forward(nn::Tensor<T>::from({1, channels, w.nx, w.ny, w.nz}, std::move(input)));
        const auto& v = logits.values();
        for (std::size_t z = 0; z < w.nz; ++z)
          for (std::size_t y = 0; y < w.ny; ++y)
            for (std::size_t x = 0; x < w.nx; ++x) {
              const std::size_t i = d.index(ox + x, oy + y, oz + z);
              sum[i] += static_cast<double>(v[w.index(x, y, z)]);
              ++hits[i];
            }
      }
  std::vector<float> out(d.count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(sum[i] / hits[i]);
  return out;
}

template <class T>
std::vector<float> predict_probabilities(const nn::Model<T>& model, const routing::InputAssembly& a, const Extent& window) {
  auto p = predict_logits(model, a, window);
  for (auto& v : p) v = static_cast<float>(nn::sigmoid_scalar(static_cast<double>(v)));
  return p;
}

inline MaskGrid threshold(const Dims& d, const std::vector<float>& probs) {
  MaskGrid m(d);
  for (std::size_t i = 0; i < probs.size(); ++i) m.set(i, probs[i] > 0.5f);
  return m;
}

template <class T>
MaskGrid predict_volume(const nn::Model<T>& model, const Case& c, const routing::AssignmentPlan& plan, const Extent& window) {
  return threshold(c.dims(), predict_probabilities(model, routing::assemble_inference(c, model.layout(), plan), window));
}

/// 2|A n B| / (|A| + |B|); 1 when both are empty.
inline double dice_metric(const MaskGrid& pred, const MaskGrid& gt) {
  require_same_dims(pred.dims(), gt.dims(), "dice_metric");
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    a += pred[i];
    b += gt[i];
    both += pred[i] && gt[i];
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

}  // namespace mavseg::harness
