// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <vector>

#include "mavseg/nn/ops.hpp"

namespace mavseg::nn {

inline constexpr double kDiceSmooth = 1e-5;

struct DiceCeTerms {
  double dice = 0;  // soft Dice in [0, 1]
  double ce = 0;    // mean binary cross-entropy
};

/// Soft Dice and mean BCE of sigmoid(logits) against a binary target, computed
/// over the whole batch.
template <class T>
DiceCeTerms dice_ce_terms(const std::vector<T>& logits, const std::vector<T>& target) {
  double inter = 0, psum = 0, tsum = 0, ce = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i], t = target[i];
    const double p = sigmoid_scalar(z);
    inter += p * t;
    psum += p;
    tsum += t;
    // max(z,0) - z t + log(1 + exp(-|z|)), stable for any z.
    ce += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  return {(2 * inter + kDiceSmooth) / (psum + tsum + kDiceSmooth), ce / static_cast<double>(logits.size())};
}

/// (1 - softDice) + mean BCE. target must hold only 0 and 1.
template <class T>
Tensor<T> dice_ce_loss(const Tensor<T>& logits, const std::vector<T>& target) {
  require(target.size() == logits.size(), "dice_ce_loss: target size " + std::to_string(target.size()) +
                                              " does not match logits " + shape_str(logits.shape()));
  for (T t : target) require(t == T(0) || t == T(1), "dice_ce_loss: target must be binary");
  const auto& z = logits.values();
  const auto terms = dice_ce_terms(z, target);
  const T loss = static_cast<T>((1.0 - terms.dice) + terms.ce);
  return Tensor<T>::make({1}, {loss}, {logits}, [target](Node<T>& n) {
    T* gz = parent_grad(n, 0);
    const auto& z = n.parents[0]->value;
    const std::size_t count = z.size();
    std::vector<T> p(count);
    T inter = 0, psum = 0, tsum = 0;
    for (std::size_t i = 0; i < count; ++i) {
      p[i] = sigmoid_scalar(z[i]);
      inter += p[i] * target[i];
      psum += p[i];
      tsum += target[i];
    }
    const T eps = static_cast<T>(kDiceSmooth);
    const T num = 2 * inter + eps, den = psum + tsum + eps;
    const T g = n.grad[0];
    for (std::size_t i = 0; i < count; ++i) {
      // d(1 - num/den)/dp_i = -(2 t_i den - num) / den^2
      const T ddice_dp = -(2 * target[i] * den - num) / (den * den);
      const T dsig = p[i] * (T(1) - p[i]);
      const T dce_dz = (p[i] - target[i]) / static_cast<T>(count);
      gz[i] += g * (ddice_dp * dsig + dce_dz);
    }
  });
}

}  // namespace mavseg::nn
