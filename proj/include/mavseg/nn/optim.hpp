// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mavseg/nn/tensor.hpp"

namespace mavseg::nn {

/// Two-phase step schedule: `initial` before `drop_epoch`, `final` from it on.
struct LrSchedule {
  double initial = 1e-4;
  double final = 1e-5;
  std::size_t drop_epoch = 35;

  double at(std::size_t epoch) const { return epoch < drop_epoch ? initial : final; }
  bool operator==(const LrSchedule&) const = default;

  /// Drop point at the same fraction of training as 350 of 600 epochs.
  static LrSchedule for_epochs(std::size_t epochs, double initial = 1e-4, double final = 1e-5) {
    return {initial, final, static_cast<std::size_t>(std::lround(static_cast<double>(epochs) * 350.0 / 600.0))};
  }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are keyed by position in the parameter list.
template <class T>
class Adam {
public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  std::size_t steps() const { return t_; }

  void step(std::vector<std::pair<std::string, Tensor<T>>>& params, double lr) {
    if (m_.empty()) {
      for (auto& [_, p] : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
    }
    require(m_.size() == params.size(), "adam: parameter list changed between steps");
    for (auto& [name, p] : params) require(p.has_grad(), "adam: missing gradient for " + name);
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k].second;
      auto val = p.data();
      const auto& g = p.grad();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < val.size(); ++i) {
        const double gi = g[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m[i] / bc1, vhat = v[i] / bc2;
        val[i] = static_cast<T>(static_cast<double>(val[i]) - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace mavseg::nn
