// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mavseg/error.hpp"

namespace mavseg {

/// Grid extent (nx, ny, nz). Linear voxel order is x-fastest.
struct Dims {
  std::size_t nx = 0, ny = 0, nz = 0;

  std::size_t count() const { return nx * ny * nz; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + nx * (y + ny * z); }
  std::size_t operator[](std::size_t axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  bool operator==(const Dims&) const = default;

  std::string str() const {
    return std::to_string(nx) + "x" + std::to_string(ny) + "x" + std::to_string(nz);
  }
};

/// Millimetres per voxel along each axis. Stored as float32 on disk, so held as float here too.
struct Spacing {
  float sx = 1.0f, sy = 1.0f, sz = 1.0f;

  float operator[](std::size_t axis) const { return axis == 0 ? sx : axis == 1 ? sy : sz; }
  bool operator==(const Spacing&) const = default;
};

/// 3D scalar field. Every stored value is finite.
class VoxelGrid {
public:
  VoxelGrid() = default;
  VoxelGrid(Dims dims, Spacing spacing, float fill = 0.0f) : dims_(dims), spacing_(spacing), data_(dims.count(), fill) {
    validate_shape();
  }
  VoxelGrid(Dims dims, Spacing spacing, std::vector<float> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate_shape();
    for (float v : data_) require(std::isfinite(v), "VoxelGrid: non-finite voxel value");
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }
  float& at(std::size_t x, std::size_t y, std::size_t z) { return data_[dims_.index(x, y, z)]; }
  float at(std::size_t x, std::size_t y, std::size_t z) const { return data_[dims_.index(x, y, z)]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool operator==(const VoxelGrid&) const = default;

private:
  void validate_shape() const {
    require(dims_.nx > 0 && dims_.ny > 0 && dims_.nz > 0, "VoxelGrid: dims must be positive");
    require(spacing_.sx > 0 && spacing_.sy > 0 && spacing_.sz > 0, "VoxelGrid: spacing must be positive");
    require(data_.size() == dims_.count(), "VoxelGrid: data length does not match dims");
  }

  Dims dims_;
  Spacing spacing_;
  std::vector<float> data_;
};

/// Binary per-voxel mask, stored as 0/1 bytes.
class MaskGrid {
public:
  MaskGrid() = default;
  explicit MaskGrid(Dims dims, bool fill = false) : dims_(dims), data_(dims.count(), fill ? 1 : 0) {}
  MaskGrid(Dims dims, std::vector<std::uint8_t> data) : dims_(dims), data_(std::move(data)) {
    require(data_.size() == dims_.count(), "MaskGrid: data length does not match dims");
    for (auto& v : data_) require(v <= 1, "MaskGrid: values must be 0 or 1");
  }

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  bool operator[](std::size_t i) const { return data_[i] != 0; }
  void set(std::size_t i, bool v) { data_[i] = v ? 1 : 0; }
  bool at(std::size_t x, std::size_t y, std::size_t z) const { return data_[dims_.index(x, y, z)] != 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : data_) n += v;
    return n;
  }
  bool empty() const { return count() == 0; }

  const std::vector<std::uint8_t>& data() const { return data_; }

  bool operator==(const MaskGrid&) const = default;

private:
  Dims dims_;
  std::vector<std::uint8_t> data_;
};

/// Multi-class integer label volume as shipped by source datasets.
struct LabelGrid {
  Dims dims;
  std::vector<std::int32_t> data;
};

inline void require_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (!(a == b)) throw ValidationError(std::string(what) + ": dimension mismatch " + a.str() + " vs " + b.str());
}

/// a AND NOT b
inline MaskGrid mask_minus(const MaskGrid& a, const MaskGrid& b) {
  require_same_dims(a.dims(), b.dims(), "mask_minus");
  MaskGrid out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out.set(i, a[i] && !b[i]);
  return out;
}

inline bool mask_subset(const MaskGrid& inner, const MaskGrid& outer) {
  require_same_dims(inner.dims(), outer.dims(), "mask_subset");
  for (std::size_t i = 0; i < inner.size(); ++i)
    if (inner[i] && !outer[i]) return false;
  return true;
}

}  // namespace mavseg
