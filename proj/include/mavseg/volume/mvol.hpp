// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// MVOL: a minimal little-endian volume container.
//
//   bytes 0-3    magic "MVOL" (4D 56 4F 4C)
//   byte  4      version (1)
//   byte  5      dtype   (0 = float32, 1 = uint8)
//   bytes 6-7    reserved, zero
//   bytes 8-19   uint32 nx, ny, nz
//   bytes 20-31  float32 sx, sy, sz (mm)
//   bytes 32-    nx*ny*nz payload values, x-fastest

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "mavseg/error.hpp"
#include "mavseg/volume/grid.hpp"

namespace mavseg::mvol {

inline constexpr std::uint8_t kMagic[4] = {0x4D, 0x56, 0x4F, 0x4C};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 32;

enum class Dtype : std::uint8_t { Float32 = 0, UInt8 = 1 };

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }
inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

inline std::vector<std::uint8_t> header(Dtype dtype, const Dims& d, const Spacing& s) {
  auto fits = [](std::size_t n) { return n <= std::numeric_limits<std::uint32_t>::max(); };
  if (!fits(d.nx) || !fits(d.ny) || !fits(d.nz)) throw DimsOverflow("MVOL: dimension exceeds uint32");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(0);
  out.push_back(0);
  put_u32(out, static_cast<std::uint32_t>(d.nx));
  put_u32(out, static_cast<std::uint32_t>(d.ny));
  put_u32(out, static_cast<std::uint32_t>(d.nz));
  put_f32(out, static_cast<float>(s.sx));
  put_f32(out, static_cast<float>(s.sy));
  put_f32(out, static_cast<float>(s.sz));
  return out;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("MVOL: cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("MVOL: write failed for " + path.string());
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("MVOL: cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct Parsed {
  Dtype dtype;
  Dims dims;
  Spacing spacing;
  const std::uint8_t* payload;
};

inline Parsed parse(const std::vector<std::uint8_t>& bytes, const std::string& where) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw BadMagic("MVOL: bad magic in " + where);
  if (bytes.size() < kHeaderSize) throw Truncated("MVOL: header truncated in " + where);
  if (bytes[4] != kVersion) throw VersionError("MVOL: unsupported version " + std::to_string(bytes[4]) + " in " + where);
  if (bytes[5] > 1) throw DtypeMismatch("MVOL: unknown dtype code " + std::to_string(bytes[5]) + " in " + where);
  Parsed p{static_cast<Dtype>(bytes[5]), {}, {}, bytes.data() + kHeaderSize};
  const std::uint64_t nx = get_u32(&bytes[8]), ny = get_u32(&bytes[12]), nz = get_u32(&bytes[16]);
  if (nx == 0 || ny == 0 || nz == 0) throw ValidationError("MVOL: zero dimension in " + where);
  // nx*ny fits in 64 bits; guard the final product and the byte count.
  const std::uint64_t nxy = nx * ny;
  const std::uint64_t elem = p.dtype == Dtype::Float32 ? 4 : 1;
  if (nz > std::numeric_limits<std::uint64_t>::max() / nxy / elem) throw DimsOverflow("MVOL: dims product overflows in " + where);
  const std::uint64_t payload = nxy * nz * elem;
  if (payload > std::numeric_limits<std::size_t>::max() - kHeaderSize)
    throw DimsOverflow("MVOL: dims product overflows in " + where);
  if (bytes.size() < kHeaderSize + payload) throw Truncated("MVOL: payload truncated in " + where);
  p.dims = {static_cast<std::size_t>(nx), static_cast<std::size_t>(ny), static_cast<std::size_t>(nz)};
  p.spacing = {get_f32(&bytes[20]), get_f32(&bytes[24]), get_f32(&bytes[28])};
  return p;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const VoxelGrid& grid) {
  auto out = detail::header(Dtype::Float32, grid.dims(), grid.spacing());
  out.reserve(out.size() + 4 * grid.size());
  for (float v : grid.data()) detail::put_f32(out, v);
  return out;
}

inline std::vector<std::uint8_t> encode(const MaskGrid& mask, const Spacing& spacing = {}) {
  auto out = detail::header(Dtype::UInt8, mask.dims(), spacing);
  out.insert(out.end(), mask.data().begin(), mask.data().end());
  return out;
}

inline VoxelGrid decode_volume(const std::vector<std::uint8_t>& bytes, const std::string& where = "<buffer>") {
  auto p = detail::parse(bytes, where);
  if (p.dtype != Dtype::Float32) throw DtypeMismatch("MVOL: expected float32 volume in " + where);
  std::vector<float> data(p.dims.count());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = detail::get_f32(p.payload + 4 * i);
  return VoxelGrid(p.dims, p.spacing, std::move(data));
}

/// Raw uint8 payload; used for masks and for multi-class label files.
inline std::pair<Dims, std::vector<std::uint8_t>> decode_bytes(const std::vector<std::uint8_t>& bytes,
                                                               const std::string& where = "<buffer>") {
  auto p = detail::parse(bytes, where);
  if (p.dtype != Dtype::UInt8) throw DtypeMismatch("MVOL: expected uint8 volume in " + where);
  return {p.dims, std::vector<std::uint8_t>(p.payload, p.payload + p.dims.count())};
}

inline void write_volume(const VoxelGrid& grid, const std::filesystem::path& path) {
  detail::write_bytes(path, encode(grid));
}

inline VoxelGrid read_volume(const std::filesystem::path& path) {
  return decode_volume(detail::read_bytes(path), path.string());
}

inline void write_mask(const MaskGrid& mask, const std::filesystem::path& path, const Spacing& spacing = {}) {
  detail::write_bytes(path, encode(mask, spacing));
}

inline MaskGrid read_mask(const std::filesystem::path& path) {
  auto [dims, data] = decode_bytes(detail::read_bytes(path), path.string());
  return MaskGrid(dims, std::move(data));
}

inline LabelGrid read_labels(const std::filesystem::path& path) {
  auto [dims, data] = decode_bytes(detail::read_bytes(path), path.string());
  return LabelGrid{dims, std::vector<std::int32_t>(data.begin(), data.end())};
}

}  // namespace mavseg::mvol
