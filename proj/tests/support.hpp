// Shared fixtures for the unit tests.

#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "mavseg/mavseg.hpp"

namespace mavseg::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mavseg_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
  std::filesystem::path path_;
};

inline VoxelGrid random_grid(Dims d, Rng& rng, double lo = -3.0, double hi = 3.0) {
  std::vector<float> v(d.count());
  for (auto& x : v) x = static_cast<float>(uniform(rng, lo, hi));
  return VoxelGrid(d, {}, std::move(v));
}

inline MaskGrid random_mask(Dims d, Rng& rng, double p = 0.5) {
  std::vector<std::uint8_t> v(d.count());
  for (auto& x : v) x = bernoulli(rng, p) ? 1 : 0;
  return MaskGrid(d, std::move(v));
}

/// Case with the given modalities, a centred box brain and a smaller lesion inside it.
inline Case box_case(const std::string& id, Dims d, const std::vector<std::string>& modalities, Rng& rng) {
  Case c;
  c.id = id;
  MaskGrid brain(d), lesion(d);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = d.index(x, y, z);
        const bool in_brain = x >= 1 && y >= 1 && z >= 1 && x + 1 < d.nx && y + 1 < d.ny && z + 1 < d.nz;
        brain.set(i, in_brain);
        lesion.set(i, in_brain && x < d.nx / 2 && y < d.ny / 2 && z < d.nz / 2);
      }
  for (auto& m : modalities) {
    VoxelGrid g = random_grid(d, rng, 0.0, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!brain[i]) g[i] = 0.0f;
    c.volumes.emplace(m, std::move(g));
  }
  c.lesion_mask = lesion;
  c.brain_mask = brain;
  c.label = lesion;
  return c;
}

/// Writes cases as an on-disk dataset and returns its directory.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::string& name,
                                           const std::vector<std::string>& modalities, const std::vector<Case>& cases,
                                           const Split& split) {
  std::filesystem::create_directories(dir);
  DatasetDescriptor d;
  d.name = name;
  d.modalities = modalities;
  d.split = split;
  for (auto& c : cases) {
    std::filesystem::create_directories(dir / c.id);
    CaseRef r;
    r.id = c.id;
    for (auto& [m, g] : c.volumes) {
      r.volumes[m] = c.id + "/" + m + ".mvol";
      mvol::write_volume(g, dir / r.volumes[m]);
    }
    r.lesion_mask = c.id + "/lesion.mvol";
    r.brain_mask = c.id + "/brain.mvol";
    r.label = c.id + "/label.mvol";
    mvol::write_mask(c.lesion_mask, dir / r.lesion_mask);
    mvol::write_mask(c.brain_mask, dir / r.brain_mask);
    mvol::write_mask(c.label, dir / r.label);
    d.cases.push_back(std::move(r));
  }
  write_manifest(d, dir);
  return dir;
}

}  // namespace mavseg::testing
