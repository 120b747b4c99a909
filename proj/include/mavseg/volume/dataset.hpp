// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mavseg/volume/grid.hpp"

namespace mavseg {

/// One subject: every modality plus the masks that guide augmentation and the
/// binary ground truth.
struct Case {
  std::string id;
  std::map<std::string, VoxelGrid> volumes;
  MaskGrid lesion_mask;
  MaskGrid brain_mask;
  MaskGrid label;

  const Dims& dims() const { return brain_mask.dims(); }

  std::vector<std::string> modalities() const {
    std::vector<std::string> out;
    for (auto& [name, _] : volumes) out.push_back(name);
    return out;
  }

  bool has(const std::string& modality) const { return volumes.count(modality) != 0; }

  const VoxelGrid& volume(const std::string& modality) const {
    auto it = volumes.find(modality);
    if (it == volumes.end()) throw ValidationError("case " + id + ": modality " + modality + " not present");
    return it->second;
  }

  /// Throws ValidationError if any invariant is broken.
  void validate() const {
    const Dims& d = brain_mask.dims();
    require_same_dims(lesion_mask.dims(), d, ("case " + id + " lesion_mask").c_str());
    require_same_dims(label.dims(), d, ("case " + id + " label").c_str());
    for (auto& [name, grid] : volumes) require_same_dims(grid.dims(), d, ("case " + id + " volume " + name).c_str());
    require(mask_subset(lesion_mask, brain_mask), "case " + id + ": lesion mask extends outside the brain mask");
  }
};

/// Relative file references for one case inside a dataset directory.
struct CaseRef {
  std::string id;
  std::map<std::string, std::string> volumes;
  std::string lesion_mask;
  std::string brain_mask;
  std::string label;
};

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

struct DatasetDescriptor {
  std::string name;
  std::vector<std::string> modalities;  // declaration order
  std::vector<CaseRef> cases;
  Split split;
  std::filesystem::path root;  // directory the relative paths resolve against

  std::size_t channel_count() const { return modalities.size(); }

  bool declares(const std::string& modality) const {
    return std::find(modalities.begin(), modalities.end(), modality) != modalities.end();
  }

  void validate() const {
    std::set<std::string> mods(modalities.begin(), modalities.end());
    require(mods.size() == modalities.size(), "dataset " + name + ": duplicate modality names");
    std::set<std::string> ids;
    for (auto& c : cases) {
      require(ids.insert(c.id).second, "dataset " + name + ": duplicate case id " + c.id);
      for (auto& [m, _] : c.volumes)
        require(mods.count(m) != 0, "dataset " + name + ": case " + c.id + " references undeclared modality " + m);
    }
    std::set<std::string> train(split.train.begin(), split.train.end());
    for (auto& id : split.train) require(ids.count(id) != 0, "dataset " + name + ": split references unknown case " + id);
    for (auto& id : split.test) {
      require(ids.count(id) != 0, "dataset " + name + ": split references unknown case " + id);
      require(train.count(id) == 0, "dataset " + name + ": case " + id + " is in both train and test splits");
    }
  }
};

/// A descriptor together with its loaded cases, keyed by id.
struct Dataset {
  DatasetDescriptor descriptor;
  std::map<std::string, Case> cases;

  const Case& get(const std::string& id) const {
    auto it = cases.find(id);
    if (it == cases.end()) throw ValidationError("dataset " + descriptor.name + ": no case " + id);
    return it->second;
  }

  /// Test-split cases, or every case when the split leaves test empty.
  std::vector<std::string> eval_ids() const {
    if (!descriptor.split.test.empty()) return descriptor.split.test;
    std::vector<std::string> out;
    for (auto& c : descriptor.cases) out.push_back(c.id);
    return out;
  }
};

struct DatasetCollection {
  std::vector<Dataset> datasets;

  std::size_t size() const { return datasets.size(); }

  void validate() const {
    std::set<std::string> names;
    for (auto& d : datasets) require(names.insert(d.descriptor.name).second, "duplicate dataset name " + d.descriptor.name);
  }
};

}  // namespace mavseg
