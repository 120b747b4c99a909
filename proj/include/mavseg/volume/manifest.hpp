// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// Dataset manifest: one JSON document per dataset directory.
//
//   {
//     "name": "...",
//     "modalities": ["T1", "T2"],
//     "cases": [{"id": "c0", "volumes": {"T1": "c0/T1.mvol"}, "lesion_mask": "...",
//                "brain_mask": "...", "label": "..."}],
//     "split": {"train": ["c0"], "test": []}
//   }

#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mavseg/volume/dataset.hpp"
#include "mavseg/volume/mvol.hpp"
#include "mavseg/volume/preprocess.hpp"

namespace mavseg {

inline constexpr const char* kManifestName = "manifest.json";

namespace detail {

inline std::filesystem::path manifest_path(const std::filesystem::path& p) {
  return std::filesystem::is_directory(p) ? p / kManifestName : p;
}

template <class T>
T json_get(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + ": field '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline DatasetDescriptor parse_manifest(const nlohmann::json& j, const std::filesystem::path& root) {
  DatasetDescriptor d;
  d.root = root;
  d.name = detail::json_get<std::string>(j, "name", "manifest");
  const std::string where = "manifest " + d.name;
  d.modalities = detail::json_get<std::vector<std::string>>(j, "modalities", where);
  for (auto& c : detail::json_get<nlohmann::json>(j, "cases", where)) {
    CaseRef r;
    r.id = detail::json_get<std::string>(c, "id", where);
    const std::string cw = where + " case " + r.id;
    r.volumes = detail::json_get<std::map<std::string, std::string>>(c, "volumes", cw);
    r.lesion_mask = detail::json_get<std::string>(c, "lesion_mask", cw);
    r.brain_mask = detail::json_get<std::string>(c, "brain_mask", cw);
    r.label = detail::json_get<std::string>(c, "label", cw);
    d.cases.push_back(std::move(r));
  }
  auto split = detail::json_get<nlohmann::json>(j, "split", where);
  d.split.train = detail::json_get<std::vector<std::string>>(split, "train", where + " split");
  d.split.test = detail::json_get<std::vector<std::string>>(split, "test", where + " split");
  d.validate();
  return d;
}

inline nlohmann::json manifest_json(const DatasetDescriptor& d) {
  nlohmann::json cases = nlohmann::json::array();
  for (auto& c : d.cases)
    cases.push_back({{"id", c.id},
                     {"volumes", c.volumes},
                     {"lesion_mask", c.lesion_mask},
                     {"brain_mask", c.brain_mask},
                     {"label", c.label}});
  return {{"name", d.name},
          {"modalities", d.modalities},
          {"cases", cases},
          {"split", {{"train", d.split.train}, {"test", d.split.test}}}};
}

inline void write_manifest(const DatasetDescriptor& d, const std::filesystem::path& dir) {
  std::ofstream f(dir / kManifestName);
  if (!f) throw IoError("cannot write manifest in " + dir.string());
  f << manifest_json(d).dump(2) << '\n';
}

/// Reads one case from disk. Multi-class labels are merged to binary.
inline Case load_case(const DatasetDescriptor& d, const CaseRef& r) {
  auto resolve = [&](const std::string& rel) {
    auto p = d.root / rel;
    if (!std::filesystem::exists(p)) throw ValidationError("dataset " + d.name + ": missing file " + p.string());
    return p;
  };
  Case c;
  c.id = r.id;
  for (auto& [m, rel] : r.volumes) c.volumes.emplace(m, mvol::read_volume(resolve(rel)));
  c.lesion_mask = mvol::read_mask(resolve(r.lesion_mask));
  c.brain_mask = mvol::read_mask(resolve(r.brain_mask));
  c.label = merge_labels(mvol::read_labels(resolve(r.label)));
  c.validate();
  return c;
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  const auto mp = detail::manifest_path(path);
  std::ifstream f(mp);
  if (!f) throw ValidationError("cannot open manifest " + mp.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest " + mp.string() + ": " + e.what());
  }
  Dataset ds;
  ds.descriptor = parse_manifest(j, mp.parent_path());
  for (auto& r : ds.descriptor.cases) ds.cases.emplace(r.id, load_case(ds.descriptor, r));
  return ds;
}

/// Parses and validates a manifest, including every referenced volume.
inline DatasetDescriptor load_manifest(const std::filesystem::path& path) { return load_dataset(path).descriptor; }

}  // namespace mavseg
