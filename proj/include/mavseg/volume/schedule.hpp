// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mavseg/rng.hpp"
#include "mavseg/volume/dataset.hpp"

namespace mavseg {

struct ScheduleEntry {
  std::size_t dataset = 0;
  std::string case_id;

  bool operator==(const ScheduleEntry&) const = default;
};

/// One epoch of training samples. Every dataset is oversampled to the size of the
/// largest training split: a split of size s contributes exactly max entries,
/// each case appearing floor(max/s) or ceil(max/s) times.
inline std::vector<ScheduleEntry> oversample_schedule(const DatasetCollection& collection, Rng& rng) {
  require(collection.size() > 0, "oversample_schedule: empty collection");
  std::size_t largest = 0;
  for (auto& d : collection.datasets) {
    require(!d.descriptor.split.train.empty(), "oversample_schedule: dataset " + d.descriptor.name + " has no training cases");
    largest = std::max(largest, d.descriptor.split.train.size());
  }
  std::vector<ScheduleEntry> out;
  out.reserve(largest * collection.size());
  for (std::size_t di = 0; di < collection.size(); ++di) {
    const auto& ids = collection.datasets[di].descriptor.split.train;
    const std::size_t reps = largest / ids.size();
    for (std::size_t r = 0; r < reps; ++r)
      for (auto& id : ids) out.push_back({di, id});
    std::vector<std::string> extra = ids;
    shuffle(extra, rng);
    for (std::size_t i = 0; i < largest % ids.size(); ++i) out.push_back({di, extra[i]});
  }
  shuffle(out, rng);
  return out;
}

}  // namespace mavseg
