// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include "mavseg/augment/augment.hpp"
#include "mavseg/harness/ablation.hpp"
#include "mavseg/harness/config.hpp"
#include "mavseg/harness/evaluate.hpp"
#include "mavseg/harness/finetune.hpp"
#include "mavseg/harness/inference.hpp"
#include "mavseg/harness/train.hpp"
#include "mavseg/nn/checkpoint.hpp"
#include "mavseg/nn/loss.hpp"
#include "mavseg/nn/model.hpp"
#include "mavseg/nn/ops.hpp"
#include "mavseg/nn/optim.hpp"
#include "mavseg/phantom/phantom.hpp"
#include "mavseg/routing/routing.hpp"
#include "mavseg/volume/dataset.hpp"
#include "mavseg/volume/manifest.hpp"
#include "mavseg/volume/mvol.hpp"
#include "mavseg/volume/preprocess.hpp"
#include "mavseg/volume/schedule.hpp"
