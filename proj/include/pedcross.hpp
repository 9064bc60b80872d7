// Copyright 2026 The pedcross Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "pedcross/bundle_io.hpp"
#include "pedcross/dataset.hpp"
#include "pedcross/densify.hpp"
#include "pedcross/error.hpp"
#include "pedcross/geometry.hpp"
#include "pedcross/image.hpp"
#include "pedcross/metrics.hpp"
#include "pedcross/model.hpp"
#include "pedcross/nn/autodiff.hpp"
#include "pedcross/nn/checkpoint.hpp"
#include "pedcross/nn/grad_check.hpp"
#include "pedcross/nn/layers.hpp"
#include "pedcross/nn/ops.hpp"
#include "pedcross/nn/optim.hpp"
#include "pedcross/nn/tensor.hpp"
#include "pedcross/random.hpp"
#include "pedcross/rasterizer.hpp"
#include "pedcross/sampling.hpp"
#include "pedcross/scene_model.hpp"
#include "pedcross/synthetic.hpp"
#include "pedcross/training.hpp"
