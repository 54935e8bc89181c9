// Copyright 2026 The treeinfer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "treeinfer/error.hpp"
#include "treeinfer/model.hpp"
#include "treeinfer/model_io.hpp"
#include "treeinfer/dataset.hpp"
#include "treeinfer/predicated.hpp"
#include "treeinfer/layout.hpp"
#include "treeinfer/generated.hpp"
#include "treeinfer/synthgen.hpp"
#include "treeinfer/stats.hpp"
#include "treeinfer/bench.hpp"
