// Copyright 2026 The mobgroups Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "mobgroups/clustering.hpp"
#include "mobgroups/distances.hpp"
#include "mobgroups/group_analysis.hpp"
#include "mobgroups/profilecast.hpp"
#include "mobgroups/summaries.hpp"
#include "mobgroups/synth.hpp"
#include "mobgroups/trace_model.hpp"

namespace mobgroups {
inline constexpr const char* kVersion = "0.1.0";
}
