//
// Copyright 2026 The fpca Authors
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
//

#pragma once

#include "fpca/datasets.hpp"
#include "fpca/edge.hpp"
#include "fpca/error.hpp"
#include "fpca/federation.hpp"
#include "fpca/linalg.hpp"
#include "fpca/matrix.hpp"
#include "fpca/metrics.hpp"
#include "fpca/privacy.hpp"
#include "fpca/random.hpp"
#include "fpca/version.hpp"
