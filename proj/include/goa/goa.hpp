// Copyright (c) 2026 The goa Authors. All Rights Reserved.
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

// Everything except the HTTP clients (goa/http.hpp).

#include "goa/error.hpp"
#include "goa/rng.hpp"
#include "goa/tensor.hpp"
#include "goa/nn.hpp"
#include "goa/optim.hpp"
#include "goa/gradcheck.hpp"
#include "goa/graph.hpp"
#include "goa/task.hpp"
#include "goa/records.hpp"
#include "goa/params.hpp"
#include "goa/embedding.hpp"
#include "goa/model.hpp"
#include "goa/training.hpp"
#include "goa/exploration.hpp"
#include "goa/harness.hpp"
#include "goa/scripted.hpp"
#include "goa/pool_library.hpp"
