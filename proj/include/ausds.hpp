// Copyright 2026 The AUSDS Authors
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

#include "ausds/active_loop.hpp"
#include "ausds/attacks.hpp"
#include "ausds/config.hpp"
#include "ausds/dataset.hpp"
#include "ausds/decoder.hpp"
#include "ausds/encoder.hpp"
#include "ausds/entropy.hpp"
#include "ausds/error.hpp"
#include "ausds/evaluation.hpp"
#include "ausds/exact_index.hpp"
#include "ausds/experiment_log.hpp"
#include "ausds/formats.hpp"
#include "ausds/latent_mapper.hpp"
#include "ausds/linalg.hpp"
#include "ausds/log.hpp"
#include "ausds/random.hpp"
#include "ausds/reports.hpp"
#include "ausds/runner.hpp"
#include "ausds/sampler.hpp"
#include "ausds/store.hpp"
#include "ausds/synthetic.hpp"
#include "ausds/timer.hpp"
