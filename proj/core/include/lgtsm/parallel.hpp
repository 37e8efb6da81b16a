// Copyright 2026 The LGTSM Authors. All Rights Reserved.
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

namespace lgtsm {

// Worker-thread cap for kernels that parallelize over frames. A value of 1
// gives the deterministic single-threaded mode.
int num_threads();
void set_num_threads(int n);

// Applies LGTSM_THREADS from the environment, if set and positive.
void configure_threads_from_env();

}  // namespace lgtsm
