// Copyright 2026 The radioasr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RADIOASR_PARALLEL_H_
#define RADIOASR_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace radioasr {

// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = hardware
// concurrency, 1 = inline on the caller). Each index runs exactly once; the
// first exception thrown by any task is rethrown on the caller after all
// threads have joined. Callers that need deterministic results write into
// per-index slots and reduce in index order afterwards.
void ParallelFor(std::size_t n, std::size_t workers,
                 const std::function<void(std::size_t)>& fn);

std::size_t ResolveWorkers(std::size_t workers);

}  // namespace radioasr

#endif  // RADIOASR_PARALLEL_H_
