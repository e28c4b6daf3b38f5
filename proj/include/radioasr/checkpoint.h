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

#ifndef RADIOASR_CHECKPOINT_H_
#define RADIOASR_CHECKPOINT_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "radioasr/tensor.h"

namespace radioasr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  ad::Shape shape;
  std::vector<double> data;
};

// File layout, all integers little-endian:
//   "RASRCKPT" u32 version
//   u32 n_meta, then (u32 len, key bytes, u32 len, value bytes) pairs
//   u32 n_arrays, then per array: u32 len, name, u8 dtype (1 = float64),
//   u32 ndim, u64 dims...
//   raw float64 data of every array in manifest order.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<NamedArray> arrays;

  const NamedArray* Find(const std::string& name) const;
  const NamedArray& Get(const std::string& name) const;
  void Put(std::string name, ad::Shape shape, std::vector<double> data);
};

// Atomic: writes `path`.tmp and renames over `path`.
void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace radioasr

#endif  // RADIOASR_CHECKPOINT_H_
