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

#ifndef RADIOASR_CONFIG_H_
#define RADIOASR_CONFIG_H_

#include <map>
#include <string>
#include <vector>

namespace radioasr {

// Flat `section.key = value` settings. Lines starting with '#' and blank
// lines are ignored; a repeated key keeps the last value.
class Config {
 public:
  static Config Parse(const std::string& text, const std::string& origin = "<string>");
  static Config Load(const std::string& path);

  void Set(const std::string& key, const std::string& value);
  bool Has(const std::string& key) const { return values_.count(key) > 0; }

  std::string GetString(const std::string& key, const std::string& fallback) const;
  double GetDouble(const std::string& key, double fallback) const;
  long long GetInt(const std::string& key, long long fallback) const;
  bool GetBool(const std::string& key, bool fallback) const;

  // Keys present here but absent from `known`; callers reject typos with it.
  std::vector<std::string> UnknownKeys(const std::vector<std::string>& known) const;

  // Sorted `key = value` lines; Parse(Dump()) round-trips.
  std::string Dump() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace radioasr

#endif  // RADIOASR_CONFIG_H_
