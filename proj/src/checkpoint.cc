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

#include "radioasr/checkpoint.h"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "radioasr/error.h"

namespace radioasr {

namespace {

constexpr char kMagic[8] = {'R', 'A', 'S', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kFloat64 = 1;

template <typename T>
void PutLe(std::string& buf, T v) {
  std::make_unsigned_t<T> u = static_cast<std::make_unsigned_t<T>>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>(u >> (8 * i)));
}

void PutString(std::string& buf, const std::string& s) {
  PutLe<std::uint32_t>(buf, static_cast<std::uint32_t>(s.size()));
  buf += s;
}

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  template <typename T>
  T Le() {
    Need(sizeof(T));
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  std::string Bytes(std::size_t n) {
    Need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string String() { return Bytes(Le<std::uint32_t>()); }
  bool AtEnd() const { return pos_ == data_.size(); }

 private:
  void Need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw IoError("checkpoint " + path_ + " is truncated");
  }
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

const NamedArray* Checkpoint::Find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const NamedArray& Checkpoint::Get(const std::string& name) const {
  const NamedArray* a = Find(name);
  if (!a) throw InvalidInputError("checkpoint has no array '" + name + "'");
  return *a;
}

void Checkpoint::Put(std::string name, ad::Shape shape, std::vector<double> data) {
  if (ad::NumElements(shape) != data.size())
    throw InvalidInputError("checkpoint: size mismatch for " + name);
  if (Find(name)) throw InvalidInputError("checkpoint: duplicate array " + name);
  arrays.push_back({std::move(name), std::move(shape), std::move(data)});
}

void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string buf(kMagic, sizeof kMagic);
  PutLe<std::uint32_t>(buf, kCheckpointVersion);
  PutLe<std::uint32_t>(buf, static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    PutString(buf, k);
    PutString(buf, v);
  }
  PutLe<std::uint32_t>(buf, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& a : ckpt.arrays) {
    PutString(buf, a.name);
    buf.push_back(static_cast<char>(kFloat64));
    PutLe<std::uint32_t>(buf, static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) PutLe<std::uint64_t>(buf, d);
  }
  for (const auto& a : ckpt.arrays)
    for (double v : a.data) PutLe<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(v));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("error writing checkpoint " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path);
  if (r.Bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic))
    throw IoError(path + " is not a checkpoint");
  const auto version = r.Le<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IoError("checkpoint " + path + " has unsupported version " +
                  std::to_string(version));
  Checkpoint ckpt;
  const auto n_meta = r.Le<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.String();
    ckpt.meta[k] = r.String();
  }
  const auto n_arrays = r.Le<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    NamedArray a;
    a.name = r.String();
    if (r.Le<std::uint8_t>() != kFloat64)
      throw IoError("checkpoint " + path + ": unsupported dtype for " + a.name);
    const auto ndim = r.Le<std::uint32_t>();
    for (std::uint32_t d = 0; d < ndim; ++d) a.shape.push_back(r.Le<std::uint64_t>());
    ckpt.arrays.push_back(std::move(a));
  }
  for (auto& a : ckpt.arrays) {
    a.data.resize(ad::NumElements(a.shape));
    for (double& v : a.data) v = std::bit_cast<double>(r.Le<std::uint64_t>());
  }
  if (!r.AtEnd()) throw IoError("checkpoint " + path + " has trailing bytes");
  return ckpt;
}

}  // namespace radioasr
