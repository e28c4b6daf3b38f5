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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "radioasr/error.h"
#include "radioasr/signal.h"

namespace radioasr {
namespace {

std::uint32_t ReadU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t ReadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("ReadWav: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError("ReadWav: " + path + " is not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size())
      throw IoError("ReadWav: truncated chunk in " + path);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw IoError("ReadWav: short fmt chunk in " + path);
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t format = ReadU16(f), channels = ReadU16(f + 2),
                          bits = ReadU16(f + 14);
      rate = ReadU32(f + 4);
      if (format != 1 || channels != 1 || bits != 16)
        throw IoError("ReadWav: " + path +
                      " must be PCM 16-bit mono (format=" +
                      std::to_string(format) + ", channels=" +
                      std::to_string(channels) + ", bits=" +
                      std::to_string(bits) + ")");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw IoError("ReadWav: data before fmt in " + path);
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(size / 2);
      const unsigned char* d = bytes.data() + body;
      for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = static_cast<std::int16_t>(ReadU16(d + 2 * i)) / 32768.0;
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw IoError("ReadWav: no data chunk in " + path);
}

void WriteWav(const std::string& path, const Waveform& w) {
  if (!(w.sample_rate > 0)) throw InvalidInputError("WriteWav: bad sample rate");
  const auto rate = static_cast<std::uint32_t>(std::lround(w.sample_rate));
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  PutU32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, 1);  // PCM
  PutU16(out, 1);  // mono
  PutU32(out, rate);
  PutU32(out, rate * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  out += "data";
  PutU32(out, data_bytes);
  for (double x : w.samples) {
    const double scaled = std::round(std::clamp(x, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    PutU16(out, static_cast<std::uint16_t>(v));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("WriteWav: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("WriteWav: write failed for " + path);
}

}  // namespace radioasr
