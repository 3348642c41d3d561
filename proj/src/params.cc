// Copyright 2026  The cifasr Authors
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

#include "cifasr/params.h"

#include <bit>
#include <cstring>
#include <fstream>

#include "cifasr/errors.h"

namespace cifasr {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes host byte order and assumes little-endian");

namespace {

constexpr char kMagic[8] = {'C', 'I', 'F', 'A', 'S', 'R', 'C', 'K'};
constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t Fnv1a(const void* data, std::size_t n, std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

template <typename T>
void WritePod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool ReadPod(std::istream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

}  // namespace

ModelParams::ModelParams(const ModelParams& other) { *this = other; }

ModelParams& ModelParams::operator=(const ModelParams& other) {
  if (this == &other) return *this;
  entries_.clear();
  index_ = other.index_;
  entries_.reserve(other.entries_.size());
  for (const auto& p : other.entries_) entries_.push_back(std::make_unique<Parameter>(*p));
  return *this;
}

Parameter& ModelParams::Add(std::string name, Tensor value, bool trainable) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name " + name);
  index_.emplace(name, entries_.size());
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = std::move(value);
  p->trainable = trainable;
  entries_.push_back(std::move(p));
  return *entries_.back();
}

Parameter& ModelParams::Get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("unknown parameter " + std::string(name));
  return *entries_[it->second];
}

const Parameter& ModelParams::Get(std::string_view name) const {
  return const_cast<ModelParams*>(this)->Get(name);
}

bool ModelParams::Contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t ModelParams::NumElements() const {
  std::size_t n = 0;
  for (const auto& p : entries_) n += p->value.size();
  return n;
}

std::size_t ModelParams::NumTrainable() const {
  std::size_t n = 0;
  for (const auto& p : entries_) n += p->trainable ? 1 : 0;
  return n;
}

void ModelParams::ZeroGrad() {
  for (auto& p : entries_) p->ClearGrad();
}

void ModelParams::SetTrainable(bool trainable) {
  for (auto& p : entries_) p->trainable = trainable;
}

bool HasPrefix(std::string_view name, std::string_view prefix) {
  return name.substr(0, prefix.size()) == prefix;
}

void SaveCheckpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  WritePod(os, kCheckpointVersion);
  WritePod(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    WritePod(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    WritePod(os, static_cast<std::uint8_t>(p->trainable ? 1 : 0));
    WritePod(os, static_cast<std::uint32_t>(p->value.ndim()));
    for (int d : p->value.shape()) WritePod(os, static_cast<std::int32_t>(d));
    const std::size_t bytes = p->value.size() * sizeof(double);
    WritePod(os, Fnv1a(p->value.data(), bytes));
    os.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(bytes));
  }
  if (!os) throw FormatError("failed writing checkpoint " + path.string());
}

ModelParams LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  std::uint32_t version = 0, count = 0;
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + ": not a checkpoint file");
  }
  if (!ReadPod(is, version) || version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  if (!ReadPod(is, count)) throw FormatError(path.string() + ": truncated header");
  ModelParams params;
  std::string previous = "<header>";
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    if (!ReadPod(is, name_len) || name_len == 0 || name_len > 4096) {
      throw FormatError(path.string() + ": corrupt record after parameter " + previous);
    }
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) {
      throw FormatError(path.string() + ": truncated name after parameter " + previous);
    }
    const auto fail = [&](const std::string& what) {
      return FormatError(path.string() + ": parameter " + name + ": " + what);
    };
    std::uint8_t trainable = 0;
    std::uint32_t ndim = 0;
    if (!ReadPod(is, trainable) || !ReadPod(is, ndim) || ndim == 0 || ndim > 8) {
      throw fail("bad header");
    }
    Shape shape(ndim);
    std::size_t volume = 1;
    for (auto& d : shape) {
      std::int32_t v = 0;
      if (!ReadPod(is, v) || v <= 0) throw fail("bad shape");
      d = v;
      volume *= static_cast<std::size_t>(v);
    }
    std::uint64_t checksum = 0;
    if (!ReadPod(is, checksum)) throw fail("truncated");
    std::vector<double> values(volume);
    if (!is.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(volume * sizeof(double)))) {
      throw fail("truncated values");
    }
    if (Fnv1a(values.data(), volume * sizeof(double)) != checksum) throw fail("checksum mismatch");
    if (params.Contains(name)) throw fail("duplicate name");
    params.Add(name, Tensor(shape, std::move(values)), trainable != 0);
    previous = name;
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after parameter " + previous);
  }
  return params;
}

ModelParams AverageParams(const std::vector<ModelParams>& sets) {
  if (sets.empty()) throw ContractError("average of zero checkpoints");
  // mean = first + Σ (other − first)/N, which is exact for identical sets and
  // for {p, −p}.
  ModelParams avg = sets.front();
  const double n = static_cast<double>(sets.size());
  for (std::size_t s = 1; s < sets.size(); ++s) {
    if (sets[s].size() != avg.size()) throw ContractError("checkpoint parameter sets differ");
    for (auto& p : avg) {
      if (!sets[s].Contains(p->name)) {
        throw ContractError("checkpoint " + std::to_string(s) + " lacks parameter " + p->name);
      }
      const Parameter& q = sets[s].Get(p->name);
      if (q.value.shape() != p->value.shape()) {
        throw ContractError("shape mismatch for parameter " + p->name);
      }
      const Parameter& first = sets.front().Get(p->name);
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        p->value[i] += (q.value[i] - first.value[i]) / n;
      }
    }
  }
  for (auto& p : avg) p->ClearGrad();
  return avg;
}

std::uint64_t Fingerprint(const ModelParams& params, std::string_view prefix, bool exclude) {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : params) {
    if (HasPrefix(p->name, prefix) == exclude) continue;
    h = Fnv1a(p->name.data(), p->name.size(), h);
    h = Fnv1a(p->value.data(), p->value.size() * sizeof(double), h);
  }
  return h;
}

}  // namespace cifasr
