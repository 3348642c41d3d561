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

#ifndef CIFASR_PARAMS_H_
#define CIFASR_PARAMS_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cifasr/autodiff.h"

namespace cifasr {

// Ordered registry of named parameters.  Names are namespaced by module
// ("encoder.", "cif.", "syllenc.", "ctc.", "ce.", "decoder.").  Parameter
// addresses are stable for the lifetime of the registry, so tapes may bind
// them by reference.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(const ModelParams& other);
  ModelParams& operator=(const ModelParams& other);
  ModelParams(ModelParams&&) noexcept = default;
  ModelParams& operator=(ModelParams&&) noexcept = default;

  Parameter& Add(std::string name, Tensor value, bool trainable = true);
  Parameter& Get(std::string_view name);
  const Parameter& Get(std::string_view name) const;
  bool Contains(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t NumElements() const;
  std::size_t NumTrainable() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.cbegin(); }
  auto end() const { return entries_.cend(); }

  void ZeroGrad();
  void SetTrainable(bool trainable);

 private:
  std::vector<std::unique_ptr<Parameter>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

bool HasPrefix(std::string_view name, std::string_view prefix);

// Checkpoint container: magic, format version, then per parameter its name,
// trainable flag, shape, an FNV-1a checksum and the raw little-endian float64
// values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void SaveCheckpoint(const ModelParams& params, const std::filesystem::path& path);
// Throws FormatError naming the offending parameter on any inconsistency.
ModelParams LoadCheckpoint(const std::filesystem::path& path);

// Elementwise mean of parameter sets with identical names and shapes;
// trainable flags come from the first set.
ModelParams AverageParams(const std::vector<ModelParams>& sets);

// FNV-1a over names and value bytes of every parameter accepted by `filter`
// (all parameters when the prefix is empty; `exclude` inverts the match).
std::uint64_t Fingerprint(const ModelParams& params, std::string_view prefix = {},
                          bool exclude = false);

}  // namespace cifasr

#endif  // CIFASR_PARAMS_H_
