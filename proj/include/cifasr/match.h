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

#ifndef CIFASR_MATCH_H_
#define CIFASR_MATCH_H_

#include <random>
#include <span>
#include <string>
#include <vector>

#include "cifasr/layers.h"

namespace cifasr {

// Residue of at least this fraction of the threshold fires one last time.
inline constexpr double kCifTailFraction = 0.5;

struct CifWeights {
  Var a;  // shape {L}
  bool scaled = false;
  double scale_factor = 1.0;

  int length() const { return a.value().dim(0); }
  double Sum() const;
};

// One fired embedding: which frames fed it and how much of each.
struct FireSpan {
  int fire_frame = -1;
  std::vector<int> frames;
  std::vector<double> portions;

  double Total() const;
};

struct CifOutput {
  Var c;  // I'×d; invalid when nothing fired
  std::vector<FireSpan> fires;

  int num_fires() const { return static_cast<int>(fires.size()); }
  std::vector<int> FireFrames() const;
};

struct CifOptions {
  double threshold = 1.0;
  // Apply the tail rule to the trailing residue.
  bool fire_tail = true;
  // Fire whatever residue is left when the regular rules produce no fire.
  bool force_nonempty = false;
};

struct SyllableEncoderConfig {
  int num_blocks = 4;
  int d_model = 256;
  int num_heads = 4;
  int d_ffn = 2048;
  double dropout = 0.1;
};

// Weight head: conv1d(k3,s1,p1) → GELU → linear(d→1) → sigmoid.
void InitCifWeightParams(ModelParams& params, int d_model, std::mt19937_64& rng);
void InitSyllableEncoderParams(ModelParams& params, const SyllableEncoderConfig& config,
                               int syllable_vocab, std::mt19937_64& rng);

// Rows ≥ valid_len get weight exactly 0.
CifWeights cif_weights(ForwardContext& ctx, const Var& h, int valid_len);

// a'_l = a_l · I / Σa.  Throws DegenerateWeightsError when Σa is not positive.
CifWeights scale_weights(const CifWeights& w, int target_length);

// Integrate-and-fire over the cumulative weight: fire i collects, from every
// frame u, the overlap of [A_{u−1}, A_u] with [(i−1)β, iβ], where A is the
// running sum of `a`.  Reaching β exactly fires with nothing carried over.
CifOutput cif_fire(const Var& h, const CifWeights& w, const CifOptions& options = {});

// |Σa − I| on the unscaled weights.
Var quantity_loss(const CifWeights& w, int target_length);

// Embedding·√d + positional encoding → transformer blocks → layer norm.
// Ids outside the embedding table are a ContractError.
Var syllable_encode(ForwardContext& ctx, std::span<const int> syllables,
                    const SyllableEncoderConfig& config);

// Mean of |c − s| over all elements.  Shape mismatch is a ContractError.
Var mae_loss(const Var& c, const Var& s);

// {"fires":[{"frame":u,"frames":[...],"portions":[...]},...],"weights":[...]}
std::string FireBoundariesJson(const CifOutput& out, const CifWeights& w);

}  // namespace cifasr

#endif  // CIFASR_MATCH_H_
