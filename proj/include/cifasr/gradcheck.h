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

#ifndef CIFASR_GRADCHECK_H_
#define CIFASR_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cifasr/autodiff.h"

namespace cifasr {

struct GradCheckOptions {
  double step = 1e-5;
  // Denominator floor of the relative error, so that entries whose true
  // gradient is ~0 are judged on absolute error instead.
  double rel_floor = 1e-6;
  // Check at most this many randomly chosen entries per parameter (≤0: all).
  int max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;

  bool Passed(double tol) const { return max_rel_error < tol; }
};

// Compares the taped gradient of a scalar function with central differences
// (f(x+h) − f(x−h)) / 2h.  `f` builds a fresh graph on the supplied tape,
// binding the checked parameters via Tape::param.  Parameter gradients are
// cleared before and after.
GradCheckReport grad_check(const std::function<Var(Tape&)>& f,
                           const std::vector<Parameter*>& params,
                           const GradCheckOptions& options = {});

}  // namespace cifasr

#endif  // CIFASR_GRADCHECK_H_
