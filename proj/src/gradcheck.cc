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

#include "cifasr/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cifasr/errors.h"

namespace cifasr {

namespace {

double Evaluate(const std::function<Var(Tape&)>& f) {
  Tape tape;
  return f(tape).value().item();
}

}  // namespace

GradCheckReport grad_check(const std::function<Var(Tape&)>& f,
                           const std::vector<Parameter*>& params,
                           const GradCheckOptions& options) {
  for (Parameter* p : params) p->ClearGrad();
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
  }
  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (Parameter* p : params) {
    const Tensor analytic = p->has_grad() ? p->grad : Tensor::ZerosLike(p->value);
    std::vector<std::size_t> entries(p->value.size());
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_param > 0 &&
        entries.size() > static_cast<std::size_t>(options.max_entries_per_param)) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(static_cast<std::size_t>(options.max_entries_per_param));
    }
    for (std::size_t i : entries) {
      const double saved = p->value[i];
      p->value[i] = saved + options.step;
      const double plus = Evaluate(f);
      p->value[i] = saved - options.step;
      const double minus = Evaluate(f);
      p->value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err =
          abs_err / std::max({std::abs(a), std::abs(numeric), options.rel_floor});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err > report.max_rel_error || report.entries_checked == 0) {
        report.max_rel_error = std::max(report.max_rel_error, rel_err);
        report.worst_param = p->name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
      ++report.entries_checked;
    }
  }
  for (Parameter* p : params) p->ClearGrad();
  return report;
}

}  // namespace cifasr
