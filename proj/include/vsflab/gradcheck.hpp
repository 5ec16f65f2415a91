#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vsflab/rng.hpp"
#include "vsflab/tensor.hpp"

namespace vsflab {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolOps = 1e-5;
inline constexpr double kGradCheckTolEndToEnd = 1e-4;

// Central finite differences against an analytic gradient.
//
// `eval` returns the scalar loss at the current contents of `params`; the
// harness perturbs the tensors in place one element at a time and restores
// them. `analytic` holds one gradient tensor per param, same shapes.
//
// Error metric: |a - n| / max(|a|, |n|, 0.01). The floor turns the test into
// an absolute one (at tol/100) for near-zero gradients, where the relative
// quotient is dominated by finite-difference roundoff.
GradCheckResult finite_diff_compare(const std::string& name,
                                    const std::vector<Tensor*>& params,
                                    const std::function<double()>& eval,
                                    const std::vector<Tensor>& analytic,
                                    double step = kGradCheckStep,
                                    double tol = kGradCheckTolOps);

// Fills a tensor with uniform deviates in [-1, 1).
void fill_uniform(Tensor& t, Rng& rng, double lo = -1.0, double hi = 1.0);

// Per-operation checks plus the end-to-end micro detector check.
// Scopes: "tensorcore", "vsf", "detector", "all".
std::vector<GradCheckResult> run_gradcheck_suite(const std::string& scope,
                                                 std::uint64_t seed);

}  // namespace vsflab
