#include "vsflab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace vsflab {

GradCheckResult finite_diff_compare(const std::string& name,
                                    const std::vector<Tensor*>& params,
                                    const std::function<double()>& eval,
                                    const std::vector<Tensor>& analytic,
                                    double step, double tol) {
  require(params.size() == analytic.size(),
          "finite_diff_compare: param/gradient count mismatch");
  GradCheckResult r;
  r.name = name;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    require(t.same_shape(analytic[p]),
            "finite_diff_compare: gradient shape mismatch for param " +
                std::to_string(p));
    for (std::int64_t i = 0; i < t.size(); ++i) {
      const double keep = t[i];
      t[i] = keep + step;
      const double up = eval();
      t[i] = keep - step;
      const double dn = eval();
      t[i] = keep;
      const double numeric = (up - dn) / (2.0 * step);
      const double a = analytic[p][i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-2});
      r.max_rel_err = std::max(r.max_rel_err, rel);
    }
  }
  r.pass = r.max_rel_err < tol;
  return r;
}

void fill_uniform(Tensor& t, Rng& rng, double lo, double hi) {
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
}

}  // namespace vsflab
