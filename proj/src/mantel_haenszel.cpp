#include "rdif/mantel_haenszel.hpp"

#include "rdif/error.hpp"
#include "rdif/normal.hpp"

#include <algorithm>
#include <cmath>

namespace rdif {

double mh_chi_square(std::span<const Table2x2> strata) {
  double sum_a = 0.0;
  double sum_e = 0.0;
  double sum_v = 0.0;
  for (const Table2x2& t : strata) {
    const double n_ref = t.ref_correct + t.ref_incorrect;
    const double n_focal = t.focal_correct + t.focal_incorrect;
    const double correct = t.ref_correct + t.focal_correct;
    const double incorrect = t.ref_incorrect + t.focal_incorrect;
    const double total = n_ref + n_focal;
    if (total < 2.0) continue;
    sum_a += t.ref_correct;
    sum_e += n_ref * correct / total;
    sum_v += n_ref * n_focal * correct * incorrect / (total * total * (total - 1.0));
  }
  if (!(sum_v > 0.0)) throw NumericalError("no usable strata");
  const double dev = std::max(0.0, std::abs(sum_a - sum_e) - 0.5);
  return dev * dev / sum_v;
}

std::vector<MhResult> mantel_haenszel(const ResponseMatrix& data0, const ResponseMatrix& data1,
                                      double alpha) {
  if (data0.m != data1.m) throw ValidationError("groups have different item counts");
  if (data0.n < 1 || data1.n < 1) throw ValidationError("each group needs a respondent");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
  const int m = data0.m;

  auto totals = [m](const ResponseMatrix& data) {
    std::vector<int> s(data.n, 0);
    for (int p = 0; p < data.n; ++p) {
      for (int i = 0; i < m; ++i) s[p] += data.at(p, i);
    }
    return s;
  };
  const std::vector<int> s0 = totals(data0);
  const std::vector<int> s1 = totals(data1);

  std::vector<MhResult> out(m);
  std::vector<Table2x2> strata(m + 1);
  for (int i = 0; i < m; ++i) {
    std::fill(strata.begin(), strata.end(), Table2x2{});
    for (int p = 0; p < data0.n; ++p) {
      (data0.at(p, i) ? strata[s0[p]].ref_correct : strata[s0[p]].ref_incorrect) += 1.0;
    }
    for (int p = 0; p < data1.n; ++p) {
      (data1.at(p, i) ? strata[s1[p]].focal_correct : strata[s1[p]].focal_incorrect) += 1.0;
    }
    MhResult& r = out[i];
    r.chi2 = mh_chi_square(strata);
    r.p = chi2_1df_sf(r.chi2);
    r.flag = r.p < alpha;
  }
  return out;
}

}  // namespace rdif
