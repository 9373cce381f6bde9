#pragma once

#include "rdif/irt.hpp"

#include <span>
#include <vector>

namespace rdif {

/// One stratum: rows are reference/focal, columns correct/incorrect.
struct Table2x2 {
  double ref_correct = 0.0;
  double ref_incorrect = 0.0;
  double focal_correct = 0.0;
  double focal_incorrect = 0.0;
};

/// Continuity-corrected MH chi-square, max(0, |sum A - sum E| - 0.5)^2 / sum V.
/// Strata with fewer than two respondents contribute nothing.
/// Throws NumericalError when no stratum has nonzero variance.
double mh_chi_square(std::span<const Table2x2> strata);

struct MhResult {
  double chi2 = 0.0;
  double p = 1.0;
  bool flag = false;
};

/// Group 0 is the reference group. Respondents are matched on the total score
/// including the studied item.
std::vector<MhResult> mantel_haenszel(const ResponseMatrix& data0, const ResponseMatrix& data1,
                                      double alpha);

}  // namespace rdif
