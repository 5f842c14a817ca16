#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace adebias::stats {

struct TestResult {
  std::string kind;          // "bootstrap" or "mann-whitney"
  double statistic = 0.0;    // observed mean difference, resp. U
  double p_raw = 1.0;
  double p_corrected = 1.0;  // min(1, p_raw * correction_factor)
  int correction_factor = 1;
};

// One-sided bootstrap test of H0 "the difference of means is zero" against
// mean(a) > mean(b). Both groups are centered on the pooled mean, resampled
// with replacement, and the p-value is the fraction of resampled mean
// differences >= the observed one (ties count). Deterministic given seed.
TestResult bootstrap_test(const std::vector<double>& a, const std::vector<double>& b,
                          std::size_t iterations, std::uint64_t seed);

// Two-sided Mann-Whitney U test with midrank tie handling. Exact by full
// enumeration of group assignments when |a|+|b| <= 12; otherwise a normal
// approximation with tie-corrected variance and continuity correction.
// The reported statistic is min(U_a, U_b).
TestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

// min(1, raw_p * m)
double bonferroni(double raw_p, int m);

TestResult with_bonferroni(TestResult result, int m);

}  // namespace adebias::stats
