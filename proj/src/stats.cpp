#include "adebias/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "adebias/rng.hpp"

namespace adebias::stats {

namespace {

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

void require_non_empty(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("hypothesis test requires two non-empty groups");
  }
}

// Midranks of the pooled sample plus the tie-group sizes.
std::pair<std::vector<double>, std::vector<std::size_t>> midranks(
    const std::vector<double>& pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<double> ranks(n);
  std::vector<std::size_t> tie_sizes;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average of ranks i+1..j+1
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    tie_sizes.push_back(j - i + 1);
    i = j + 1;
  }
  return {std::move(ranks), std::move(tie_sizes)};
}

// Exact two-sided p: the fraction of the C(N, n_a) group assignments whose
// |U - n_a n_b / 2| is at least the observed deviation. Midranks of the pooled
// multiset are fixed, so U for an assignment is a rank-subset sum.
double exact_two_sided_p(const std::vector<double>& ranks, std::size_t n_a, double u_obs_dev) {
  const std::size_t n = ranks.size();
  const double center = static_cast<double>(n_a * (n - n_a)) / 2.0;
  const double offset = static_cast<double>(n_a * (n_a + 1)) / 2.0;

  std::vector<std::size_t> idx(n_a);
  std::iota(idx.begin(), idx.end(), 0);
  std::uint64_t total = 0, extreme = 0;
  while (true) {
    double rank_sum = 0.0;
    for (std::size_t i : idx) rank_sum += ranks[i];
    const double u = rank_sum - offset;
    ++total;
    if (std::abs(u - center) >= u_obs_dev) ++extreme;
    // next combination
    std::size_t i = n_a;
    while (i-- > 0) {
      if (idx[i] != i + n - n_a) {
        ++idx[i];
        for (std::size_t j = i + 1; j < n_a; ++j) idx[j] = idx[j - 1] + 1;
        break;
      }
      if (i == 0) return static_cast<double>(extreme) / static_cast<double>(total);
    }
  }
}

}  // namespace

TestResult bootstrap_test(const std::vector<double>& a, const std::vector<double>& b,
                          std::size_t iterations, std::uint64_t seed) {
  require_non_empty(a, b);
  if (iterations < 1000) {
    throw std::invalid_argument("bootstrap test requires at least 1000 iterations");
  }
  const double mean_a = mean_of(a);
  const double mean_b = mean_of(b);
  const double observed = mean_a - mean_b;

  // Shift both groups onto the pooled mean (the null of no mean difference).
  double pooled = 0.0;
  for (double v : a) pooled += v;
  for (double v : b) pooled += v;
  pooled /= static_cast<double>(a.size() + b.size());
  std::vector<double> null_a(a), null_b(b);
  for (double& v : null_a) v += pooled - mean_a;
  for (double& v : null_b) v += pooled - mean_b;

  Rng rng(seed);
  std::size_t at_least = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < null_a.size(); ++i) sa += null_a[rng.below(null_a.size())];
    for (std::size_t i = 0; i < null_b.size(); ++i) sb += null_b[rng.below(null_b.size())];
    const double diff = sa / static_cast<double>(null_a.size()) -
                        sb / static_cast<double>(null_b.size());
    if (diff >= observed) ++at_least;
  }

  TestResult r;
  r.kind = "bootstrap";
  r.statistic = observed;
  r.p_raw = static_cast<double>(at_least) / static_cast<double>(iterations);
  r.p_corrected = r.p_raw;
  return r;
}

TestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  require_non_empty(a, b);
  const std::size_t n_a = a.size();
  const std::size_t n_b = b.size();
  const std::size_t n = n_a + n_b;

  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  auto [ranks, tie_sizes] = midranks(pooled);

  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < n_a; ++i) rank_sum_a += ranks[i];
  const double u_a = rank_sum_a - static_cast<double>(n_a * (n_a + 1)) / 2.0;
  const double u_b = static_cast<double>(n_a * n_b) - u_a;
  const double center = static_cast<double>(n_a * n_b) / 2.0;

  TestResult r;
  r.kind = "mann-whitney";
  r.statistic = std::min(u_a, u_b);

  if (n <= 12) {
    r.p_raw = exact_two_sided_p(ranks, n_a, std::abs(u_a - center));
  } else {
    double tie_term = 0.0;
    for (std::size_t t : tie_sizes) {
      tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
    }
    const double nd = static_cast<double>(n);
    const double var = static_cast<double>(n_a * n_b) / 12.0 *
                       ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
    if (var <= 0.0) {
      r.p_raw = 1.0;  // every pooled value tied
    } else {
      const double z = std::max(0.0, std::abs(u_a - center) - 0.5) / std::sqrt(var);
      r.p_raw = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    }
  }
  r.p_corrected = r.p_raw;
  return r;
}

double bonferroni(double raw_p, int m) {
  if (m < 1) throw std::invalid_argument("bonferroni correction factor must be >= 1");
  if (!(raw_p >= 0.0 && raw_p <= 1.0)) {
    throw std::invalid_argument("p-value must lie in [0,1]");
  }
  return std::min(1.0, raw_p * static_cast<double>(m));
}

TestResult with_bonferroni(TestResult result, int m) {
  result.correction_factor = m;
  result.p_corrected = bonferroni(result.p_raw, m);
  return result;
}

}  // namespace adebias::stats
