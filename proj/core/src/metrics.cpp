#include "icnf/metrics.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "icnf/error.hpp"

namespace icnf::metrics {

namespace {

// Average (1-based) ranks, ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

void check_paired(std::span<const double> a, std::span<const double> b, const char* name) {
  if (a.size() != b.size()) throw Error(std::string(name) + ": samples differ in length");
  if (a.size() < 2) throw Error(std::string(name) + ": need at least 2 pairs");
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error("auc: scores and labels differ in length");
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error("auc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("auc: both classes must be present");
  for (double s : scores) {
    if (std::isnan(s)) throw Error("auc: NaN score");
  }
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  const double n_p = static_cast<double>(n_pos);
  const double u = rank_sum - n_p * (n_p + 1.0) / 2.0;
  return u / (n_p * static_cast<double>(n_neg));
}

TestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  check_paired(a, b, "paired_ttest");
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TestResult result;
  result.df = n - 1;
  if (!(sd > 0.0)) {
    result.defined = false;
    result.p_value = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const double df = static_cast<double>(result.df);
  result.statistic = t;
  result.p_value = boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
  return result;
}

TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  check_paired(a, b, "wilcoxon_signed_rank");
  std::vector<double> magnitude;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0.0) continue;
    magnitude.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  TestResult result;
  result.df = magnitude.size();
  if (magnitude.empty()) {
    result.defined = false;
    result.p_value = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  const auto ranks = average_ranks(magnitude);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (positive[i]) w_plus += ranks[i];
  }
  const double n = static_cast<double>(magnitude.size());
  double tie_term = 0.0;
  std::vector<double> sorted = magnitude;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  result.statistic = w_plus;
  if (!(var > 0.0)) {
    result.defined = false;
    result.p_value = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  const double z = (w_plus - mean) / std::sqrt(var);
  result.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
  return result;
}

}  // namespace icnf::metrics
