#pragma once

#include <span>

namespace icnf::metrics {

/// ROC AUC as the Mann-Whitney U statistic over n_pos * n_neg pairs, ties
/// counted 0.5. Labels are 0/1; throws when either class is absent.
double auc(std::span<const double> scores, std::span<const int> labels);

struct TestResult {
  double statistic = 0.0;
  double p_value = 0.0;
  /// False when the differences have zero variance; `p_value` is then NaN.
  bool defined = true;
  std::size_t df = 0;
};

/// Paired two-sided t-test on a - b with df = n - 1. The p-value comes from
/// the regularized incomplete beta function: p = I_{df/(df+t^2)}(df/2, 1/2).
TestResult paired_ttest(std::span<const double> a, std::span<const double> b);

/// Wilcoxon signed-rank test on a - b (zero differences dropped), two-sided,
/// normal approximation with tie correction. `statistic` is W+.
TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

}  // namespace icnf::metrics
