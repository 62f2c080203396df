#pragma once

#include <cstddef>
#include <vector>

namespace vog {

// Self-contained statistics used by the evaluation battery.
//
// The Student-t CDF is evaluated through the regularized incomplete beta
// function I_x(a, b), itself computed with the standard continued-fraction
// expansion (modified Lentz). Welch's two-sample test feeds fractional
// degrees of freedom into that CDF, so the beta route has to accept
// non-integer parameters; accuracy is ~1e-12 absolute over the ranges we
// touch. AUROC follows the Mann-Whitney midrank construction with ties
// counted one half, which keeps it exactly equal to brute-force pair
// counting: midranks are multiples of 1/2, so every intermediate sum is an
// exactly-representable double. AUPR sums precision over the distinct-score
// thresholds with no interpolation.

// I_x(a, b) for a, b > 0 and x in [0, 1].
double regularized_incomplete_beta(double a, double b, double x);

// P(T <= t) for Student's t with dof > 0 (possibly fractional).
double student_t_cdf(double t, double dof);

struct SampleSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n-1 divisor) when estimated
  std::size_t n = 0;
};

SampleSummary summarize(const std::vector<double>& xs);

struct WelchResult {
  double mean1, std1;
  std::size_t n1;
  double mean2, std2;
  std::size_t n2;
  double t_statistic;
  double degrees_of_freedom;  // Welch-Satterthwaite
  double p_value;             // two-sided
  double alpha;
  bool reject_at_alpha;
};

// Unequal-variance two-sample t-test from summary statistics.
// t = (m1 - m2) / sqrt(s1^2/n1 + s2^2/n2). Both spreads zero with equal
// means gives p = 1 by convention (and p = 0 when the means differ).
WelchResult welch_ttest(const SampleSummary& s1, const SampleSummary& s2, double alpha = 0.05);
WelchResult welch_ttest_samples(const std::vector<double>& xs, const std::vector<double>& ys,
                                double alpha = 0.05);

// Midranks (ties averaged), 1-based.
std::vector<double> midranks(const std::vector<double>& values);

// P(score_pos > score_neg) + 0.5 P(score_pos == score_neg).
double auroc(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg);

enum class PositiveClass { in_dist, out_dist };

// Area under the precision-recall step curve over all distinct thresholds.
// scores_pos/scores_neg are oriented so that higher means more
// in-distribution; out-mode negates the scores and swaps the positive class.
double aupr(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg,
            PositiveClass positive);

struct CorrelationResult {
  double pearson_r;
  double spearman_rho;
  double pearson_p;  // two-sided, via the t transformation
};

CorrelationResult correlations(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace vog
