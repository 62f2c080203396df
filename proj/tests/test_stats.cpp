#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "vog/errors.hpp"
#include "vog/stats.hpp"

using namespace vog;

namespace {

// ---------------------------------------------------------------------------
// quadrature oracle for the Student-t CDF: adaptive Simpson on the density

double t_density(double x, double dof) {
  const double c = std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0) -
                   0.5 * std::log(dof * 3.14159265358979323846);
  return std::exp(c - (dof + 1.0) / 2.0 * std::log1p(x * x / dof));
}

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(double a, double b, double fa, double fm, double fb, double whole,
                        double tol, int depth, double dof) {
  const double m = (a + b) / 2.0;
  const double lm = (a + m) / 2.0, rm = (m + b) / 2.0;
  const double flm = t_density(lm, dof), frm = t_density(rm, dof);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(a, m, fa, flm, fm, left, tol / 2.0, depth - 1, dof) +
         adaptive_simpson(m, b, fm, frm, fb, right, tol / 2.0, depth - 1, dof);
}

double t_cdf_quadrature(double t, double dof) {
  if (t < 0.0) return 1.0 - t_cdf_quadrature(-t, dof);
  const double fa = t_density(0.0, dof);
  const double fb = t_density(t, dof);
  const double fm = t_density(t / 2.0, dof);
  const double whole = simpson(0.0, t, fa, fm, fb);
  return 0.5 + adaptive_simpson(0.0, t, fa, fm, fb, whole, 1e-12, 40, dof);
}

// ---------------------------------------------------------------------------
// brute-force oracles

double auroc_pairs(const std::vector<double>& pos, const std::vector<double>& neg) {
  double acc = 0.0;
  for (double p : pos) {
    for (double n : neg) {
      if (p > n) acc += 1.0;
      else if (p == n) acc += 0.5;
    }
  }
  return acc / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// exhaustive threshold enumeration: for every distinct score, classify
// score >= threshold as predicted-positive and accumulate the step area
double aupr_enumerate(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<double> thresholds;
  thresholds.insert(thresholds.end(), pos.begin(), pos.end());
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  double area = 0.0, prev_recall = 0.0;
  for (double th : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (double p : pos)
      if (p >= th) ++tp;
    for (double n : neg)
      if (n >= th) ++fp;
    const double recall = static_cast<double>(tp) / static_cast<double>(pos.size());
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

}  // namespace

TEST_CASE("t CDF matches the quadrature oracle to 1e-8") {
  for (double dof : {1.0, 2.0, 2.5, 7.31, 12.0, 47.9, 120.0, 12704.4}) {
    for (double t : {0.0, 0.17, 0.5, 1.0, 1.96, 2.8, 4.5, 8.0}) {
      CHECK(std::fabs(student_t_cdf(t, dof) - t_cdf_quadrature(t, dof)) < 1e-8);
      CHECK(std::fabs(student_t_cdf(-t, dof) - t_cdf_quadrature(-t, dof)) < 1e-8);
    }
  }
}

TEST_CASE("t CDF basics") {
  CHECK(student_t_cdf(0.0, 5.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(student_t_cdf(1e6, 3.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(student_t_cdf(1.0, 0.0), ValidationError);
}

TEST_CASE("welch t-test on the reference summary blocks") {
  SUBCASE("first block") {
    const WelchResult r = welch_ttest({0.62, 0.54, 40000}, {0.85, 0.75, 10000});
    CHECK(r.p_value < 0.001);
    CHECK(r.reject_at_alpha);
    CHECK(r.t_statistic < 0.0);  // second mean is larger
    CHECK(r.degrees_of_freedom > 0.0);
  }
  SUBCASE("second block") {
    const WelchResult r = welch_ttest({0.54, 0.46, 40000}, {0.82, 0.71, 10000});
    CHECK(r.p_value < 0.001);
    CHECK(r.reject_at_alpha);
  }
}

TEST_CASE("welch t-test degenerate and symmetry cases") {
  SUBCASE("identical summaries: t = 0, p = 1") {
    const WelchResult r = welch_ttest({1.5, 0.3, 100}, {1.5, 0.3, 100});
    CHECK(r.t_statistic == 0.0);
    CHECK(r.p_value == doctest::Approx(1.0));
    CHECK_FALSE(r.reject_at_alpha);
  }
  SUBCASE("zero spread, equal means: p = 1 by convention") {
    const WelchResult r = welch_ttest({2.0, 0.0, 10}, {2.0, 0.0, 10});
    CHECK(r.p_value == 1.0);
    CHECK(r.degrees_of_freedom > 0.0);
  }
  SUBCASE("zero spread, distinct means") {
    const WelchResult r = welch_ttest({2.0, 0.0, 10}, {3.0, 0.0, 10});
    CHECK(r.p_value == 0.0);
    CHECK(r.reject_at_alpha);
  }
  SUBCASE("antisymmetric in t under swap, p unchanged") {
    const SampleSummary a{0.62, 0.54, 40000}, b{0.85, 0.75, 10000};
    const WelchResult ab = welch_ttest(a, b);
    const WelchResult ba = welch_ttest(b, a);
    CHECK(ab.t_statistic == doctest::Approx(-ba.t_statistic).epsilon(1e-14));
    CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));
    CHECK(ab.degrees_of_freedom == doctest::Approx(ba.degrees_of_freedom).epsilon(1e-14));
  }
  SUBCASE("n < 2 rejected") {
    CHECK_THROWS_AS(welch_ttest({1.0, 0.5, 1}, {2.0, 0.5, 10}), ValidationError);
  }
}

TEST_CASE("welch sample wrapper agrees with summary route") {
  std::mt19937 gen(7);
  std::normal_distribution<double> d1(0.0, 1.0), d2(0.5, 2.0);
  std::vector<double> xs, ys;
  for (int i = 0; i < 200; ++i) xs.push_back(d1(gen));
  for (int i = 0; i < 150; ++i) ys.push_back(d2(gen));
  const WelchResult via_samples = welch_ttest_samples(xs, ys);
  const WelchResult via_summary = welch_ttest(summarize(xs), summarize(ys));
  CHECK(via_samples.t_statistic == via_summary.t_statistic);
  CHECK(via_samples.p_value == via_summary.p_value);
}

TEST_CASE("auroc examples") {
  CHECK(auroc({0.9, 0.8}, {0.1, 0.2}) == 1.0);
  CHECK(auroc({0.8, 0.3}, {0.5, 0.1}) == 0.75);
  // same multiset on both sides
  CHECK(auroc({0.1, 0.5, 0.9}, {0.9, 0.5, 0.1}) == 0.5);
  CHECK_THROWS_AS(auroc({}, {1.0}), ValidationError);
}

TEST_CASE("auroc equals brute-force pair counting bit-for-bit") {
  std::mt19937 gen(42);
  for (int trial = 0; trial < 80; ++trial) {
    std::uniform_int_distribution<int> size_dist(1, 200);
    const int n_pos = size_dist(gen), n_neg = size_dist(gen);
    // coarse grid of score values so ties actually happen
    std::uniform_int_distribution<int> level(0, trial % 3 == 0 ? 4 : 1000);
    std::vector<double> pos, neg;
    for (int i = 0; i < n_pos; ++i) pos.push_back(level(gen) / 8.0);
    for (int i = 0; i < n_neg; ++i) neg.push_back(level(gen) / 8.0);
    const double fast = auroc(pos, neg);
    const double slow = auroc_pairs(pos, neg);
    CHECK(fast == slow);  // exact, not approximate
    CHECK(std::fabs(fast + auroc(neg, pos) - 1.0) < 1e-12);
  }
}

TEST_CASE("aupr examples and oracle agreement") {
  SUBCASE("perfect separation") {
    CHECK(aupr({0.9, 0.8}, {0.1, 0.2}, PositiveClass::in_dist) == 1.0);
  }
  SUBCASE("documented four-threshold case") {
    const double got = aupr({0.8, 0.3}, {0.5, 0.1}, PositiveClass::in_dist);
    CHECK(got == doctest::Approx(aupr_enumerate({0.8, 0.3}, {0.5, 0.1})).epsilon(1e-15));
  }
  SUBCASE("random instances match exhaustive enumeration within 1e-12") {
    std::mt19937 gen(3);
    for (int trial = 0; trial < 60; ++trial) {
      std::uniform_int_distribution<int> size_dist(1, 120);
      std::uniform_int_distribution<int> level(0, trial % 4 == 0 ? 6 : 500);
      std::vector<double> pos, neg;
      const int n_pos = size_dist(gen), n_neg = size_dist(gen);
      for (int i = 0; i < n_pos; ++i) pos.push_back(level(gen) / 16.0);
      for (int i = 0; i < n_neg; ++i) neg.push_back(level(gen) / 16.0);
      CHECK(std::fabs(aupr(pos, neg, PositiveClass::in_dist) - aupr_enumerate(pos, neg)) < 1e-12);
      // out-mode equals in-mode on negated, swapped inputs by construction;
      // check against an independently negated enumeration
      std::vector<double> npos, nneg;
      for (double v : neg) npos.push_back(-v);
      for (double v : pos) nneg.push_back(-v);
      CHECK(std::fabs(aupr(pos, neg, PositiveClass::out_dist) - aupr_enumerate(npos, nneg)) <
            1e-12);
    }
  }
  SUBCASE("balanced random scores approach the 0.5 base rate") {
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> pos, neg;
    for (int i = 0; i < 10000; ++i) {
      pos.push_back(u(gen));
      neg.push_back(u(gen));
    }
    CHECK(std::fabs(aupr(pos, neg, PositiveClass::in_dist) - 0.5) < 0.05);
  }
}

TEST_CASE("correlations") {
  SUBCASE("affine relation") {
    std::vector<double> xs{1, 2, 3, 4, 5}, ys;
    for (double x : xs) ys.push_back(2.0 * x + 1.0);
    const CorrelationResult r = correlations(xs, ys);
    CHECK(r.pearson_r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.spearman_rho == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.pearson_p < 0.01);
  }
  SUBCASE("monotone decreasing cube") {
    std::vector<double> xs{-2, -1, 0, 1, 2}, ys;
    for (double x : xs) ys.push_back(-x * x * x);
    CHECK(correlations(xs, ys).spearman_rho == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("hand-computed rank case") {
    const CorrelationResult r = correlations({1, 2, 3, 4}, {1, 3, 2, 4});
    CHECK(r.spearman_rho == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("zero variance is an error") {
    CHECK_THROWS_AS(correlations({1, 1, 1}, {1, 2, 3}), AnalysisError);
  }
  SUBCASE("permutation invariance") {
    std::vector<double> xs{0.3, 1.7, -2.0, 0.9, 5.5}, ys{1.0, 0.2, 3.3, -0.7, 2.2};
    const CorrelationResult a = correlations(xs, ys);
    std::vector<std::size_t> perm{4, 2, 0, 3, 1};
    std::vector<double> px, py;
    for (std::size_t i : perm) {
      px.push_back(xs[i]);
      py.push_back(ys[i]);
    }
    const CorrelationResult b = correlations(px, py);
    CHECK(a.pearson_r == doctest::Approx(b.pearson_r).epsilon(1e-14));
    CHECK(a.spearman_rho == doctest::Approx(b.spearman_rho).epsilon(1e-14));
  }
}

TEST_CASE("midranks average tie blocks") {
  const auto r = midranks({3.0, 1.0, 3.0, 2.0});
  CHECK(r == std::vector<double>{3.5, 1.0, 3.5, 2.0});
}
