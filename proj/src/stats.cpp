#include "vog/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "vog/errors.hpp"

namespace vog {

namespace {

// Continued fraction for I_x(a,b), modified Lentz. Converges quickly for
// x < (a+1)/(a+b+2); the caller applies the symmetry otherwise.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 400;
  constexpr double kEps = 3.0e-16;
  constexpr double kTiny = 1.0e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw AnalysisError("incomplete beta continued fraction failed to converge (a=" +
                      std::to_string(a) + ", b=" + std::to_string(b) + ", x=" + std::to_string(x) +
                      ")");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw ValidationError("incomplete beta requires a, b > 0");
  }
  if (x < 0.0 || x > 1.0) throw ValidationError("incomplete beta requires x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw ValidationError("student_t_cdf requires dof > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  if (t == 0.0) return 0.5;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(dof / 2.0, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

SampleSummary summarize(const std::vector<double>& xs) {
  if (xs.size() < 2) throw ValidationError("summary requires at least 2 samples");
  SampleSummary s;
  s.n = xs.size();
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(s.n);
  double acc = 0.0;
  for (double v : xs) {
    const double d = v - s.mean;
    acc += d * d;
  }
  s.std = std::sqrt(acc / static_cast<double>(s.n - 1));
  return s;
}

WelchResult welch_ttest(const SampleSummary& s1, const SampleSummary& s2, double alpha) {
  if (s1.n < 2 || s2.n < 2) throw ValidationError("welch_ttest requires n >= 2 in both samples");
  if (s1.std < 0.0 || s2.std < 0.0) throw ValidationError("welch_ttest requires std >= 0");

  WelchResult r;
  r.mean1 = s1.mean;
  r.std1 = s1.std;
  r.n1 = s1.n;
  r.mean2 = s2.mean;
  r.std2 = s2.std;
  r.n2 = s2.n;
  r.alpha = alpha;

  const double v1 = (s1.std * s1.std) / static_cast<double>(s1.n);
  const double v2 = (s2.std * s2.std) / static_cast<double>(s2.n);
  const double denom = std::sqrt(v1 + v2);
  if (denom == 0.0) {
    // no spread at all: equal means are indistinguishable, unequal certain
    const bool equal = s1.mean == s2.mean;
    r.t_statistic = equal ? 0.0 : (s1.mean > s2.mean ? std::numeric_limits<double>::infinity()
                                                     : -std::numeric_limits<double>::infinity());
    r.degrees_of_freedom = static_cast<double>(s1.n + s2.n - 2);
    r.p_value = equal ? 1.0 : 0.0;
    r.reject_at_alpha = !equal;
    return r;
  }
  r.t_statistic = (s1.mean - s2.mean) / denom;
  const double num = (v1 + v2) * (v1 + v2);
  const double den = v1 * v1 / static_cast<double>(s1.n - 1) + v2 * v2 / static_cast<double>(s2.n - 1);
  r.degrees_of_freedom = den == 0.0 ? static_cast<double>(s1.n + s2.n - 2) : num / den;
  r.p_value = 2.0 * (1.0 - student_t_cdf(std::fabs(r.t_statistic), r.degrees_of_freedom));
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  r.reject_at_alpha = r.p_value < alpha;
  return r;
}

WelchResult welch_ttest_samples(const std::vector<double>& xs, const std::vector<double>& ys,
                                double alpha) {
  return welch_ttest(summarize(xs), summarize(ys), alpha);
}

std::vector<double> midranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // tie block spans 1-based ranks [i+1, j+1]; midrank is their average,
    // always a multiple of 1/2 and therefore exact in binary
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

double auroc(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg) {
  if (scores_pos.empty() || scores_neg.empty()) {
    throw ValidationError("auroc requires nonempty positive and negative score lists");
  }
  std::vector<double> pooled;
  pooled.reserve(scores_pos.size() + scores_neg.size());
  pooled.insert(pooled.end(), scores_pos.begin(), scores_pos.end());
  pooled.insert(pooled.end(), scores_neg.begin(), scores_neg.end());
  const std::vector<double> ranks = midranks(pooled);
  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < scores_pos.size(); ++i) rank_sum_pos += ranks[i];
  const double n1 = static_cast<double>(scores_pos.size());
  const double n2 = static_cast<double>(scores_neg.size());
  const double u = rank_sum_pos - n1 * (n1 + 1.0) / 2.0;
  return u / (n1 * n2);
}

namespace {

// In-distribution positive, higher score positive-leaning. Walks the distinct
// thresholds in descending order accumulating TP/FP counts.
double aupr_in_positive(const std::vector<double>& pos, const std::vector<double>& neg) {
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(pos.size() + neg.size());
  for (double s : pos) all.push_back({s, true});
  for (double s : neg) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    return a.score > b.score;
  });

  const double n_pos = static_cast<double>(pos.size());
  double tp = 0.0, fp = 0.0;
  double prev_recall = 0.0;
  double area = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j + 1 < all.size() && all[j + 1].score == all[i].score) ++j;
    for (std::size_t k = i; k <= j; ++k) {
      if (all[k].positive) tp += 1.0;
      else fp += 1.0;
    }
    const double recall = tp / n_pos;
    const double precision = tp / (tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j + 1;
  }
  return area;
}

}  // namespace

double aupr(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg,
            PositiveClass positive) {
  if (scores_pos.empty() || scores_neg.empty()) {
    throw ValidationError("aupr requires nonempty positive and negative score lists");
  }
  if (positive == PositiveClass::in_dist) {
    return aupr_in_positive(scores_pos, scores_neg);
  }
  // out-mode: negate every score and treat the out-of-distribution side as positive
  std::vector<double> neg_out(scores_neg.size()), neg_in(scores_pos.size());
  for (std::size_t i = 0; i < scores_neg.size(); ++i) neg_out[i] = -scores_neg[i];
  for (std::size_t i = 0; i < scores_pos.size(); ++i) neg_in[i] = -scores_pos[i];
  return aupr_in_positive(neg_out, neg_in);
}

CorrelationResult correlations(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ValidationError("correlations: length mismatch");
  if (xs.size() < 3) throw ValidationError("correlations: need at least 3 points");
  const std::size_t n = xs.size();

  auto pearson = [n](const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double da = a[i] - ma;
      const double db = b[i] - mb;
      sab += da * db;
      saa += da * da;
      sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) {
      throw AnalysisError("correlation undefined: zero variance input");
    }
    return sab / std::sqrt(saa * sbb);
  };

  CorrelationResult r;
  r.pearson_r = pearson(xs, ys);
  r.spearman_rho = pearson(midranks(xs), midranks(ys));

  const double dof = static_cast<double>(n - 2);
  const double rr = std::clamp(r.pearson_r, -1.0, 1.0);
  if (std::fabs(rr) >= 1.0) {
    r.pearson_p = 0.0;
  } else {
    const double t = rr * std::sqrt(dof / (1.0 - rr * rr));
    r.pearson_p = std::clamp(2.0 * (1.0 - student_t_cdf(std::fabs(t), dof)), 0.0, 1.0);
  }
  return r;
}

}  // namespace vog
