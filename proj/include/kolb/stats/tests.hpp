#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kolb/util/json_io.hpp"

namespace kolb::stats {

// Regularised incomplete beta I_x(a, b), continued fraction to 1e-10.
double incomplete_beta(double a, double b, double x);
// Regularised upper incomplete gamma Q(a, x).
double upper_incomplete_gamma(double a, double x);
// Two-sided Student-t tail 2 * P(T > |t|).
double student_t_two_sided(double t, double dof);
double chi2_sf(double x, double dof);
double normal_sf(double z);

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
};

// ConfigError when a group has fewer than two values or both variances are
// zero.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Midranks, 1-based, ascending.
std::vector<double> midranks(const std::vector<double>& values);

struct FriedmanResult {
  double statistic = 0.0;
  double p = 1.0;
};

// Rows are methods, columns tasks. Tie-corrected; a matrix with every task
// fully tied has statistic 0 and p 1.
FriedmanResult friedman_test(const std::vector<std::vector<double>>& matrix);

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double p = 1.0;
  int n = 0;               // non-zero differences
  bool exact = true;
};

// Zero differences are dropped. Exact null distribution for n <= 25,
// normal approximation with continuity correction above. Identical samples
// give statistic 0, p = 1, n = 0.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

// Methods x tasks matrix of quantiles, higher is better.
struct RankMatrix {
  std::vector<std::string> methods;
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> values;  // [method][task]

  // Per-task ranks with 1 = best and midranks for ties.
  std::vector<std::vector<double>> ranks() const;
  std::vector<double> average_ranks() const;
  void validate() const;
};

struct PairwiseTest {
  std::string a, b;
  double statistic = 0.0;
  double p = 1.0;
  bool exact = true;
};

struct ComparisonReport {
  FriedmanResult friedman;
  double alpha = 0.05;
  bool post_hoc = false;  // false: Friedman not significant
  std::vector<double> average_ranks;
  std::vector<std::string> methods;
  std::vector<PairwiseTest> pairwise;
  // Maximal sets of methods whose pairwise p >= alpha, best average rank
  // first; indices into `methods`.
  std::vector<std::vector<std::size_t>> groups;

  Json to_json() const;
  // Methods by average rank with one bar per group.
  std::string cd_diagram() const;
};

// ConfigError for fewer than 3 methods or 2 tasks.
ComparisonReport compare_methods(const RankMatrix& matrix, double alpha = 0.05);

}  // namespace kolb::stats
