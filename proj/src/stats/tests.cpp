#include "kolb/stats/tests.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "kolb/util/error.hpp"

namespace kolb::stats {
namespace {

constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 10000;

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_cf(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
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
  throw NumericError("incomplete beta continued fraction did not converge");
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw ConfigError(std::string(what) + " contains a non-finite value");
  }
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete beta needs positive shape parameters");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double upper_incomplete_gamma(double a, double x) {
  if (!(a > 0.0)) throw ConfigError("incomplete gamma needs a positive shape");
  if (x <= 0.0) return 1.0;
  const double log_front = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < kMaxIter; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * kEps) return 1.0 - sum * std::exp(log_front);
    }
    throw NumericError("incomplete gamma series did not converge");
  }
  double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return std::exp(log_front) * h;
  }
  throw NumericError("incomplete gamma continued fraction did not converge");
}

double student_t_two_sided(double t, double dof) {
  if (!(dof > 0.0)) throw ConfigError("degrees of freedom must be positive");
  return incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
}

double chi2_sf(double x, double dof) { return upper_incomplete_gamma(0.5 * dof, 0.5 * x); }

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw ConfigError("Welch test needs at least two values per group");
  check_finite(a, "group a");
  check_finite(b, "group b");
  auto moments = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double qa = va / static_cast<double>(a.size()), qb = vb / static_cast<double>(b.size());
  if (qa + qb <= 0.0) throw ConfigError("Welch test is undefined when both groups have zero variance");
  WelchResult r;
  r.t = (ma - mb) / std::sqrt(qa + qb);
  r.dof = (qa + qb) * (qa + qb) /
          (qa * qa / static_cast<double>(a.size() - 1) + qb * qb / static_cast<double>(b.size() - 1));
  r.p = student_t_two_sided(r.t, r.dof);
  return r;
}

std::vector<double> midranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> r(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mid;
    i = j + 1;
  }
  return r;
}

namespace {

// Sum of t^3 - t over tie groups.
double tie_term(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    s += t * t * t - t;
    i = j + 1;
  }
  return s;
}

}  // namespace

FriedmanResult friedman_test(const std::vector<std::vector<double>>& m) {
  const std::size_t k = m.size();
  if (k < 3) throw ConfigError("Friedman test needs at least three methods");
  const std::size_t n = m[0].size();
  if (n < 2) throw ConfigError("Friedman test needs at least two tasks");
  for (const auto& row : m) {
    if (row.size() != n) throw ConfigError("Friedman matrix rows differ in length");
    check_finite(row, "Friedman matrix");
  }
  std::vector<double> rank_sum(k, 0.0);
  double ties = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> block(k);
    for (std::size_t i = 0; i < k; ++i) block[i] = m[i][t];
    const auto r = midranks(block);
    for (std::size_t i = 0; i < k; ++i) rank_sum[i] += r[i];
    ties += tie_term(block);
  }
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  const double c = 1.0 - ties / (kd * (kd * kd - 1.0) * nd);
  FriedmanResult out;
  if (c <= 0.0) return out;  // every task fully tied
  double ss = 0.0;
  for (double r : rank_sum) ss += r * r;
  out.statistic = (12.0 / (nd * kd * (kd + 1.0)) * ss - 3.0 * nd * (kd + 1.0)) / c;
  if (out.statistic < 0.0) out.statistic = 0.0;  // rounding on exact ties
  out.p = chi2_sf(out.statistic, kd - 1.0);
  return out;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("Wilcoxon test needs paired samples of equal length");
  check_finite(a, "sample a");
  check_finite(b, "sample b");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }
  if (d.empty()) return WilcoxonResult{};
  std::vector<double> mag(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::fabs(d[i]);
  const auto r = midranks(mag);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? w_plus : w_minus) += r[i];
  WilcoxonResult out;
  out.n = static_cast<int>(d.size());
  out.statistic = std::min(w_plus, w_minus);
  const double n = static_cast<double>(d.size());
  if (d.size() <= 25) {
    // Midranks are multiples of 1/2, so doubled ranks are integers.
    std::vector<int> dr(d.size());
    int total = 0;
    for (std::size_t i = 0; i < d.size(); ++i) total += dr[i] = static_cast<int>(std::lround(2.0 * r[i]));
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    int reach = 0;
    for (int x : dr) {
      for (int s = reach; s >= 0; --s) ways[static_cast<std::size_t>(s + x)] += ways[static_cast<std::size_t>(s)];
      reach += x;
    }
    const int limit = static_cast<int>(std::lround(2.0 * out.statistic));
    double below = 0.0;
    for (int s = 0; s <= limit; ++s) below += ways[static_cast<std::size_t>(s)];
    out.p = std::min(1.0, 2.0 * below / std::ldexp(1.0, static_cast<int>(d.size())));
    out.exact = true;
    return out;
  }
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term(mag) / 48.0;
  const double diff = out.statistic - mean;
  const double corr = diff > 0 ? 0.5 : diff < 0 ? -0.5 : 0.0;
  const double z = (diff - corr) / std::sqrt(var);
  out.p = std::min(1.0, 2.0 * normal_sf(std::fabs(z)));
  out.exact = false;
  return out;
}

void RankMatrix::validate() const {
  if (methods.size() < 3) throw ConfigError("method comparison needs at least three methods");
  if (tasks.size() < 2) throw ConfigError("method comparison needs at least two tasks");
  if (values.size() != methods.size()) throw ConfigError("rank matrix needs one row per method");
  for (const auto& row : values) {
    if (row.size() != tasks.size()) throw ConfigError("rank matrix needs one column per task");
    check_finite(row, "rank matrix");
  }
}

std::vector<std::vector<double>> RankMatrix::ranks() const {
  std::vector<std::vector<double>> out(methods.size(), std::vector<double>(tasks.size()));
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    std::vector<double> neg(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) neg[m] = -values[m][t];
    const auto r = midranks(neg);
    for (std::size_t m = 0; m < methods.size(); ++m) out[m][t] = r[m];
  }
  return out;
}

std::vector<double> RankMatrix::average_ranks() const {
  std::vector<double> avg;
  for (const auto& row : ranks()) avg.push_back(std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size()));
  return avg;
}

namespace {

// Bron-Kerbosch with pivoting over the "not different" graph.
void cliques(const std::vector<std::vector<bool>>& adj, std::vector<std::size_t> r, std::vector<std::size_t> p,
             std::vector<std::size_t> x, std::vector<std::vector<std::size_t>>& out) {
  if (p.empty() && x.empty()) {
    std::sort(r.begin(), r.end());
    out.push_back(r);
    return;
  }
  std::size_t pivot = p.empty() ? x[0] : p[0];
  for (auto u : p) {
    std::size_t cu = 0, cp = 0;
    for (auto v : p) cu += adj[u][v], cp += adj[pivot][v];
    if (cu > cp) pivot = u;
  }
  const auto candidates = p;
  for (auto v : candidates) {
    if (adj[pivot][v]) continue;
    std::vector<std::size_t> r2 = r, p2, x2;
    r2.push_back(v);
    for (auto w : p) {
      if (adj[v][w]) p2.push_back(w);
    }
    for (auto w : x) {
      if (adj[v][w]) x2.push_back(w);
    }
    cliques(adj, r2, p2, x2, out);
    p.erase(std::find(p.begin(), p.end(), v));
    x.push_back(v);
  }
}

}  // namespace

ComparisonReport compare_methods(const RankMatrix& matrix, double alpha) {
  matrix.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  ComparisonReport rep;
  rep.alpha = alpha;
  rep.methods = matrix.methods;
  rep.average_ranks = matrix.average_ranks();
  rep.friedman = friedman_test(matrix.values);
  const std::size_t k = matrix.methods.size();
  std::vector<std::vector<bool>> same(k, std::vector<bool>(k, true));
  rep.post_hoc = rep.friedman.p < alpha;
  if (rep.post_hoc) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        PairwiseTest pt{matrix.methods[i], matrix.methods[j], 0.0, 1.0, true};
        if (matrix.values[i] != matrix.values[j]) {
          const auto w = wilcoxon_signed_rank(matrix.values[i], matrix.values[j]);
          pt.statistic = w.statistic;
          pt.p = w.p;
          pt.exact = w.exact;
        }
        same[i][j] = same[j][i] = pt.p >= alpha;
        rep.pairwise.push_back(pt);
      }
    }
  }
  std::vector<std::size_t> all(k);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) same[i][i] = false;  // no self loops for the clique search
  cliques(same, {}, all, {}, rep.groups);
  auto best_rank = [&](const std::vector<std::size_t>& g) {
    double b = INFINITY;
    for (auto m : g) b = std::min(b, rep.average_ranks[m]);
    return b;
  };
  std::sort(rep.groups.begin(), rep.groups.end(), [&](const auto& a, const auto& b) {
    if (best_rank(a) != best_rank(b)) return best_rank(a) < best_rank(b);
    return a < b;
  });
  return rep;
}

Json ComparisonReport::to_json() const {
  Json j;
  j["friedman"] = {{"statistic", friedman.statistic}, {"p", friedman.p}};
  j["alpha"] = alpha;
  j["post_hoc"] = post_hoc;
  if (!post_hoc) j["note"] = "no post-hoc performed";
  j["methods"] = Json::array();
  for (std::size_t i = 0; i < methods.size(); ++i) {
    j["methods"].push_back({{"name", methods[i]}, {"average_rank", average_ranks[i]}});
  }
  j["pairwise"] = Json::array();
  for (const auto& p : pairwise) {
    j["pairwise"].push_back({{"a", p.a}, {"b", p.b}, {"statistic", p.statistic}, {"p", p.p}, {"exact", p.exact}});
  }
  j["groups"] = Json::array();
  for (const auto& g : groups) {
    Json names = Json::array();
    for (auto m : g) names.push_back(methods[m]);
    j["groups"].push_back(names);
  }
  return j;
}

std::string ComparisonReport::cd_diagram() const {
  std::vector<std::size_t> order(methods.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return average_ranks[a] < average_ranks[b]; });
  std::size_t width = 6;
  for (const auto& m : methods) width = std::max(width, m.size());
  std::ostringstream os;
  os << "Friedman statistic " << friedman.statistic << ", p = " << friedman.p;
  if (!post_hoc) os << " (no post-hoc performed)";
  os << "\navg rank  " << std::string(width, ' ') << "  groups\n";
  for (auto m : order) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%8.3f  ", average_ranks[m]);
    os << buf << methods[m] << std::string(width - methods[m].size(), ' ') << "  ";
    for (const auto& g : groups) os << (std::find(g.begin(), g.end(), m) != g.end() ? '|' : ' ');
    os << '\n';
  }
  return os.str();
}

}  // namespace kolb::stats
