#include "kolb/eval/metric.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include "kolb/util/csv.hpp"
#include "kolb/util/error.hpp"
#include "kolb/util/text.hpp"

namespace kolb::eval {

PredictionTable read_predictions(const std::filesystem::path& path,
                                 const std::optional<std::vector<std::string>>& expected_header) {
  const CsvTable t = read_csv(path);
  if (t.width() < 2) throw ConfigError(path.string() + ": needs an id column and at least one value column");
  if (expected_header && t.header != *expected_header) {
    throw ConfigError(path.string() + ": header " + join(t.header, ",") + " differs from the expected " +
                      join(*expected_header, ","));
  }
  PredictionTable p;
  p.id_column = t.header[0];
  p.columns.assign(t.header.begin() + 1, t.header.end());
  p.ids.reserve(t.rows.size());
  p.values.reserve(t.rows.size() * p.columns.size());
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (!seen.insert(row[0]).second) throw ConfigError(path.string() + ": duplicate id " + row[0]);
    p.ids.push_back(row[0]);
    for (std::size_t c = 1; c < row.size(); ++c) {
      double v = 0.0;
      if (!parse_double(row[c], v) || !std::isfinite(v)) {
        throw ConfigError(path.string() + ": row " + std::to_string(r + 2) + " column " + t.header[c] +
                          " is not a finite number");
      }
      p.values.push_back(v);
    }
  }
  return p;
}

void write_predictions(const std::filesystem::path& path, const PredictionTable& t) {
  CsvTable out;
  out.header.push_back(t.id_column);
  out.header.insert(out.header.end(), t.columns.begin(), t.columns.end());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::vector<std::string> row{t.ids[r]};
    for (std::size_t c = 0; c < t.width(); ++c) row.push_back(format_double(t.at(r, c)));
    out.rows.push_back(std::move(row));
  }
  write_csv(path, out);
}

PredictionTable align_to(const PredictionTable& reference, const PredictionTable& t) {
  if (t.columns != reference.columns) {
    throw ConfigError("value columns " + join(t.columns, ",") + " differ from " + join(reference.columns, ","));
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < t.rows(); ++r) index[t.ids[r]] = r;
  std::vector<std::string> missing, extra;
  std::set<std::string> ref_ids(reference.ids.begin(), reference.ids.end());
  for (const auto& id : reference.ids) {
    if (!index.count(id)) missing.push_back(id);
  }
  for (const auto& id : t.ids) {
    if (!ref_ids.count(id)) extra.push_back(id);
  }
  if (!missing.empty() || !extra.empty()) {
    auto head = [](const std::vector<std::string>& v) {
      std::vector<std::string> h(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(v.size(), 10)));
      return join(h, ",") + (v.size() > 10 ? ",..." : "");
    };
    throw ConfigError("id sets differ: " + std::to_string(missing.size()) + " missing [" + head(missing) + "], " +
                      std::to_string(extra.size()) + " unexpected [" + head(extra) + "]");
  }
  PredictionTable out = t;
  out.ids = reference.ids;
  for (std::size_t r = 0; r < reference.rows(); ++r) {
    const std::size_t src = index.at(reference.ids[r]);
    for (std::size_t c = 0; c < t.width(); ++c) out.values[r * t.width() + c] = t.at(src, c);
  }
  return out;
}

namespace {

void same_shape(const PredictionTable& y, const PredictionTable& p) {
  if (y.rows() != p.rows() || y.width() != p.width() || y.rows() == 0) {
    throw ConfigError("metric inputs differ in shape or are empty");
  }
}

double mse(const PredictionTable& y, const PredictionTable& p) {
  same_shape(y, p);
  double s = 0.0;
  for (std::size_t i = 0; i < y.values.size(); ++i) s += (y.values[i] - p.values[i]) * (y.values[i] - p.values[i]);
  return s / static_cast<double>(y.values.size());
}

double mae(const PredictionTable& y, const PredictionTable& p) {
  same_shape(y, p);
  double s = 0.0;
  for (std::size_t i = 0; i < y.values.size(); ++i) s += std::fabs(y.values[i] - p.values[i]);
  return s / static_cast<double>(y.values.size());
}

double rmsle(const PredictionTable& y, const PredictionTable& p) {
  same_shape(y, p);
  double s = 0.0;
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    const double a = std::log1p(std::max(y.values[i], 0.0)), b = std::log1p(std::max(p.values[i], 0.0));
    s += (a - b) * (a - b);
  }
  return std::sqrt(s / static_cast<double>(y.values.size()));
}

constexpr double kEps = 1e-15;

double logloss(const PredictionTable& y, const PredictionTable& p) {
  same_shape(y, p);
  double s = 0.0;
  if (y.width() == 1) {
    for (std::size_t i = 0; i < y.rows(); ++i) {
      const double q = std::clamp(p.values[i], kEps, 1.0 - kEps);
      s -= y.values[i] * std::log(q) + (1.0 - y.values[i]) * std::log(1.0 - q);
    }
    return s / static_cast<double>(y.rows());
  }
  // One-hot targets; each prediction row is renormalised after clipping.
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < y.width(); ++c) z += std::clamp(p.at(r, c), kEps, 1.0 - kEps);
    for (std::size_t c = 0; c < y.width(); ++c) {
      s -= y.at(r, c) * std::log(std::clamp(p.at(r, c), kEps, 1.0 - kEps) / z);
    }
  }
  return s / static_cast<double>(y.rows());
}

// Rank statistic with midranks for tied predictions.
double auc(const PredictionTable& y, const PredictionTable& p) {
  same_shape(y, p);
  if (y.width() != 1) throw ConfigError("auc needs a single prediction column");
  const std::size_t n = y.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p.values[a] < p.values[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && p.values[order[j + 1]] == p.values[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y.values[i] > 0.5) {
      pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw ConfigError("auc needs both classes in the targets");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

// Single column: labels compared after rounding (0.5 threshold for
// probabilities). Several columns: argmax per row.
double accuracy(const PredictionTable& y, const PredictionTable& p) {
  same_shape(y, p);
  std::size_t hit = 0;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    if (y.width() == 1) {
      hit += std::lround(y.values[r]) == std::lround(p.values[r]);
      continue;
    }
    std::size_t ay = 0, ap = 0;
    for (std::size_t c = 1; c < y.width(); ++c) {
      if (y.at(r, c) > y.at(r, ay)) ay = c;
      if (p.at(r, c) > p.at(r, ap)) ap = c;
    }
    hit += ay == ap;
  }
  return static_cast<double>(hit) / static_cast<double>(y.rows());
}

std::string normalise(const std::string& name) {
  std::string out;
  for (char ch : name) {
    if (ch == '-' || ch == '_' || ch == ' ') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

}  // namespace

std::optional<Metric> find_metric(const std::string& name) {
  using core::Direction;
  const std::string n = normalise(name);
  if (n == "mse" || n == "meansquarederror") return Metric{"mse", Direction::minimize, mse};
  if (n == "rmse" || n == "rootmeansquarederror") {
    return Metric{"rmse", Direction::minimize, [](const auto& y, const auto& p) { return std::sqrt(mse(y, p)); }};
  }
  if (n == "mae" || n == "meanabsoluteerror") return Metric{"mae", Direction::minimize, mae};
  if (n == "rmsle") return Metric{"rmsle", Direction::minimize, rmsle};
  if (n == "logloss" || n == "logarithmicloss" || n == "crossentropy") return Metric{"logloss", Direction::minimize, logloss};
  if (n == "auc" || n == "rocauc" || n == "auroc") return Metric{"auc", Direction::maximize, auc};
  if (n == "accuracy" || n == "acc") return Metric{"accuracy", Direction::maximize, accuracy};
  return std::nullopt;
}

Metric metric_or_mse(const std::string& name) {
  if (auto m = find_metric(name)) return *m;
  return *find_metric("mse");
}

SplitScore score_split(const PredictionTable& submission, const std::filesystem::path& answers, const Metric& metric) {
  CsvTable a = read_csv(answers);
  const auto usage = a.column("Usage");
  std::vector<bool> is_public;
  if (usage) {
    for (auto& row : a.rows) {
      is_public.push_back(row[*usage] == "Public");
      row.erase(row.begin() + static_cast<std::ptrdiff_t>(*usage));
    }
    a.header.erase(a.header.begin() + static_cast<std::ptrdiff_t>(*usage));
  } else {
    is_public.assign(a.rows.size(), false);
  }
  PredictionTable targets;
  targets.id_column = a.header.at(0);
  targets.columns.assign(a.header.begin() + 1, a.header.end());
  for (const auto& row : a.rows) {
    targets.ids.push_back(row[0]);
    for (std::size_t c = 1; c < row.size(); ++c) {
      double v = 0.0;
      if (!parse_double(row[c], v)) throw ConfigError(answers.string() + ": non-numeric target for id " + row[0]);
      targets.values.push_back(v);
    }
  }
  const PredictionTable pred = align_to(targets, submission);
  auto subset = [&](const PredictionTable& t, bool pub) {
    PredictionTable s = t;
    s.ids.clear();
    s.values.clear();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      if (is_public[r] != pub) continue;
      s.ids.push_back(t.ids[r]);
      for (std::size_t c = 0; c < t.width(); ++c) s.values.push_back(t.at(r, c));
    }
    return s;
  };
  SplitScore out;
  const auto priv_y = subset(targets, false);
  const auto pub_y = subset(targets, true);
  out.private_score = priv_y.rows() ? metric.fn(priv_y, subset(pred, false)) : metric.fn(targets, pred);
  // Without a public split the public score is the score on every row.
  out.public_score = pub_y.rows() ? metric.fn(pub_y, subset(pred, true)) : metric.fn(targets, pred);
  return out;
}

}  // namespace kolb::eval
