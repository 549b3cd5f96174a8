#include "kolb/eval/blend.hpp"

#include <cmath>
#include <random>

#include "kolb/util/error.hpp"

namespace kolb::eval {

std::string to_string(BlendMethod m) {
  switch (m) {
    case BlendMethod::mean: return "mean";
    case BlendMethod::weighted_fit: return "weighted_fit";
    case BlendMethod::small_network: return "small_network";
  }
  return "mean";
}

BlendMethod parse_blend_method(const std::string& s) {
  if (s == "mean") return BlendMethod::mean;
  if (s == "weighted_fit") return BlendMethod::weighted_fit;
  if (s == "small_network") return BlendMethod::small_network;
  throw ConfigError("unknown blend method: " + s);
}

namespace {

PredictionTable combine(const std::vector<PredictionTable>& c, const std::vector<double>& w) {
  PredictionTable out = c[0];
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double v = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) v += w[k] * c[k].values[i];
    out.values[i] = v;
  }
  return out;
}

// Lower is better regardless of the metric's direction.
double loss(const Metric& m, const PredictionTable& y, const PredictionTable& p) {
  const double v = m.fn(y, p);
  return m.direction == core::Direction::minimize ? v : -v;
}

bool improves(double candidate, double current) {
  return candidate < current - 1e-12 * std::max(1.0, std::fabs(current));
}

std::vector<double> fit_weights(const BlendConfig& cfg, const std::vector<PredictionTable>& c, std::size_t best) {
  const std::size_t k = c.size();
  std::vector<double> w(k, 0.0);
  w[best] = 1.0;
  double cur = loss(cfg.metric, cfg.targets, combine(c, w));
  constexpr double kInvPhi = 0.6180339887498949;
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    bool moved = false;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j || w[j] <= 0.0) continue;
        // Move `a` of j's mass onto i, a in [0, w_j].
        auto f = [&](double a) {
          std::vector<double> t = w;
          t[i] += a;
          t[j] -= a;
          return loss(cfg.metric, cfg.targets, combine(c, t));
        };
        double lo = 0.0, hi = w[j];
        double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
        double f1 = f(x1), f2 = f(x2);
        for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
          if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - kInvPhi * (hi - lo);
            f1 = f(x1);
          } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + kInvPhi * (hi - lo);
            f2 = f(x2);
          }
        }
        double best_a = 0.0, best_f = cur;
        for (double a : {0.5 * (lo + hi), w[j]}) {
          const double fa = f(a);
          if (improves(fa, best_f)) {
            best_a = a;
            best_f = fa;
          }
        }
        if (best_a > 0.0) {
          const double a = best_a;
          w[i] += a;
          w[j] = a == w[j] ? 0.0 : w[j] - a;
          cur = best_f;
          moved = true;
        }
      }
    }
    if (!moved) break;
  }
  return w;
}

// Gate network over the K candidate values of one cell.
struct Net {
  std::size_t k = 0, h = 0;
  std::vector<double> w1, b1, w2, b2;
  double mu = 0.0, sd = 1.0;

  std::vector<double> pack() const {
    std::vector<double> p = w1;
    p.insert(p.end(), b1.begin(), b1.end());
    p.insert(p.end(), w2.begin(), w2.end());
    p.insert(p.end(), b2.begin(), b2.end());
    p.push_back(mu);
    p.push_back(sd);
    return p;
  }
  static Net unpack(const std::vector<double>& p, std::size_t k, std::size_t h) {
    Net n;
    n.k = k;
    n.h = h;
    auto at = p.begin();
    auto take = [&](std::size_t cnt) {
      std::vector<double> v(at, at + static_cast<std::ptrdiff_t>(cnt));
      at += static_cast<std::ptrdiff_t>(cnt);
      return v;
    };
    n.w1 = take(h * k);
    n.b1 = take(h);
    n.w2 = take(k * h);
    n.b2 = take(k);
    n.mu = *at++;
    n.sd = *at;
    return n;
  }

  // Forward pass for one cell; fills hidden activations and gates.
  double forward(const double* x, std::vector<double>& hid, std::vector<double>& gate) const {
    for (std::size_t j = 0; j < h; ++j) {
      double s = b1[j];
      for (std::size_t i = 0; i < k; ++i) s += w1[j * k + i] * (x[i] - mu) / sd;
      hid[j] = std::tanh(s);
    }
    double mx = -INFINITY;
    for (std::size_t o = 0; o < k; ++o) {
      double s = b2[o];
      for (std::size_t j = 0; j < h; ++j) s += w2[o * h + j] * hid[j];
      gate[o] = s;
      mx = std::max(mx, s);
    }
    double z = 0.0;
    for (std::size_t o = 0; o < k; ++o) z += gate[o] = std::exp(gate[o] - mx);
    // Offsets from the first input, so identical inputs pass through exactly.
    double out = x[0];
    for (std::size_t o = 0; o < k; ++o) {
      gate[o] /= z;
      out += gate[o] * (x[o] - x[0]);
    }
    return out;
  }
};

std::vector<double> cells(const std::vector<PredictionTable>& c) {
  const std::size_t k = c.size(), m = c[0].values.size();
  std::vector<double> x(m * k);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t o = 0; o < k; ++o) x[i * k + o] = c[o].values[i];
  }
  return x;
}

PredictionTable run_net(const Net& net, const std::vector<PredictionTable>& c, std::vector<double>* mean_gate) {
  const auto x = cells(c);
  PredictionTable out = c[0];
  std::vector<double> hid(net.h), gate(net.k);
  if (mean_gate) mean_gate->assign(net.k, 0.0);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = net.forward(&x[i * net.k], hid, gate);
    if (mean_gate) {
      for (std::size_t o = 0; o < net.k; ++o) (*mean_gate)[o] += gate[o] / static_cast<double>(out.values.size());
    }
  }
  return out;
}

Net train_net(const BlendConfig& cfg, const std::vector<PredictionTable>& c) {
  const std::size_t k = c.size(), h = static_cast<std::size_t>(std::max(cfg.hidden, 1));
  const auto x = cells(c);
  const std::size_t m = c[0].values.size();
  Net net;
  net.k = k;
  net.h = h;
  double s = 0.0, s2 = 0.0;
  for (double v : x) {
    s += v;
    s2 += v * v;
  }
  net.mu = s / static_cast<double>(x.size());
  net.sd = std::sqrt(std::max(s2 / static_cast<double>(x.size()) - net.mu * net.mu, 0.0));
  if (!(net.sd > 1e-12)) net.sd = 1.0;
  std::mt19937_64 rng(cfg.seed);
  auto normal = [&rng]() {
    // Box-Muller on 53-bit uniforms keeps the draw library-independent.
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  };
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  net.w1.resize(h * k);
  for (auto& v : net.w1) v = normal() * scale;
  net.b1.assign(h, 0.0);
  net.w2.assign(k * h, 0.0);  // zero output weights: training starts at the mean
  net.b2.assign(k, 0.0);

  std::vector<double> params = net.pack();
  const std::size_t np = params.size() - 2;
  std::vector<double> grad(np), m1(np, 0.0), m2(np, 0.0);
  std::vector<double> hid(h), gate(k);
  const double b1c = 0.9, b2c = 0.999;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double* gw1 = grad.data();
    double* gb1 = gw1 + h * k;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + k * h;
    for (std::size_t i = 0; i < m; ++i) {
      const double* xi = &x[i * k];
      const double out = net.forward(xi, hid, gate);
      const double dout = 2.0 * (out - cfg.targets.values[i]) / static_cast<double>(m);
      std::vector<double> dpre(h, 0.0);
      for (std::size_t o = 0; o < k; ++o) {
        const double dl = dout * gate[o] * (xi[o] - out);
        gb2[o] += dl;
        for (std::size_t j = 0; j < h; ++j) {
          gw2[o * h + j] += dl * hid[j];
          dpre[j] += dl * net.w2[o * h + j];
        }
      }
      for (std::size_t j = 0; j < h; ++j) {
        const double d = dpre[j] * (1.0 - hid[j] * hid[j]);
        gb1[j] += d;
        for (std::size_t q = 0; q < k; ++q) gw1[j * k + q] += d * (xi[q] - net.mu) / net.sd;
      }
    }
    params = net.pack();
    for (std::size_t p = 0; p < np; ++p) {
      m1[p] = b1c * m1[p] + (1 - b1c) * grad[p];
      m2[p] = b2c * m2[p] + (1 - b2c) * grad[p] * grad[p];
      const double mh = m1[p] / (1 - std::pow(b1c, epoch));
      const double vh = m2[p] / (1 - std::pow(b2c, epoch));
      params[p] -= cfg.learning_rate * mh / (std::sqrt(vh) + 1e-12);
    }
    net = Net::unpack(params, k, h);
  }
  return net;
}

}  // namespace

PredictionTable BlendResult::apply(const std::vector<PredictionTable>& inputs) const {
  if (inputs.size() != weights.size()) throw ConfigError("blend applied to a different number of candidates");
  std::vector<PredictionTable> aligned{inputs[0]};
  for (std::size_t i = 1; i < inputs.size(); ++i) aligned.push_back(align_to(inputs[0], inputs[i]));
  if (method == BlendMethod::small_network) {
    return run_net(Net::unpack(network, inputs.size(), static_cast<std::size_t>(hidden)), aligned, nullptr);
  }
  return combine(aligned, weights);
}

BlendResult blend(const BlendConfig& cfg) {
  if (cfg.candidates.size() < 2) throw ConfigError("blending needs at least two candidates");
  if (!cfg.metric.fn) throw ConfigError("blending needs a validation metric");
  std::vector<PredictionTable> c;
  for (const auto& cand : cfg.candidates) c.push_back(align_to(cfg.targets, cand));
  BlendResult r;
  r.method = cfg.method;
  double best_loss = INFINITY;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double l = loss(cfg.metric, cfg.targets, c[i]);
    if (l < best_loss) {
      best_loss = l;
      r.best_index = i;
    }
  }
  r.best_single = cfg.metric.fn(cfg.targets, c[r.best_index]);
  switch (cfg.method) {
    case BlendMethod::mean:
      r.weights.assign(c.size(), 1.0 / static_cast<double>(c.size()));
      r.blended = combine(c, r.weights);
      break;
    case BlendMethod::weighted_fit:
      r.weights = fit_weights(cfg, c, r.best_index);
      r.blended = combine(c, r.weights);
      break;
    case BlendMethod::small_network: {
      Net net = train_net(cfg, c);
      r.hidden = static_cast<int>(net.h);
      r.network = net.pack();
      r.blended = run_net(net, c, &r.weights);
      break;
    }
  }
  r.metric_value = cfg.metric.fn(cfg.targets, r.blended);
  return r;
}

}  // namespace kolb::eval
