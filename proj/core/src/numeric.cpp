#include "tfhtmm/numeric.hpp"

#include <algorithm>
#include <cmath>

#include "tfhtmm/errors.hpp"

namespace tfhtmm {

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return kLogZero;
  const double hi = *std::max_element(v.begin(), v.end());
  if (hi == kLogZero) return kLogZero;
  if (std::isinf(hi)) return hi;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

double log_multivariate_beta(std::span<const double> a) {
  double total = 0.0;
  double acc = 0.0;
  for (double x : a) {
    acc += std::lgamma(x);
    total += x;
  }
  return acc - std::lgamma(total);
}

double sample_log_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw DomainError("gamma shape must be positive");
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    double x = g(rng);
    while (x <= 0.0) x = g(rng);
    return std::log(x);
  }
  // Gamma(a) = Gamma(a + 1) * U^(1/a)
  std::gamma_distribution<double> g(shape + 1.0, 1.0);
  double x = g(rng);
  while (x <= 0.0) x = g(rng);
  double u = sample_uniform(rng);
  while (u <= 0.0) u = sample_uniform(rng);
  return std::log(x) + std::log(u) / shape;
}

Simplex sample_dirichlet(std::span<const double> concentration, Rng& rng) {
  Simplex logs(concentration.size());
  for (std::size_t i = 0; i < concentration.size(); ++i)
    logs[i] = sample_log_gamma(concentration[i], rng);
  const double norm = log_sum_exp(logs);
  Simplex out(logs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    out[i] = std::exp(logs[i] - norm);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

Simplex sample_dirichlet(std::size_t dim, double concentration, Rng& rng) {
  std::vector<double> a(dim, concentration);
  return sample_dirichlet(a, rng);
}

double sample_uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::size_t sample_index(std::size_t n, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool sample_bernoulli(double p, Rng& rng) { return sample_uniform(rng) < p; }

std::size_t sample_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw DomainError("categorical weights sum to zero");
  double target = sample_uniform(rng) * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    if (target < weights[i]) return i;
    target -= weights[i];
  }
  return last_positive;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

bool is_simplex(std::span<const double> p, double tol) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

}  // namespace tfhtmm
