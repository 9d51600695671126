#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace tfhtmm {

using Rng = std::mt19937_64;
using Simplex = std::vector<double>;

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// log(sum(exp(v))); returns kLogZero for an empty or all -inf input.
double log_sum_exp(std::span<const double> v);

/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

/// Natural-log Shannon entropy of a probability vector (0 log 0 = 0).
double entropy(std::span<const double> p);

/// Multivariate Beta function in log form: sum lgamma(a_i) - lgamma(sum a_i).
double log_multivariate_beta(std::span<const double> a);

/// Draws log(G) for G ~ Gamma(shape, 1). Stays finite for very small shapes
/// where a direct draw would underflow to zero.
double sample_log_gamma(double shape, Rng& rng);

/// Dirichlet draw; every concentration must be > 0.
Simplex sample_dirichlet(std::span<const double> concentration, Rng& rng);

/// Symmetric Dirichlet draw of the given dimension.
Simplex sample_dirichlet(std::size_t dim, double concentration, Rng& rng);

/// Index drawn proportionally to non-negative weights (need not be normalised).
std::size_t sample_categorical(std::span<const double> weights, Rng& rng);

double sample_uniform(Rng& rng);

/// Uniform integer in [0, n).
std::size_t sample_index(std::size_t n, Rng& rng);

bool sample_bernoulli(double p, Rng& rng);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> v);

bool is_simplex(std::span<const double> p, double tol = 1e-9);

}  // namespace tfhtmm
