#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tfhtmm/numeric.hpp"

namespace tfhtmm {

/// Acceptance rule for the per-tree latent-state Metropolis step.
enum class LatentAcceptance {
  /// Core-term ratio with cross terms, as given for the learning algorithm.
  kAsPrinted,
  /// Plain ratio of core terms at the proposed vs current configuration.
  kCoreRatio,
  /// Emission likelihood ratio: the Metropolis-Hastings ratio for a proposal
  /// drawn from the generative prior.
  kEmission,
};

std::string to_string(LatentAcceptance rule);
LatentAcceptance latent_acceptance_from_string(const std::string& name);

struct HyperParams {
  int num_states = 10;     // C
  int max_degree = 1;      // L
  int alphabet_size = 1;   // M
  double phi = 2.0;        // size-prior decay
  int l_min = 1;
  int l_max = 1;
  double alpha = 10.0;     // core concentration
  double alpha0 = 10.0;    // base-measure concentration
  double gamma = 1.0;      // leaf prior concentration
  double beta = 1.0;       // emission concentration
  double t0 = 10.0;        // initial temperature
  int m0 = 10;             // iteration at which the temperature reaches 1
  int iterations = 100;
  std::uint64_t seed = 0;
  LatentAcceptance acceptance = LatentAcceptance::kEmission;

  /// alpha = alpha0 = C, gamma = beta = 1, T0 = 10, m0 = iterations / 10.
  /// l_max is clamped to L.
  static HyperParams defaults(int num_states, int max_degree, int alphabet_size,
                              int l_max, int iterations = 100);

  /// Throws ConfigError on any violated bound.
  void validate() const;

  /// Number of extended child states: C hidden states plus the absent-child state.
  int num_ext_states() const noexcept { return num_states + 1; }
};

/// Extended child alphabet: index 0 is the absent-child state, hidden state
/// j maps to j + 1.
inline constexpr int kAbsentChild = 0;
inline constexpr int ext_state(int hidden_state) noexcept { return hidden_state + 1; }

/// Per-position hard clustering of extended child states.
///
/// Clusters are always numbered canonically: cluster 0 holds extended state
/// 0, and new ids are handed out in order of each cluster's smallest member.
class HardClustering {
 public:
  HardClustering() = default;
  /// Every position starts with a single cluster.
  HardClustering(int num_states, int max_degree);

  int num_positions() const noexcept { return static_cast<int>(assign_.size()); }
  int num_ext_states() const noexcept { return num_ext_; }
  int size(int position) const { return sizes_.at(static_cast<std::size_t>(position)); }
  const std::vector<int>& sizes() const noexcept { return sizes_; }
  int cluster_of(int position, int ext) const {
    return assign_[static_cast<std::size_t>(position)][static_cast<std::size_t>(ext)];
  }
  const std::vector<int>& assignment(int position) const {
    return assign_.at(static_cast<std::size_t>(position));
  }
  std::vector<int> members(int position, int cluster) const;

  /// Count of positions with more than one cluster.
  int active_positions() const;
  bool within_window(int l_min, int l_max) const;

  /// Replaces one position's map (any labels; renumbered canonically).
  void set_assignment(int position, std::vector<int> assignment);
  /// Moves `moving` ext states of `cluster` into a new cluster.
  void split(int position, int cluster, std::span<const int> moving);
  /// Folds cluster `b` into cluster `a`.
  void merge(int position, int a, int b);

  /// Throws DomainError unless rows are one-hot, clusters non-empty and the
  /// active-position count lies in [l_min, l_max].
  void check_invariants(int l_min, int l_max) const;

  /// Number of distinct cluster tuples (product of sizes). Throws DomainError
  /// when it does not fit in 64 bits.
  std::uint64_t tuple_count() const;
  /// Mixed-radix index of a cluster tuple.
  std::uint64_t tuple_index(std::span<const int> clusters) const;
  std::vector<int> tuple_of(std::uint64_t index) const;
  /// Tuple index reached by a vector of extended child states.
  std::uint64_t tuple_index_for_children(std::span<const int> ext_states) const;

  friend bool operator==(const HardClustering&, const HardClustering&) = default;

 private:
  void canonicalise(int position);
  void refresh_strides();

  int num_ext_ = 0;
  std::vector<std::vector<int>> assign_;
  std::vector<int> sizes_;
  std::vector<std::uint64_t> strides_;
};

/// Parameters of the tensor-factorised bottom-up model.
///
/// Core entries live in a sparse map keyed by tuple index and are drawn from
/// Dirichlet(alpha * lambda0) on first access. Lazy draws mutate internal
/// state, so concurrent readers are only safe once materialise_core() has run.
class TfModelParams {
 public:
  TfModelParams() = default;
  TfModelParams(int num_states, int max_degree, int alphabet_size, double alpha);

  int num_states() const noexcept { return num_states_; }
  int max_degree() const noexcept { return max_degree_; }
  int alphabet_size() const noexcept { return alphabet_size_; }
  double alpha() const noexcept { return alpha_; }

  std::vector<Simplex> pi;      // L rows over C
  std::vector<Simplex> emission;  // C rows over M
  Simplex lambda0;              // C
  HardClustering clustering;

  const Simplex& core(std::uint64_t tuple) const;
  bool has_core(std::uint64_t tuple) const { return core_.count(tuple) != 0; }
  void set_core(std::uint64_t tuple, Simplex row) { core_[tuple] = std::move(row); }
  void clear_core() { core_.clear(); }
  /// Draws every missing entry in increasing tuple order.
  void materialise_core() const;
  const std::map<std::uint64_t, Simplex>& core_entries() const noexcept { return core_; }

  Rng& core_rng() const noexcept { return core_rng_; }
  void seed_core_rng(std::uint64_t seed) { core_rng_.seed(seed); }

  /// Every stored row is a simplex within tol.
  bool rows_valid(double tol = 1e-9) const;

  friend bool operator==(const TfModelParams& a, const TfModelParams& b);

 private:
  int num_states_ = 0;
  int max_degree_ = 0;
  int alphabet_size_ = 0;
  double alpha_ = 1.0;
  mutable std::map<std::uint64_t, Simplex> core_;
  mutable Rng core_rng_;
};

/// Switching-parent parameters: transition is a convex mixture of one
/// elementary (C+1) x C matrix per child position.
struct SpModelParams {
  int num_states = 0;
  int max_degree = 0;
  int alphabet_size = 0;
  std::vector<Simplex> pi;        // L rows over C
  std::vector<Simplex> emission;  // C rows over M
  Simplex switch_weights;         // L
  /// elementary[l][ext] is a C-simplex; ext 0 is the absent-child row.
  std::vector<std::vector<Simplex>> elementary;

  bool rows_valid(double tol = 1e-9) const;
  friend bool operator==(const SpModelParams&, const SpModelParams&) = default;
};

/// Parent-state distribution for the given extended child states.
Simplex reconstruct_transition(const TfModelParams& params, std::span<const int> child_ext_states);

/// log p(k) = -phi * k, unnormalised.
inline double size_prior_log(int k, double phi) noexcept { return -phi * static_cast<double>(k); }

struct StorageCost {
  std::uint64_t explicit_entries = 0;
  std::uint64_t factored_entries = 0;
  /// Set when C^(L+1) overflows; explicit_entries then holds UINT64_MAX.
  bool saturated = false;
};

/// Explicit C^(L+1) transition size versus C * prod(k) core entries plus
/// sum((C+1) * k_l) mode-matrix entries.
StorageCost storage_cost(int num_states, int max_degree, std::span<const int> sizes);

TfModelParams init_params(const HyperParams& hyper, Rng& rng);
SpModelParams init_sp_params(const HyperParams& hyper, Rng& rng);

/// Random split of all extended states into two non-empty groups.
std::vector<int> random_binary_split(int num_ext_states, Rng& rng);

}  // namespace tfhtmm
