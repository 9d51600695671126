#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tfhtmm/inference.hpp"
#include "tfhtmm/model.hpp"
#include "tfhtmm/trees.hpp"

namespace tfhtmm {

using Counts = std::vector<std::int64_t>;

/// Count tables behind every conjugate update.
///
/// `joint_counts` keys are the extended states of an internal node's children
/// (one per position); the value counts that node's hidden state. Tuple
/// counts for any clustering are derived from it without touching the trees.
struct SufficientStats {
  int num_states = 0;
  int max_degree = 0;
  int alphabet_size = 0;
  std::vector<Counts> leaf_counts;      // [position][state]
  std::vector<Counts> emission_counts;  // [state][label]
  std::map<std::vector<int>, Counts> joint_counts;

  SufficientStats() = default;
  SufficientStats(int num_states, int max_degree, int alphabet_size);

  void add_tree(const LabelledTree& tree, const std::vector<int>& q);

  /// n_{tuple}(j) under `clustering`, keyed by tuple index; only occupied tuples.
  std::map<std::uint64_t, Counts> transition_counts(const HardClustering& clustering) const;

  friend bool operator==(const SufficientStats&, const SufficientStats&) = default;
};

SufficientStats compute_stats(const std::vector<LabelledTree>& trees,
                              const std::vector<std::vector<int>>& states, int num_states,
                              int max_degree, int alphabet_size);

struct AnnealingSchedule {
  double t0 = 10.0;
  int m0 = 50;
};

/// max(T0^(1 - m/m0), 1).
double temperature(int iteration, const AnnealingSchedule& schedule);

/// Bottom-up proposal of new latent states (same draw as sample_latents).
LatentAssignment propose_latents(const LabelledTree& tree, const TfModelParams& params, Rng& rng);

/// Acceptance probability of `proposed` against `current`, tempered by 1/T.
/// Identical assignments are accepted with probability exactly 1.
double latent_acceptance(const LabelledTree& tree, const LatentAssignment& current,
                         const LatentAssignment& proposed, const TfModelParams& params,
                         double temperature, LatentAcceptance rule);

/// log of prod over occupied tuples of B(alpha*lambda0 + n) / B(alpha*lambda0).
double marginal_likelihood_k(const std::map<std::uint64_t, Counts>& tuple_counts, double alpha,
                             const Simplex& lambda0);
double marginal_likelihood_k(const SufficientStats& stats, const HardClustering& clustering,
                             double alpha, const Simplex& lambda0);

/// One split/merge move on a random position followed by the window repair.
HardClustering propose_size_move(const HardClustering& clustering, const HyperParams& hyper, Rng& rng);

/// min{[L(k')/L(k) * prod p(k'_l) / prod p(k_l)]^(1/T), 1}.
double size_acceptance(const HardClustering& old_clustering, const HardClustering& new_clustering,
                       const SufficientStats& stats, const HyperParams& hyper,
                       const Simplex& lambda0, double temperature);

struct ParameterDraw {
  std::vector<Simplex> pi;
  std::vector<Simplex> emission;
  std::map<std::uint64_t, Simplex> core;
};

/// Conjugate Dirichlet draws for pi, b and every occupied core tuple.
ParameterDraw resample_parameters(const SufficientStats& stats, const HyperParams& hyper,
                                  const HardClustering& clustering, const Simplex& lambda0, Rng& rng);

/// Sum of n Bernoulli(c / (p - 1 + c)) draws, p = 1..n.
std::int64_t table_count(std::int64_t n, double concentration, Rng& rng);

/// Auxiliary-count draw of the base measure lambda0.
Simplex resample_lambda0(const std::map<std::uint64_t, Counts>& tuple_counts, double alpha,
                         double alpha0, const Simplex& lambda0, Rng& rng);

struct TrainingLogRow {
  int iteration = 0;
  double temperature = 1.0;
  double log_likelihood = 0.0;
  double latent_acceptance_rate = 0.0;
  bool size_accepted = false;
  std::vector<int> sizes;
};

/// Tab-separated: iteration, temperature, log-likelihood, acceptance rate,
/// size flag, comma-joined k vector.
std::string format_log_row(const TrainingLogRow& row);
std::string log_header();

using TrainingLogger = std::function<void(const TrainingLogRow&)>;

struct ChainState {
  TfModelParams params;
  std::vector<LatentAssignment> latents;
  SufficientStats stats;
  int iteration = 0;
  Rng rng;
  std::int64_t latent_accepts = 0;
  std::int64_t latent_proposals = 0;
  std::int64_t size_accepts = 0;
  std::int64_t size_proposals = 0;
};

/// Initial parameters from hyper.seed and one ancestral draw of latents per tree.
ChainState init_chain(const TreeCorpus& corpus, const HyperParams& hyper);

/// One sweep at iteration chain.iteration: latents, one size move, conjugate
/// draws, base measure. The returned row has no log-likelihood filled in.
TrainingLogRow gibbs_sweep(ChainState& chain, const TreeCorpus& corpus, const HyperParams& hyper);

/// Full annealed sampler; returns the last chain state with every core
/// entry materialised.
ChainState train(const TreeCorpus& corpus, const HyperParams& hyper,
                 const TrainingLogger& logger = {});

/// Throws ConfigError when the corpus does not fit the hyper-parameters.
void check_corpus_fits(const TreeCorpus& corpus, const HyperParams& hyper);

}  // namespace tfhtmm
