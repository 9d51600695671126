#pragma once

#include <vector>

#include "tfhtmm/gibbs.hpp"
#include "tfhtmm/model.hpp"
#include "tfhtmm/trees.hpp"

namespace tfhtmm {

/// Hidden states plus the switching-parent position of each internal node
/// (-1 on leaves).
struct SpLatentAssignment {
  std::vector<int> q;
  std::vector<int> s;
  friend bool operator==(const SpLatentAssignment&, const SpLatentAssignment&) = default;
};

/// sum_l P(S = l) * elementary[l][child_ext_states[l]].
Simplex sp_transition(const SpModelParams& params, std::span<const int> child_ext_states);

double sp_complete_log_likelihood(const LabelledTree& tree, const SpLatentAssignment& latent,
                                  const SpModelParams& params);

/// Exact log P(x) under the switching-parent transition, rescaled upward pass.
double sp_marginal_log_likelihood(const LabelledTree& tree, const SpModelParams& params);

std::vector<Simplex> sp_node_state_marginals(const LabelledTree& structure, const SpModelParams& params);
std::vector<Simplex> sp_node_label_marginals(const LabelledTree& structure, const SpModelParams& params);

/// Leaves from the positional prior; each internal node draws its switch
/// position, then its state from that position's elementary row.
SpLatentAssignment sp_propose_latents(const LabelledTree& tree, const SpModelParams& params, Rng& rng);

double sp_latent_acceptance(const LabelledTree& tree, const SpLatentAssignment& current,
                            const SpLatentAssignment& proposed, const SpModelParams& params,
                            double temperature, LatentAcceptance rule);

struct SpStats {
  std::vector<Counts> leaf_counts;        // [position][state]
  std::vector<Counts> emission_counts;    // [state][label]
  Counts switch_counts;                   // [position]
  std::vector<std::vector<Counts>> elementary_counts;  // [position][ext][state]

  friend bool operator==(const SpStats&, const SpStats&) = default;
};

SpStats sp_compute_stats(const std::vector<LabelledTree>& trees,
                         const std::vector<SpLatentAssignment>& latents, const HyperParams& hyper);

struct SpChainState {
  SpModelParams params;
  std::vector<SpLatentAssignment> latents;
  SpStats stats;
  int iteration = 0;
  Rng rng;
  std::int64_t latent_accepts = 0;
  std::int64_t latent_proposals = 0;
};

/// Conjugate draws: pi ~ Dir(gamma + n), b ~ Dir(beta + n), switch ~ Dir(1 + n),
/// elementary rows ~ Dir(alpha / C + n).
void sp_resample_parameters(const SpStats& stats, const HyperParams& hyper, SpModelParams& params,
                            Rng& rng);

SpChainState sp_init_chain(const TreeCorpus& corpus, const HyperParams& hyper);
TrainingLogRow sp_gibbs_sweep(SpChainState& chain, const TreeCorpus& corpus, const HyperParams& hyper);

/// Annealed Metropolis-within-Gibbs analogue of train() for the
/// switching-parent model. Log rows report k as all ones.
SpChainState sp_train(const TreeCorpus& corpus, const HyperParams& hyper,
                      const TrainingLogger& logger = {});

}  // namespace tfhtmm
