#pragma once

#include <vector>

#include "tfhtmm/model.hpp"
#include "tfhtmm/trees.hpp"

namespace tfhtmm {

/// Hidden states per node plus one cluster slot per child position of every
/// internal node (absent children included). Leaf rows of `z` hold -1.
struct LatentAssignment {
  int max_degree = 0;
  std::vector<int> q;  // node -> hidden state in [0, C)
  std::vector<int> z;  // node * L + slot -> cluster index

  LatentAssignment() = default;
  LatentAssignment(std::size_t num_nodes, int max_degree)
      : max_degree(max_degree),
        q(num_nodes, 0),
        z(num_nodes * static_cast<std::size_t>(max_degree), -1) {}

  int& z_at(NodeId u, int slot) { return z[u * static_cast<std::size_t>(max_degree) + static_cast<std::size_t>(slot)]; }
  int z_at(NodeId u, int slot) const {
    return z[u * static_cast<std::size_t>(max_degree) + static_cast<std::size_t>(slot)];
  }

  friend bool operator==(const LatentAssignment&, const LatentAssignment&) = default;
};

/// Extended states (absent = 0, hidden j = j + 1) of u's children under q.
std::vector<int> child_ext_states(const LabelledTree& tree, const std::vector<int>& q, NodeId u);

/// Rewrites every z slot to the cluster its child state falls in.
void assign_clusters(const LabelledTree& tree, const HardClustering& clustering,
                     LatentAssignment& latent);

/// log P(x, Q, z | params). Returns kLogZero when a z slot disagrees with the
/// hard clustering of its child state.
double complete_log_likelihood(const LabelledTree& tree, const LatentAssignment& latent,
                               const TfModelParams& params);

/// log P(x | params) by an upward pass over cluster tables, rescaled per node.
double marginal_log_likelihood(const LabelledTree& tree, const TfModelParams& params);

/// P(Q_u = j) for every node, ignoring labels.
std::vector<Simplex> node_state_marginals(const LabelledTree& structure, const TfModelParams& params);

/// P(x_u = d) for every node, ignoring labels.
std::vector<Simplex> node_label_marginals(const LabelledTree& structure, const TfModelParams& params);

/// Bottom-up draw of (Q, z): leaves from the positional prior, each z slot
/// from the mode row of its (possibly absent) child, internal states from the
/// core entry at the drawn cluster tuple.
LatentAssignment sample_latents(const LabelledTree& structure, const TfModelParams& params, Rng& rng);

struct AncestralSample {
  LatentAssignment latent;
  std::vector<int> labels;
};

/// sample_latents followed by one emission draw per node.
AncestralSample ancestral_sample(const LabelledTree& structure, const TfModelParams& params, Rng& rng);

namespace detail {

/// sum over cluster tuples of core(tuple)[j] * prod_l weights[l][i_l].
/// Zero weights are skipped, so one-hot tables cost nothing.
std::vector<double> mix_core(const TfModelParams& params,
                             const std::vector<std::vector<double>>& weights);

}  // namespace detail

}  // namespace tfhtmm
