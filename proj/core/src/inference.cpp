#include "tfhtmm/inference.hpp"

#include <cmath>

#include "tfhtmm/errors.hpp"

namespace tfhtmm {

namespace {

void check_latent_shape(const LabelledTree& tree, const LatentAssignment& latent, int num_states) {
  if (latent.q.size() != tree.size() || latent.max_degree != tree.max_degree() ||
      latent.z.size() != tree.size() * static_cast<std::size_t>(tree.max_degree()))
    throw DomainError("latent assignment does not match the tree");
  for (int s : latent.q)
    if (s < 0 || s >= num_states) throw DomainError("hidden state out of range");
}

void check_compatible(const LabelledTree& tree, const TfModelParams& params) {
  if (tree.max_degree() != params.max_degree())
    throw ConfigError("tree L differs from model L");
  if (tree.alphabet_size() > params.alphabet_size())
    throw ConfigError("tree M exceeds model M");
}

}  // namespace

std::vector<int> child_ext_states(const LabelledTree& tree, const std::vector<int>& q, NodeId u) {
  std::vector<int> out(static_cast<std::size_t>(tree.max_degree()), kAbsentChild);
  for (int l = 0; l < tree.max_degree(); ++l)
    if (const auto c = tree.child(u, l)) out[static_cast<std::size_t>(l)] = ext_state(q[*c]);
  return out;
}

void assign_clusters(const LabelledTree& tree, const HardClustering& clustering,
                     LatentAssignment& latent) {
  for (NodeId u = 0; u < tree.size(); ++u) {
    if (tree.is_leaf(u)) continue;
    for (int l = 0; l < tree.max_degree(); ++l) {
      const auto c = tree.child(u, l);
      latent.z_at(u, l) = clustering.cluster_of(l, c ? ext_state(latent.q[*c]) : kAbsentChild);
    }
  }
}

namespace detail {

std::vector<double> mix_core(const TfModelParams& params,
                             const std::vector<std::vector<double>>& weights) {
  const auto& clustering = params.clustering;
  const int L = params.max_degree();
  const auto C = static_cast<std::size_t>(params.num_states());
  std::vector<double> out(C, 0.0);

  double base = 1.0;
  std::vector<int> active;
  std::vector<std::vector<int>> support;
  for (int l = 0; l < L; ++l) {
    const auto& w = weights[static_cast<std::size_t>(l)];
    if (clustering.size(l) == 1) {
      base *= w[0];
      continue;
    }
    std::vector<int> nz;
    for (int i = 0; i < clustering.size(l); ++i)
      if (w[static_cast<std::size_t>(i)] != 0.0) nz.push_back(i);
    if (nz.empty()) return out;
    active.push_back(l);
    support.push_back(std::move(nz));
  }
  if (base == 0.0) return out;

  std::vector<int> tuple(static_cast<std::size_t>(L), 0);
  std::vector<std::size_t> cursor(active.size(), 0);
  for (;;) {
    double w = base;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const int l = active[a];
      const int i = support[a][cursor[a]];
      tuple[static_cast<std::size_t>(l)] = i;
      w *= weights[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
    }
    const Simplex& row = params.core(clustering.tuple_index(tuple));
    for (std::size_t j = 0; j < C; ++j) out[j] += w * row[j];

    std::size_t a = 0;
    for (; a < active.size(); ++a) {
      if (++cursor[a] < support[a].size()) break;
      cursor[a] = 0;
    }
    if (a == active.size()) break;
  }
  return out;
}

}  // namespace detail

double complete_log_likelihood(const LabelledTree& tree, const LatentAssignment& latent,
                               const TfModelParams& params) {
  check_compatible(tree, params);
  check_latent_shape(tree, latent, params.num_states());
  const int L = tree.max_degree();
  double total = 0.0;
  std::vector<int> tuple(static_cast<std::size_t>(L));
  for (NodeId u = 0; u < tree.size(); ++u) {
    const auto j = static_cast<std::size_t>(latent.q[u]);
    total += std::log(params.emission[j][static_cast<std::size_t>(tree.label(u))]);
    if (tree.is_leaf(u)) {
      total += std::log(params.pi[static_cast<std::size_t>(tree.prior_position(u))][j]);
      continue;
    }
    for (int l = 0; l < L; ++l) {
      const auto c = tree.child(u, l);
      const int expected =
          params.clustering.cluster_of(l, c ? ext_state(latent.q[*c]) : kAbsentChild);
      if (latent.z_at(u, l) != expected) return kLogZero;
      tuple[static_cast<std::size_t>(l)] = expected;
    }
    total += std::log(params.core(params.clustering.tuple_index(tuple))[j]);
  }
  return total;
}

double marginal_log_likelihood(const LabelledTree& tree, const TfModelParams& params) {
  check_compatible(tree, params);
  const int L = tree.max_degree();
  const auto C = static_cast<std::size_t>(params.num_states());
  const auto& clustering = params.clustering;
  std::vector<std::vector<double>> beta(tree.size());
  std::vector<double> log_scale(tree.size(), 0.0);
  std::vector<std::vector<double>> gamma(static_cast<std::size_t>(L));

  for (NodeId u : tree.bottom_up_order()) {
    const auto x = static_cast<std::size_t>(tree.label(u));
    std::vector<double> b(C);
    double scale = 0.0;
    if (tree.is_leaf(u)) {
      const auto& prior = params.pi[static_cast<std::size_t>(tree.prior_position(u))];
      for (std::size_t j = 0; j < C; ++j) b[j] = prior[j];
    } else {
      for (int l = 0; l < L; ++l) {
        auto& g = gamma[static_cast<std::size_t>(l)];
        g.assign(static_cast<std::size_t>(clustering.size(l)), 0.0);
        if (const auto c = tree.child(u, l)) {
          for (std::size_t j = 0; j < C; ++j)
            g[static_cast<std::size_t>(clustering.cluster_of(l, ext_state(static_cast<int>(j))))] +=
                beta[*c][j];
          scale += log_scale[*c];
        } else {
          g[static_cast<std::size_t>(clustering.cluster_of(l, kAbsentChild))] = 1.0;
        }
      }
      b = detail::mix_core(params, gamma);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      b[j] *= params.emission[j][x];
      z += b[j];
    }
    if (!(z > 0.0)) return kLogZero;
    for (auto& v : b) v /= z;
    log_scale[u] = scale + std::log(z);
    beta[u] = std::move(b);
    if (!tree.is_leaf(u))
      for (int l = 0; l < L; ++l)
        if (const auto c = tree.child(u, l)) std::vector<double>().swap(beta[*c]);
  }
  return log_scale[tree.root()];
}

std::vector<Simplex> node_state_marginals(const LabelledTree& structure, const TfModelParams& params) {
  if (structure.max_degree() != params.max_degree()) throw ConfigError("tree L differs from model L");
  const int L = structure.max_degree();
  const auto C = static_cast<std::size_t>(params.num_states());
  const auto& clustering = params.clustering;
  std::vector<Simplex> state(structure.size());
  std::vector<std::vector<double>> weights(static_cast<std::size_t>(L));
  for (NodeId u : structure.bottom_up_order()) {
    if (structure.is_leaf(u)) {
      state[u] = params.pi[static_cast<std::size_t>(structure.prior_position(u))];
      continue;
    }
    for (int l = 0; l < L; ++l) {
      auto& w = weights[static_cast<std::size_t>(l)];
      w.assign(static_cast<std::size_t>(clustering.size(l)), 0.0);
      if (const auto c = structure.child(u, l)) {
        for (std::size_t j = 0; j < C; ++j)
          w[static_cast<std::size_t>(clustering.cluster_of(l, ext_state(static_cast<int>(j))))] +=
              state[*c][j];
      } else {
        w[static_cast<std::size_t>(clustering.cluster_of(l, kAbsentChild))] = 1.0;
      }
    }
    state[u] = detail::mix_core(params, weights);
  }
  return state;
}

std::vector<Simplex> node_label_marginals(const LabelledTree& structure, const TfModelParams& params) {
  const auto states = node_state_marginals(structure, params);
  const auto M = static_cast<std::size_t>(params.alphabet_size());
  std::vector<Simplex> out(structure.size(), Simplex(M, 0.0));
  for (NodeId u = 0; u < structure.size(); ++u) {
    double total = 0.0;
    for (std::size_t j = 0; j < states[u].size(); ++j)
      for (std::size_t d = 0; d < M; ++d) {
        const double v = states[u][j] * params.emission[j][d];
        out[u][d] += v;
        total += v;
      }
    if (total > 0.0)
      for (auto& v : out[u]) v /= total;
  }
  return out;
}

LatentAssignment sample_latents(const LabelledTree& structure, const TfModelParams& params, Rng& rng) {
  if (structure.max_degree() != params.max_degree()) throw ConfigError("tree L differs from model L");
  const int L = structure.max_degree();
  LatentAssignment latent(structure.size(), L);
  for (NodeId u : structure.leaves())
    latent.q[u] = static_cast<int>(
        sample_categorical(params.pi[static_cast<std::size_t>(structure.prior_position(u))], rng));
  std::vector<int> tuple(static_cast<std::size_t>(L));
  for (NodeId u : structure.bottom_up_order()) {
    if (structure.is_leaf(u)) continue;
    for (int l = 0; l < L; ++l) {
      const auto c = structure.child(u, l);
      const int j = c ? ext_state(latent.q[*c]) : kAbsentChild;
      // One-hot mode row: the draw is the cluster itself.
      latent.z_at(u, l) = params.clustering.cluster_of(l, j);
      tuple[static_cast<std::size_t>(l)] = latent.z_at(u, l);
    }
    latent.q[u] = static_cast<int>(
        sample_categorical(params.core(params.clustering.tuple_index(tuple)), rng));
  }
  return latent;
}

AncestralSample ancestral_sample(const LabelledTree& structure, const TfModelParams& params, Rng& rng) {
  AncestralSample out;
  out.latent = sample_latents(structure, params, rng);
  out.labels.resize(structure.size());
  for (NodeId u = 0; u < structure.size(); ++u)
    out.labels[u] = static_cast<int>(
        sample_categorical(params.emission[static_cast<std::size_t>(out.latent.q[u])], rng));
  return out;
}

}  // namespace tfhtmm
