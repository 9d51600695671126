#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "tfhtmm/inference.hpp"
#include "tfhtmm/model.hpp"
#include "tfhtmm/numeric.hpp"
#include "tfhtmm/sp_baseline.hpp"
#include "tfhtmm/trees.hpp"

namespace tfhtmm::testing {

inline LabelledTree parse_tree(const std::string& sexpr, int L, int M) {
  return parse_corpus("L=" + std::to_string(L) + " M=" + std::to_string(M) + "\n" + sexpr + "\n").trees.at(0);
}

// Random shape with n nodes: each new node takes a random free slot of an earlier node.
inline LabelledTree random_tree(int n, int L, int M, Rng& rng) {
  std::vector<Node> nodes(static_cast<std::size_t>(n));
  for (auto& nd : nodes) {
    nd.children.assign(static_cast<std::size_t>(L), std::nullopt);
    nd.label = static_cast<int>(sample_index(static_cast<std::size_t>(M), rng));
  }
  for (int i = 1; i < n; ++i) {
    std::vector<std::pair<int, int>> free;
    for (int p = 0; p < i; ++p)
      for (int s = 0; s < L; ++s)
        if (!nodes[static_cast<std::size_t>(p)].children[static_cast<std::size_t>(s)]) free.emplace_back(p, s);
    const auto [p, s] = free[sample_index(free.size(), rng)];
    nodes[static_cast<std::size_t>(p)].children[static_cast<std::size_t>(s)] = static_cast<NodeId>(i);
    nodes[static_cast<std::size_t>(i)].parent = static_cast<NodeId>(p);
    nodes[static_cast<std::size_t>(i)].position = s;
  }
  return LabelledTree(std::move(nodes), 0, L, M);
}

// Random surjective ext -> cluster map with k clusters.
inline std::vector<int> random_assignment(int num_ext, int k, Rng& rng) {
  std::vector<int> ext(static_cast<std::size_t>(num_ext));
  for (int e = 0; e < num_ext; ++e) ext[static_cast<std::size_t>(e)] = e;
  std::shuffle(ext.begin(), ext.end(), rng);
  std::vector<int> row(static_cast<std::size_t>(num_ext), 0);
  for (int i = 0; i < num_ext; ++i)
    row[static_cast<std::size_t>(ext[static_cast<std::size_t>(i)])] =
        i < k ? i : static_cast<int>(sample_index(static_cast<std::size_t>(k), rng));
  return row;
}

inline TfModelParams random_tf_params(int C, int L, int M, Rng& rng) {
  HyperParams h = HyperParams::defaults(C, L, M, L);
  h.seed = rng();
  TfModelParams p = init_params(h, rng);
  for (int l = 0; l < L; ++l) {
    const int k = 1 + static_cast<int>(sample_index(static_cast<std::size_t>(C + 1), rng));
    p.clustering.set_assignment(l, random_assignment(C + 1, k, rng));
  }
  p.clear_core();
  p.materialise_core();
  return p;
}

inline SpModelParams random_sp_params(int C, int L, int M, Rng& rng) {
  HyperParams h = HyperParams::defaults(C, L, M, L);
  SpModelParams p = init_sp_params(h, rng);
  p.switch_weights = sample_dirichlet(static_cast<std::size_t>(L), 1.0, rng);
  return p;
}

// Transition by the explicit sum over every cluster tuple of
// core(i)[j] * prod_l [kappa_l(ext_l) == i_l].
inline double brute_transition(const TfModelParams& p, const std::vector<int>& ext, int j) {
  const auto& cl = p.clustering;
  const int L = cl.num_positions();
  std::vector<int> i(static_cast<std::size_t>(L), 0);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (int l = 0; l < L; ++l)
      w *= cl.assignment(l)[static_cast<std::size_t>(ext[static_cast<std::size_t>(l)])] == i[static_cast<std::size_t>(l)] ? 1.0 : 0.0;
    total += w * p.core(cl.tuple_index(i))[static_cast<std::size_t>(j)];
    int l = 0;
    while (l < L && ++i[static_cast<std::size_t>(l)] == cl.size(l)) i[static_cast<std::size_t>(l++)] = 0;
    if (l == L) break;
  }
  return total;
}

inline std::vector<int> children_ext(const LabelledTree& t, const std::vector<int>& q, NodeId u) {
  std::vector<int> ext;
  for (const auto& c : t.node(u).children) ext.push_back(c ? q[*c] + 1 : 0);
  return ext;
}

// Calls fn(q) for every q in [0, C)^n.
inline void for_each_state_vector(std::size_t n, int C, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> q(n, 0);
  while (true) {
    fn(q);
    std::size_t u = 0;
    while (u < n && ++q[u] == C) q[u++] = 0;
    if (u == n) return;
  }
}

// Prior probability of q (no emissions) under a transition function.
template <typename Transition>
double structure_prob(const LabelledTree& t, const std::vector<int>& q, const std::vector<Simplex>& pi,
                      Transition&& trans) {
  double p = 1.0;
  for (NodeId u = 0; u < t.size(); ++u) {
    if (t.is_leaf(u))
      p *= pi[static_cast<std::size_t>(t.prior_position(u))][static_cast<std::size_t>(q[u])];
    else
      p *= trans(children_ext(t, q, u), q[u]);
  }
  return p;
}

inline double tf_joint_prob(const LabelledTree& t, const std::vector<int>& q, const TfModelParams& p) {
  double v = structure_prob(t, q, p.pi, [&](const std::vector<int>& ext, int j) { return brute_transition(p, ext, j); });
  for (NodeId u = 0; u < t.size(); ++u) v *= p.emission[static_cast<std::size_t>(q[u])][static_cast<std::size_t>(t.label(u))];
  return v;
}

// Same factors as tf_joint_prob, summed in the log domain.
inline double tf_joint_log_prob(const LabelledTree& t, const std::vector<int>& q, const TfModelParams& p) {
  double v = 0.0;
  for (NodeId u = 0; u < t.size(); ++u) {
    v += std::log(p.emission[static_cast<std::size_t>(q[u])][static_cast<std::size_t>(t.label(u))]);
    if (t.is_leaf(u))
      v += std::log(p.pi[static_cast<std::size_t>(t.prior_position(u))][static_cast<std::size_t>(q[u])]);
    else
      v += std::log(brute_transition(p, children_ext(t, q, u), q[u]));
  }
  return v;
}

// |a - b| with equal infinities treated as agreement and NaN as total disagreement.
inline double log_gap(double a, double b) {
  if (a == b) return 0.0;
  const double d = std::abs(a - b);
  return std::isnan(d) ? std::numeric_limits<double>::infinity() : d;
}

inline double sp_trans_oracle(const SpModelParams& p, const std::vector<int>& ext, int j) {
  double v = 0.0;
  for (std::size_t l = 0; l < ext.size(); ++l)
    v += p.switch_weights[l] * p.elementary[l][static_cast<std::size_t>(ext[l])][static_cast<std::size_t>(j)];
  return v;
}

inline double sp_joint_prob(const LabelledTree& t, const std::vector<int>& q, const SpModelParams& p) {
  double v = structure_prob(t, q, p.pi, [&](const std::vector<int>& ext, int j) { return sp_trans_oracle(p, ext, j); });
  for (NodeId u = 0; u < t.size(); ++u) v *= p.emission[static_cast<std::size_t>(q[u])][static_cast<std::size_t>(t.label(u))];
  return v;
}

inline double tf_enumerated_log_marginal(const LabelledTree& t, const TfModelParams& p) {
  double total = 0.0;
  for_each_state_vector(t.size(), p.num_states(), [&](const std::vector<int>& q) { total += tf_joint_prob(t, q, p); });
  return std::log(total);
}

// Enumerates (q, s) jointly: s ranges over every switch position of every internal node.
inline double sp_enumerated_log_marginal(const LabelledTree& t, const SpModelParams& p) {
  std::vector<NodeId> internal;
  for (NodeId u = 0; u < t.size(); ++u)
    if (!t.is_leaf(u)) internal.push_back(u);
  double total = 0.0;
  for_each_state_vector(t.size(), p.num_states, [&](const std::vector<int>& q) {
    for_each_state_vector(internal.size(), p.max_degree, [&](const std::vector<int>& s) {
      double v = 1.0;
      for (NodeId u = 0; u < t.size(); ++u) {
        v *= p.emission[static_cast<std::size_t>(q[u])][static_cast<std::size_t>(t.label(u))];
        if (t.is_leaf(u)) v *= p.pi[static_cast<std::size_t>(t.prior_position(u))][static_cast<std::size_t>(q[u])];
      }
      for (std::size_t i = 0; i < internal.size(); ++i) {
        const NodeId u = internal[i];
        const auto ext = children_ext(t, q, u);
        const auto l = static_cast<std::size_t>(s[i]);
        v *= p.switch_weights[l] * p.elementary[l][static_cast<std::size_t>(ext[l])][static_cast<std::size_t>(q[u])];
      }
      total += v;
    });
  });
  return std::log(total);
}

// P(Q_u = j) with labels ignored.
template <typename Transition>
std::vector<Simplex> enumerated_state_marginals(const LabelledTree& t, int C, const std::vector<Simplex>& pi,
                                                Transition&& trans) {
  std::vector<Simplex> out(t.size(), Simplex(static_cast<std::size_t>(C), 0.0));
  for_each_state_vector(t.size(), C, [&](const std::vector<int>& q) {
    const double w = structure_prob(t, q, pi, trans);
    for (NodeId u = 0; u < t.size(); ++u) out[u][static_cast<std::size_t>(q[u])] += w;
  });
  return out;
}

inline std::vector<Simplex> label_marginals_from_states(const std::vector<Simplex>& states,
                                                        const std::vector<Simplex>& emission) {
  std::vector<Simplex> out;
  for (const auto& s : states) {
    Simplex row(emission.front().size(), 0.0);
    for (std::size_t j = 0; j < s.size(); ++j)
      for (std::size_t d = 0; d < row.size(); ++d) row[d] += s[j] * emission[j][d];
    out.push_back(row);
  }
  return out;
}

// Two classes with disjoint label alphabets: class c uses labels {2c, 2c + 1}.
inline TreeCorpus separable_corpus(int per_class, Rng& rng) {
  TreeCorpus c;
  c.max_degree = 2;
  c.alphabet_size = 4;
  c.class_count = 2;
  std::vector<int> cls;
  for (int i = 0; i < 2 * per_class; ++i) {
    const int k = i % 2;
    const auto shape = random_tree(3 + static_cast<int>(sample_index(8, rng)), 2, 4, rng);
    std::vector<int> labels(shape.size());
    for (auto& l : labels) l = 2 * k + static_cast<int>(sample_index(2, rng));
    c.trees.push_back(shape.with_labels(labels));
    cls.push_back(k);
  }
  c.class_labels = cls;
  return c;
}

}  // namespace tfhtmm::testing
