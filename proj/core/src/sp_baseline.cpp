#include "tfhtmm/sp_baseline.hpp"

#include <cmath>

#include "tfhtmm/errors.hpp"

namespace tfhtmm {

namespace {

int child_ext(const LabelledTree& tree, const std::vector<int>& q, NodeId u, int slot) {
  const auto c = tree.child(u, slot);
  return c ? ext_state(q[*c]) : kAbsentChild;
}

const Simplex& elementary_row(const SpModelParams& params, const LabelledTree& tree,
                              const std::vector<int>& q, NodeId u, int slot) {
  return params.elementary[static_cast<std::size_t>(slot)]
                          [static_cast<std::size_t>(child_ext(tree, q, u, slot))];
}

void check_compatible(const LabelledTree& tree, const SpModelParams& params) {
  if (tree.max_degree() != params.max_degree) throw ConfigError("tree L differs from model L");
  if (tree.alphabet_size() > params.alphabet_size) throw ConfigError("tree M exceeds model M");
}

double tempered(double log_num, double log_den, double temperature) {
  if (log_num == kLogZero) return 0.0;
  if (log_den == kLogZero) return 1.0;
  if (std::isinf(temperature)) return 1.0;
  const double r = (log_num - log_den) / temperature;
  return r >= 0.0 ? 1.0 : std::exp(r);
}

}  // namespace

Simplex sp_transition(const SpModelParams& params, std::span<const int> child_ext_states) {
  if (child_ext_states.size() != static_cast<std::size_t>(params.max_degree))
    throw DomainError("need one extended state per child position");
  const auto C = static_cast<std::size_t>(params.num_states);
  Simplex out(C, 0.0);
  for (std::size_t l = 0; l < child_ext_states.size(); ++l) {
    const int e = child_ext_states[l];
    if (e < 0 || e > params.num_states) throw DomainError("extended child state out of range");
    const auto& row = params.elementary[l][static_cast<std::size_t>(e)];
    for (std::size_t j = 0; j < C; ++j) out[j] += params.switch_weights[l] * row[j];
  }
  return out;
}

double sp_complete_log_likelihood(const LabelledTree& tree, const SpLatentAssignment& latent,
                                  const SpModelParams& params) {
  check_compatible(tree, params);
  if (latent.q.size() != tree.size() || latent.s.size() != tree.size())
    throw DomainError("latent assignment does not match the tree");
  double total = 0.0;
  for (NodeId u = 0; u < tree.size(); ++u) {
    const auto j = static_cast<std::size_t>(latent.q[u]);
    total += std::log(params.emission[j][static_cast<std::size_t>(tree.label(u))]);
    if (tree.is_leaf(u)) {
      total += std::log(params.pi[static_cast<std::size_t>(tree.prior_position(u))][j]);
      continue;
    }
    const int s = latent.s[u];
    if (s < 0 || s >= params.max_degree) throw DomainError("switch position out of range");
    total += std::log(params.switch_weights[static_cast<std::size_t>(s)]) +
             std::log(elementary_row(params, tree, latent.q, u, s)[j]);
  }
  return total;
}

double sp_marginal_log_likelihood(const LabelledTree& tree, const SpModelParams& params) {
  check_compatible(tree, params);
  const auto C = static_cast<std::size_t>(params.num_states);
  const int L = params.max_degree;
  std::vector<std::vector<double>> beta(tree.size());
  std::vector<double> log_scale(tree.size(), 0.0);
  for (NodeId u : tree.bottom_up_order()) {
    std::vector<double> b(C, 0.0);
    double scale = 0.0;
    if (tree.is_leaf(u)) {
      b = params.pi[static_cast<std::size_t>(tree.prior_position(u))];
    } else {
      // child tables are normalised; subtree mass lives in the log scales
      for (int l = 0; l < L; ++l) {
        const auto& mat = params.elementary[static_cast<std::size_t>(l)];
        const double w = params.switch_weights[static_cast<std::size_t>(l)];
        if (const auto c = tree.child(u, l)) {
          scale += log_scale[*c];
          for (std::size_t jc = 0; jc < C; ++jc) {
            const double p = w * beta[*c][jc];
            if (p == 0.0) continue;
            const auto& row = mat[static_cast<std::size_t>(ext_state(static_cast<int>(jc)))];
            for (std::size_t j = 0; j < C; ++j) b[j] += p * row[j];
          }
        } else {
          const auto& row = mat[kAbsentChild];
          for (std::size_t j = 0; j < C; ++j) b[j] += w * row[j];
        }
      }
    }
    const auto x = static_cast<std::size_t>(tree.label(u));
    double z = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      b[j] *= params.emission[j][x];
      z += b[j];
    }
    if (!(z > 0.0)) return kLogZero;
    for (auto& v : b) v /= z;
    log_scale[u] = scale + std::log(z);
    beta[u] = std::move(b);
  }
  return log_scale[tree.root()];
}

std::vector<Simplex> sp_node_state_marginals(const LabelledTree& structure, const SpModelParams& params) {
  if (structure.max_degree() != params.max_degree) throw ConfigError("tree L differs from model L");
  const auto C = static_cast<std::size_t>(params.num_states);
  std::vector<Simplex> state(structure.size());
  for (NodeId u : structure.bottom_up_order()) {
    if (structure.is_leaf(u)) {
      state[u] = params.pi[static_cast<std::size_t>(structure.prior_position(u))];
      continue;
    }
    Simplex p(C, 0.0);
    for (int l = 0; l < params.max_degree; ++l) {
      const auto& mat = params.elementary[static_cast<std::size_t>(l)];
      const double w = params.switch_weights[static_cast<std::size_t>(l)];
      if (const auto c = structure.child(u, l)) {
        for (std::size_t jc = 0; jc < C; ++jc) {
          const auto& row = mat[static_cast<std::size_t>(ext_state(static_cast<int>(jc)))];
          for (std::size_t j = 0; j < C; ++j) p[j] += w * state[*c][jc] * row[j];
        }
      } else {
        for (std::size_t j = 0; j < C; ++j) p[j] += w * mat[kAbsentChild][j];
      }
    }
    state[u] = std::move(p);
  }
  return state;
}

std::vector<Simplex> sp_node_label_marginals(const LabelledTree& structure, const SpModelParams& params) {
  const auto states = sp_node_state_marginals(structure, params);
  const auto M = static_cast<std::size_t>(params.alphabet_size);
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

SpLatentAssignment sp_propose_latents(const LabelledTree& tree, const SpModelParams& params, Rng& rng) {
  SpLatentAssignment out;
  out.q.assign(tree.size(), 0);
  out.s.assign(tree.size(), -1);
  for (NodeId u : tree.leaves())
    out.q[u] = static_cast<int>(
        sample_categorical(params.pi[static_cast<std::size_t>(tree.prior_position(u))], rng));
  for (NodeId u : tree.bottom_up_order()) {
    if (tree.is_leaf(u)) continue;
    const int s = static_cast<int>(sample_categorical(params.switch_weights, rng));
    out.s[u] = s;
    out.q[u] = static_cast<int>(sample_categorical(elementary_row(params, tree, out.q, u, s), rng));
  }
  return out;
}

double sp_latent_acceptance(const LabelledTree& tree, const SpLatentAssignment& current,
                            const SpLatentAssignment& proposed, const SpModelParams& params,
                            double temperature, LatentAcceptance rule) {
  if (current == proposed) return 1.0;
  double num = 0.0;
  double den = 0.0;
  if (rule == LatentAcceptance::kEmission) {
    for (NodeId u = 0; u < tree.size(); ++u) {
      const auto x = static_cast<std::size_t>(tree.label(u));
      num += std::log(params.emission[static_cast<std::size_t>(proposed.q[u])][x]);
      den += std::log(params.emission[static_cast<std::size_t>(current.q[u])][x]);
    }
    return tempered(num, den, temperature);
  }
  for (NodeId u = 0; u < tree.size(); ++u) {
    if (tree.is_leaf(u)) continue;
    const auto qn = static_cast<std::size_t>(proposed.q[u]);
    const auto qo = static_cast<std::size_t>(current.q[u]);
    const auto& row_new = elementary_row(params, tree, proposed.q, u, proposed.s[u]);
    const auto& row_old = elementary_row(params, tree, current.q, u, current.s[u]);
    num += std::log(row_new[qn]);
    den += std::log(row_old[qo]);
    if (rule == LatentAcceptance::kAsPrinted) {
      num += std::log(row_new[qo]);
      den += std::log(row_old[qn]);
    }
  }
  return tempered(num, den, temperature);
}

SpStats sp_compute_stats(const std::vector<LabelledTree>& trees,
                         const std::vector<SpLatentAssignment>& latents, const HyperParams& hyper) {
  const auto C = static_cast<std::size_t>(hyper.num_states);
  const auto L = static_cast<std::size_t>(hyper.max_degree);
  SpStats st;
  st.leaf_counts.assign(L, Counts(C, 0));
  st.emission_counts.assign(C, Counts(static_cast<std::size_t>(hyper.alphabet_size), 0));
  st.switch_counts.assign(L, 0);
  st.elementary_counts.assign(L, std::vector<Counts>(C + 1, Counts(C, 0)));
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& tree = trees[t];
    const auto& lat = latents[t];
    for (NodeId u = 0; u < tree.size(); ++u) {
      const auto j = static_cast<std::size_t>(lat.q[u]);
      ++st.emission_counts[j][static_cast<std::size_t>(tree.label(u))];
      if (tree.is_leaf(u)) {
        ++st.leaf_counts[static_cast<std::size_t>(tree.prior_position(u))][j];
        continue;
      }
      const int s = lat.s[u];
      ++st.switch_counts[static_cast<std::size_t>(s)];
      ++st.elementary_counts[static_cast<std::size_t>(s)]
                            [static_cast<std::size_t>(child_ext(tree, lat.q, u, s))][j];
    }
  }
  return st;
}

void sp_resample_parameters(const SpStats& stats, const HyperParams& hyper, SpModelParams& params,
                            Rng& rng) {
  auto posterior = [&rng](const Counts& counts, double prior) {
    std::vector<double> conc(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) conc[i] = prior + static_cast<double>(counts[i]);
    return sample_dirichlet(conc, rng);
  };
  for (std::size_t l = 0; l < stats.leaf_counts.size(); ++l)
    params.pi[l] = posterior(stats.leaf_counts[l], hyper.gamma);
  for (std::size_t j = 0; j < stats.emission_counts.size(); ++j)
    params.emission[j] = posterior(stats.emission_counts[j], hyper.beta);
  params.switch_weights = posterior(stats.switch_counts, 1.0);
  const double row_prior = hyper.alpha / hyper.num_states;
  for (std::size_t l = 0; l < stats.elementary_counts.size(); ++l)
    for (std::size_t e = 0; e < stats.elementary_counts[l].size(); ++e)
      params.elementary[l][e] = posterior(stats.elementary_counts[l][e], row_prior);
}

SpChainState sp_init_chain(const TreeCorpus& corpus, const HyperParams& hyper) {
  check_corpus_fits(corpus, hyper);
  SpChainState chain;
  chain.rng.seed(hyper.seed);
  chain.params = init_sp_params(hyper, chain.rng);
  for (const auto& t : corpus.trees) chain.latents.push_back(sp_propose_latents(t, chain.params, chain.rng));
  chain.stats = sp_compute_stats(corpus.trees, chain.latents, hyper);
  return chain;
}

TrainingLogRow sp_gibbs_sweep(SpChainState& chain, const TreeCorpus& corpus, const HyperParams& hyper) {
  const auto& trees = corpus.trees;
  const int m = chain.iteration;
  const double temp = temperature(m, AnnealingSchedule{hyper.t0, hyper.m0});
  std::int64_t accepted = 0;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    SpLatentAssignment proposal = sp_propose_latents(trees[t], chain.params, chain.rng);
    const double a = sp_latent_acceptance(trees[t], chain.latents[t], proposal, chain.params, temp,
                                          hyper.acceptance);
    if (sample_uniform(chain.rng) < a) {
      chain.latents[t] = std::move(proposal);
      ++accepted;
    }
  }
  chain.latent_accepts += accepted;
  chain.latent_proposals += static_cast<std::int64_t>(trees.size());
  chain.stats = sp_compute_stats(trees, chain.latents, hyper);
  sp_resample_parameters(chain.stats, hyper, chain.params, chain.rng);
  chain.iteration = m + 1;

  TrainingLogRow row;
  row.iteration = m;
  row.temperature = temp;
  row.latent_acceptance_rate =
      trees.empty() ? 0.0 : static_cast<double>(accepted) / static_cast<double>(trees.size());
  row.sizes.assign(static_cast<std::size_t>(hyper.max_degree), 1);
  return row;
}

SpChainState sp_train(const TreeCorpus& corpus, const HyperParams& hyper, const TrainingLogger& logger) {
  SpChainState chain = sp_init_chain(corpus, hyper);
  for (int m = 0; m < hyper.iterations; ++m) {
    TrainingLogRow row = sp_gibbs_sweep(chain, corpus, hyper);
    if (logger) {
      for (std::size_t t = 0; t < corpus.trees.size(); ++t)
        row.log_likelihood += sp_complete_log_likelihood(corpus.trees[t], chain.latents[t], chain.params);
      logger(row);
    }
  }
  return chain;
}

}  // namespace tfhtmm
