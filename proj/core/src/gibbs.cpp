#include "tfhtmm/gibbs.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

#include "tfhtmm/errors.hpp"

namespace tfhtmm {

SufficientStats::SufficientStats(int num_states, int max_degree, int alphabet_size)
    : num_states(num_states),
      max_degree(max_degree),
      alphabet_size(alphabet_size),
      leaf_counts(static_cast<std::size_t>(max_degree), Counts(static_cast<std::size_t>(num_states), 0)),
      emission_counts(static_cast<std::size_t>(num_states),
                      Counts(static_cast<std::size_t>(alphabet_size), 0)) {}

void SufficientStats::add_tree(const LabelledTree& tree, const std::vector<int>& q) {
  for (NodeId u = 0; u < tree.size(); ++u) {
    const auto j = static_cast<std::size_t>(q[u]);
    ++emission_counts[j][static_cast<std::size_t>(tree.label(u))];
    if (tree.is_leaf(u)) {
      ++leaf_counts[static_cast<std::size_t>(tree.prior_position(u))][j];
    } else {
      auto [it, inserted] = joint_counts.try_emplace(child_ext_states(tree, q, u),
                                                     Counts(static_cast<std::size_t>(num_states), 0));
      ++it->second[j];
    }
  }
}

std::map<std::uint64_t, Counts> SufficientStats::transition_counts(
    const HardClustering& clustering) const {
  std::map<std::uint64_t, Counts> out;
  for (const auto& [children, counts] : joint_counts) {
    auto [it, inserted] = out.try_emplace(clustering.tuple_index_for_children(children),
                                          Counts(counts.size(), 0));
    for (std::size_t j = 0; j < counts.size(); ++j) it->second[j] += counts[j];
  }
  return out;
}

SufficientStats compute_stats(const std::vector<LabelledTree>& trees,
                              const std::vector<std::vector<int>>& states, int num_states,
                              int max_degree, int alphabet_size) {
  SufficientStats stats(num_states, max_degree, alphabet_size);
  for (std::size_t t = 0; t < trees.size(); ++t) stats.add_tree(trees[t], states[t]);
  return stats;
}

double temperature(int iteration, const AnnealingSchedule& schedule) {
  const double exponent = 1.0 - static_cast<double>(iteration) / static_cast<double>(schedule.m0);
  return std::max(std::pow(schedule.t0, exponent), 1.0);
}

LatentAssignment propose_latents(const LabelledTree& tree, const TfModelParams& params, Rng& rng) {
  return sample_latents(tree, params, rng);
}

namespace {

// Log-domain ratio; -inf numerator gives 0, -inf denominator gives 1.
double tempered_acceptance(double log_num, double log_den, double temperature) {
  if (log_num == kLogZero) return 0.0;
  if (log_den == kLogZero) return 1.0;
  if (std::isinf(temperature)) return 1.0;
  const double log_ratio = (log_num - log_den) / temperature;
  if (log_ratio >= 0.0) return 1.0;
  return std::exp(log_ratio);
}

std::uint64_t z_tuple(const LatentAssignment& latent, const HardClustering& clustering, NodeId u) {
  const auto L = static_cast<std::size_t>(latent.max_degree);
  return clustering.tuple_index(std::span<const int>(latent.z.data() + u * L, L));
}

}  // namespace

double latent_acceptance(const LabelledTree& tree, const LatentAssignment& current,
                         const LatentAssignment& proposed, const TfModelParams& params,
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
    return tempered_acceptance(num, den, temperature);
  }
  const auto& clustering = params.clustering;
  for (NodeId u = 0; u < tree.size(); ++u) {
    if (tree.is_leaf(u)) continue;
    const auto qn = static_cast<std::size_t>(proposed.q[u]);
    const auto qo = static_cast<std::size_t>(current.q[u]);
    const Simplex& core_new = params.core(z_tuple(proposed, clustering, u));
    const Simplex& core_old = params.core(z_tuple(current, clustering, u));
    num += std::log(core_new[qn]);
    den += std::log(core_old[qo]);
    if (rule == LatentAcceptance::kAsPrinted) {
      num += std::log(core_new[qo]);
      den += std::log(core_old[qn]);
    }
  }
  return tempered_acceptance(num, den, temperature);
}

double marginal_likelihood_k(const std::map<std::uint64_t, Counts>& tuple_counts, double alpha,
                             const Simplex& lambda0) {
  std::vector<double> prior(lambda0.size());
  for (std::size_t c = 0; c < lambda0.size(); ++c) {
    prior[c] = alpha * lambda0[c];
    if (!(prior[c] > 0.0)) throw DomainError("alpha * lambda0 must be strictly positive");
  }
  const double log_b_prior = log_multivariate_beta(prior);
  std::vector<double> post(prior.size());
  double total = 0.0;
  for (const auto& [tuple, counts] : tuple_counts) {
    bool occupied = false;
    for (std::size_t c = 0; c < prior.size(); ++c) {
      post[c] = prior[c] + static_cast<double>(counts[c]);
      occupied = occupied || counts[c] != 0;
    }
    if (occupied) total += log_multivariate_beta(post) - log_b_prior;
  }
  return total;
}

double marginal_likelihood_k(const SufficientStats& stats, const HardClustering& clustering,
                             double alpha, const Simplex& lambda0) {
  return marginal_likelihood_k(stats.transition_counts(clustering), alpha, lambda0);
}

namespace {

void increase_move(HardClustering& h, int position, Rng& rng) {
  std::vector<int> splittable;
  for (int i = 0; i < h.size(position); ++i)
    if (h.members(position, i).size() >= 2) splittable.push_back(i);
  const int cluster = splittable[sample_index(splittable.size(), rng)];
  const auto mem = h.members(position, cluster);
  std::vector<int> moving;
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    moving.clear();
    for (int e : mem)
      if (sample_bernoulli(0.5, rng)) moving.push_back(e);
    ok = !moving.empty() && moving.size() < mem.size();
  }
  if (!ok) moving = {mem[sample_index(mem.size(), rng)]};
  h.split(position, cluster, moving);
}

void decrease_move(HardClustering& h, int position, Rng& rng) {
  const auto k = static_cast<std::size_t>(h.size(position));
  const auto a = sample_index(k, rng);
  auto b = sample_index(k - 1, rng);
  if (b >= a) ++b;
  h.merge(position, static_cast<int>(a), static_cast<int>(b));
}

}  // namespace

HardClustering propose_size_move(const HardClustering& clustering, const HyperParams& hyper, Rng& rng) {
  HardClustering h = clustering;
  const int L = h.num_positions();
  const int max_k = h.num_ext_states();
  const int l = static_cast<int>(sample_index(static_cast<std::size_t>(L), rng));
  bool increase = sample_bernoulli(0.5, rng);
  if (h.size(l) == 1) increase = true;
  if (h.size(l) == max_k) increase = false;
  const std::vector<int> before = h.assignment(l);
  if (increase)
    increase_move(h, l, rng);
  else
    decrease_move(h, l, rng);

  if (h.active_positions() > hyper.l_max) {
    std::vector<int> candidates;
    for (int p = 0; p < L; ++p)
      if (p != l && h.size(p) > 1) candidates.push_back(p);
    const int other = candidates[sample_index(candidates.size(), rng)];
    decrease_move(h, other, rng);
    if (h.active_positions() > hyper.l_max) h.set_assignment(l, before);
  }
  if (h.active_positions() < hyper.l_min) {
    std::vector<int> candidates;
    for (int p = 0; p < L; ++p)
      if (h.size(p) == 1) candidates.push_back(p);
    increase_move(h, candidates[sample_index(candidates.size(), rng)], rng);
  }
  return h;
}

double size_acceptance(const HardClustering& old_clustering, const HardClustering& new_clustering,
                       const SufficientStats& stats, const HyperParams& hyper,
                       const Simplex& lambda0, double temperature) {
  if (old_clustering == new_clustering) return 1.0;
  double log_ratio = marginal_likelihood_k(stats, new_clustering, hyper.alpha, lambda0) -
                     marginal_likelihood_k(stats, old_clustering, hyper.alpha, lambda0);
  for (int k : new_clustering.sizes()) log_ratio += size_prior_log(k, hyper.phi);
  for (int k : old_clustering.sizes()) log_ratio -= size_prior_log(k, hyper.phi);
  return tempered_acceptance(log_ratio, 0.0, temperature);
}

ParameterDraw resample_parameters(const SufficientStats& stats, const HyperParams& hyper,
                                  const HardClustering& clustering, const Simplex& lambda0, Rng& rng) {
  ParameterDraw out;
  std::vector<double> conc;
  for (const auto& counts : stats.leaf_counts) {
    conc.assign(counts.size(), 0.0);
    for (std::size_t c = 0; c < counts.size(); ++c) conc[c] = hyper.gamma + static_cast<double>(counts[c]);
    out.pi.push_back(sample_dirichlet(conc, rng));
  }
  for (const auto& counts : stats.emission_counts) {
    conc.assign(counts.size(), 0.0);
    for (std::size_t d = 0; d < counts.size(); ++d) conc[d] = hyper.beta + static_cast<double>(counts[d]);
    out.emission.push_back(sample_dirichlet(conc, rng));
  }
  for (const auto& [tuple, counts] : stats.transition_counts(clustering)) {
    conc.assign(counts.size(), 0.0);
    for (std::size_t c = 0; c < counts.size(); ++c)
      conc[c] = hyper.alpha * lambda0[c] + static_cast<double>(counts[c]);
    out.core.emplace(tuple, sample_dirichlet(conc, rng));
  }
  return out;
}

std::int64_t table_count(std::int64_t n, double concentration, Rng& rng) {
  std::int64_t m = 0;
  for (std::int64_t p = 1; p <= n; ++p)
    if (sample_bernoulli(concentration / (static_cast<double>(p - 1) + concentration), rng)) ++m;
  return m;
}

Simplex resample_lambda0(const std::map<std::uint64_t, Counts>& tuple_counts, double alpha,
                         double alpha0, const Simplex& lambda0, Rng& rng) {
  const std::size_t C = lambda0.size();
  std::vector<double> m(C, 0.0);
  for (const auto& [tuple, counts] : tuple_counts)
    for (std::size_t c = 0; c < C; ++c)
      m[c] += static_cast<double>(table_count(counts[c], alpha * lambda0[c], rng));
  std::vector<double> conc(C);
  for (std::size_t c = 0; c < C; ++c) conc[c] = alpha0 / static_cast<double>(C) + m[c];
  Simplex out = sample_dirichlet(conc, rng);
  // floor at DBL_MIN
  for (double& v : out) v = std::max(v, std::numeric_limits<double>::min());
  return out;
}

std::string log_header() {
  return "iteration\ttemperature\tlog_likelihood\tlatent_acceptance\tsize_accepted\tk";
}

std::string format_log_row(const TrainingLogRow& row) {
  std::ostringstream out;
  out.precision(10);
  out << row.iteration << '\t' << row.temperature << '\t' << row.log_likelihood << '\t'
      << row.latent_acceptance_rate << '\t' << (row.size_accepted ? 1 : 0) << '\t';
  for (std::size_t l = 0; l < row.sizes.size(); ++l) out << (l ? "," : "") << row.sizes[l];
  return out.str();
}

void check_corpus_fits(const TreeCorpus& corpus, const HyperParams& hyper) {
  hyper.validate();
  if (corpus.trees.empty()) throw ConfigError("training corpus is empty");
  if (corpus.max_degree != hyper.max_degree)
    throw ConfigError("corpus L=" + std::to_string(corpus.max_degree) +
                      " differs from model L=" + std::to_string(hyper.max_degree));
  if (corpus.alphabet_size != hyper.alphabet_size)
    throw ConfigError("corpus M=" + std::to_string(corpus.alphabet_size) +
                      " differs from model M=" + std::to_string(hyper.alphabet_size));
}

namespace {

SufficientStats stats_from_latents(const TreeCorpus& corpus, const std::vector<LatentAssignment>& latents,
                                   const HyperParams& hyper) {
  SufficientStats stats(hyper.num_states, hyper.max_degree, hyper.alphabet_size);
  for (std::size_t t = 0; t < corpus.trees.size(); ++t) stats.add_tree(corpus.trees[t], latents[t].q);
  return stats;
}

}  // namespace

ChainState init_chain(const TreeCorpus& corpus, const HyperParams& hyper) {
  check_corpus_fits(corpus, hyper);
  ChainState chain;
  chain.rng.seed(hyper.seed);
  chain.params = init_params(hyper, chain.rng);
  chain.latents.reserve(corpus.trees.size());
  for (const auto& t : corpus.trees) chain.latents.push_back(propose_latents(t, chain.params, chain.rng));
  chain.stats = stats_from_latents(corpus, chain.latents, hyper);
  return chain;
}

TrainingLogRow gibbs_sweep(ChainState& chain, const TreeCorpus& corpus, const HyperParams& hyper) {
  const auto& trees = corpus.trees;
  const int m = chain.iteration;
  const double temp = temperature(m, AnnealingSchedule{hyper.t0, hyper.m0});
  auto& params = chain.params;

  // Step 1: latent states, accepted or rejected per tree.
  std::int64_t accepted = 0;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    LatentAssignment proposal = propose_latents(trees[t], params, chain.rng);
    const double a =
        latent_acceptance(trees[t], chain.latents[t], proposal, params, temp, hyper.acceptance);
    if (sample_uniform(chain.rng) < a) {
      chain.latents[t] = std::move(proposal);
      ++accepted;
    }
  }
  chain.latent_accepts += accepted;
  chain.latent_proposals += static_cast<std::int64_t>(trees.size());
  chain.stats = stats_from_latents(corpus, chain.latents, hyper);

  // Step 2: size vector and mode matrices.
  const HardClustering candidate = propose_size_move(params.clustering, hyper, chain.rng);
  const double a_size =
      size_acceptance(params.clustering, candidate, chain.stats, hyper, params.lambda0, temp);
  const bool size_accepted = sample_uniform(chain.rng) < a_size;
  ++chain.size_proposals;
  if (size_accepted) {
    ++chain.size_accepts;
    if (!(candidate == params.clustering)) {
      params.clustering = candidate;
      params.clear_core();
      for (std::size_t t = 0; t < trees.size(); ++t)
        assign_clusters(trees[t], params.clustering, chain.latents[t]);
    }
  }

  // Step 3: conjugate parameter draws, then the base measure.
  ParameterDraw draw =
      resample_parameters(chain.stats, hyper, params.clustering, params.lambda0, chain.rng);
  params.pi = std::move(draw.pi);
  params.emission = std::move(draw.emission);
  params.clear_core();
  for (auto& [tuple, row] : draw.core) params.set_core(tuple, std::move(row));
  params.lambda0 = resample_lambda0(chain.stats.transition_counts(params.clustering), hyper.alpha,
                                    hyper.alpha0, params.lambda0, chain.rng);
  chain.iteration = m + 1;

#ifndef NDEBUG
  assert(chain.stats == stats_from_latents(corpus, chain.latents, hyper));
#endif

  TrainingLogRow row;
  row.iteration = m;
  row.temperature = temp;
  row.latent_acceptance_rate =
      trees.empty() ? 0.0 : static_cast<double>(accepted) / static_cast<double>(trees.size());
  row.size_accepted = size_accepted;
  row.sizes = params.clustering.sizes();
  return row;
}

ChainState train(const TreeCorpus& corpus, const HyperParams& hyper, const TrainingLogger& logger) {
  ChainState chain = init_chain(corpus, hyper);
  for (int m = 0; m < hyper.iterations; ++m) {
    TrainingLogRow row = gibbs_sweep(chain, corpus, hyper);
    if (logger) {
      for (std::size_t t = 0; t < corpus.trees.size(); ++t)
        row.log_likelihood += complete_log_likelihood(corpus.trees[t], chain.latents[t], chain.params);
      logger(row);
    }
  }
  chain.params.materialise_core();
  return chain;
}

}  // namespace tfhtmm
