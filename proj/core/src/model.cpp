#include "tfhtmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tfhtmm/errors.hpp"

namespace tfhtmm {

std::string to_string(LatentAcceptance rule) {
  switch (rule) {
    case LatentAcceptance::kAsPrinted: return "as-printed";
    case LatentAcceptance::kCoreRatio: return "core-ratio";
    case LatentAcceptance::kEmission: return "emission";
  }
  return "unknown";
}

LatentAcceptance latent_acceptance_from_string(const std::string& name) {
  if (name == "as-printed") return LatentAcceptance::kAsPrinted;
  if (name == "core-ratio") return LatentAcceptance::kCoreRatio;
  if (name == "emission") return LatentAcceptance::kEmission;
  throw ConfigError("unknown latent acceptance rule '" + name + "'");
}

HyperParams HyperParams::defaults(int num_states, int max_degree, int alphabet_size, int l_max,
                                  int iterations) {
  HyperParams h;
  h.num_states = num_states;
  h.max_degree = max_degree;
  h.alphabet_size = alphabet_size;
  h.l_min = 1;
  h.l_max = std::min(l_max, max_degree);
  h.alpha = num_states;
  h.alpha0 = num_states;
  h.iterations = iterations;
  h.m0 = std::max(1, iterations / 10);
  return h;
}

void HyperParams::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("hyper-parameters: " + m); };
  if (num_states < 1) fail("C must be >= 1");
  if (max_degree < 1) fail("L must be >= 1");
  if (alphabet_size < 1) fail("M must be >= 1");
  if (!(phi > 0.0)) fail("phi must be > 0");
  if (l_min < 1 || l_min > l_max || l_max > max_degree) fail("need 1 <= L_min <= L_max <= L");
  if (!(alpha > 0.0) || !(alpha0 > 0.0) || !(gamma > 0.0) || !(beta > 0.0))
    fail("Dirichlet concentrations must be > 0");
  if (!(t0 >= 1.0)) fail("T0 must be >= 1");
  if (m0 < 1) fail("m0 must be >= 1");
  if (iterations < 0) fail("iterations must be >= 0");
  const double log_tuples = l_max * std::log(static_cast<double>(num_ext_states()));
  if (log_tuples > 62.0 * std::log(2.0)) fail("(C+1)^L_max core tuples exceed 64-bit indexing");
}

// ---------------------------------------------------------------------------
// HardClustering

HardClustering::HardClustering(int num_states, int max_degree)
    : num_ext_(num_states + 1),
      assign_(static_cast<std::size_t>(max_degree),
              std::vector<int>(static_cast<std::size_t>(num_states + 1), 0)),
      sizes_(static_cast<std::size_t>(max_degree), 1) {
  refresh_strides();
}

std::vector<int> HardClustering::members(int position, int cluster) const {
  std::vector<int> out;
  const auto& row = assignment(position);
  for (int e = 0; e < num_ext_; ++e)
    if (row[static_cast<std::size_t>(e)] == cluster) out.push_back(e);
  return out;
}

int HardClustering::active_positions() const {
  return static_cast<int>(std::count_if(sizes_.begin(), sizes_.end(), [](int k) { return k != 1; }));
}

bool HardClustering::within_window(int l_min, int l_max) const {
  const int a = active_positions();
  return a >= l_min && a <= l_max;
}

void HardClustering::set_assignment(int position, std::vector<int> assignment) {
  if (assignment.size() != static_cast<std::size_t>(num_ext_))
    throw DomainError("assignment must cover every extended state");
  for (int c : assignment)
    if (c < 0) throw DomainError("negative cluster index");
  assign_.at(static_cast<std::size_t>(position)) = std::move(assignment);
  canonicalise(position);
  refresh_strides();
}

void HardClustering::split(int position, int cluster, std::span<const int> moving) {
  auto& row = assign_.at(static_cast<std::size_t>(position));
  const int fresh = sizes_[static_cast<std::size_t>(position)];
  for (int e : moving) {
    if (row.at(static_cast<std::size_t>(e)) != cluster)
      throw DomainError("split moves a state outside the chosen cluster");
    row[static_cast<std::size_t>(e)] = fresh;
  }
  canonicalise(position);
  refresh_strides();
}

void HardClustering::merge(int position, int a, int b) {
  if (a == b) throw DomainError("merge needs two distinct clusters");
  auto& row = assign_.at(static_cast<std::size_t>(position));
  for (int& c : row)
    if (c == b) c = a;
  canonicalise(position);
  refresh_strides();
}

void HardClustering::canonicalise(int position) {
  auto& row = assign_[static_cast<std::size_t>(position)];
  std::map<int, int> relabel;
  for (int& c : row) {
    auto [it, inserted] = relabel.emplace(c, static_cast<int>(relabel.size()));
    c = it->second;
  }
  sizes_[static_cast<std::size_t>(position)] = static_cast<int>(relabel.size());
}

void HardClustering::refresh_strides() {
  strides_.assign(sizes_.size(), 0);
  std::uint64_t stride = 1;
  for (std::size_t l = 0; l < sizes_.size(); ++l) {
    strides_[l] = stride;
    const auto k = static_cast<std::uint64_t>(sizes_[l]);
    if (k > 1 && stride > std::numeric_limits<std::uint64_t>::max() / k) {
      stride = std::numeric_limits<std::uint64_t>::max();
    } else {
      stride *= k;
    }
  }
}

void HardClustering::check_invariants(int l_min, int l_max) const {
  for (std::size_t l = 0; l < assign_.size(); ++l) {
    const int k = sizes_[l];
    if (k < 1 || k > num_ext_) throw DomainError("cluster count outside [1, C+1]");
    std::vector<int> seen(static_cast<std::size_t>(k), 0);
    for (int c : assign_[l]) {
      if (c < 0 || c >= k) throw DomainError("state mapped outside [0, k)");
      ++seen[static_cast<std::size_t>(c)];
    }
    for (int s : seen)
      if (s == 0) throw DomainError("empty cluster at position " + std::to_string(l));
  }
  if (!within_window(l_min, l_max))
    throw DomainError("active position count " + std::to_string(active_positions()) +
                      " outside [" + std::to_string(l_min) + ", " + std::to_string(l_max) + "]");
}

std::uint64_t HardClustering::tuple_count() const {
  std::uint64_t n = 1;
  for (int k : sizes_) {
    const auto kk = static_cast<std::uint64_t>(k);
    if (kk > 1 && n > std::numeric_limits<std::uint64_t>::max() / kk)
      throw DomainError("cluster tuple count overflows 64 bits");
    n *= kk;
  }
  return n;
}

std::uint64_t HardClustering::tuple_index(std::span<const int> clusters) const {
  std::uint64_t idx = 0;
  for (std::size_t l = 0; l < sizes_.size(); ++l)
    if (sizes_[l] > 1) idx += strides_[l] * static_cast<std::uint64_t>(clusters[l]);
  return idx;
}

std::vector<int> HardClustering::tuple_of(std::uint64_t index) const {
  std::vector<int> out(sizes_.size(), 0);
  for (std::size_t l = 0; l < sizes_.size(); ++l) {
    const auto k = static_cast<std::uint64_t>(sizes_[l]);
    out[l] = static_cast<int>(index % k);
    index /= k;
  }
  return out;
}

std::uint64_t HardClustering::tuple_index_for_children(std::span<const int> ext_states) const {
  std::uint64_t idx = 0;
  for (std::size_t l = 0; l < sizes_.size(); ++l)
    if (sizes_[l] > 1)
      idx += strides_[l] *
             static_cast<std::uint64_t>(assign_[l][static_cast<std::size_t>(ext_states[l])]);
  return idx;
}

// ---------------------------------------------------------------------------
// TfModelParams

TfModelParams::TfModelParams(int num_states, int max_degree, int alphabet_size, double alpha)
    : pi(static_cast<std::size_t>(max_degree)),
      emission(static_cast<std::size_t>(num_states)),
      lambda0(static_cast<std::size_t>(num_states), 1.0 / num_states),
      clustering(num_states, max_degree),
      num_states_(num_states),
      max_degree_(max_degree),
      alphabet_size_(alphabet_size),
      alpha_(alpha) {}

const Simplex& TfModelParams::core(std::uint64_t tuple) const {
  auto it = core_.find(tuple);
  if (it != core_.end()) return it->second;
  std::vector<double> conc(lambda0.size());
  for (std::size_t c = 0; c < conc.size(); ++c) conc[c] = alpha_ * lambda0[c];
  return core_.emplace(tuple, sample_dirichlet(conc, core_rng_)).first->second;
}

void TfModelParams::materialise_core() const {
  const std::uint64_t n = clustering.tuple_count();
  for (std::uint64_t t = 0; t < n; ++t) core(t);
}

bool TfModelParams::rows_valid(double tol) const {
  auto ok = [tol](const std::vector<Simplex>& rows) {
    return std::all_of(rows.begin(), rows.end(), [tol](const Simplex& r) { return is_simplex(r, tol); });
  };
  if (!ok(pi) || !ok(emission) || !is_simplex(lambda0, tol)) return false;
  for (const auto& [t, row] : core_)
    if (!is_simplex(row, tol)) return false;
  return true;
}

bool operator==(const TfModelParams& a, const TfModelParams& b) {
  return a.num_states_ == b.num_states_ && a.max_degree_ == b.max_degree_ &&
         a.alphabet_size_ == b.alphabet_size_ && a.alpha_ == b.alpha_ && a.pi == b.pi &&
         a.emission == b.emission && a.lambda0 == b.lambda0 && a.clustering == b.clustering &&
         a.core_ == b.core_ && a.core_rng_ == b.core_rng_;
}

bool SpModelParams::rows_valid(double tol) const {
  auto ok = [tol](const std::vector<Simplex>& rows) {
    return std::all_of(rows.begin(), rows.end(), [tol](const Simplex& r) { return is_simplex(r, tol); });
  };
  if (!ok(pi) || !ok(emission) || !is_simplex(switch_weights, tol)) return false;
  return std::all_of(elementary.begin(), elementary.end(), ok);
}

Simplex reconstruct_transition(const TfModelParams& params, std::span<const int> child_ext_states) {
  if (child_ext_states.size() != static_cast<std::size_t>(params.max_degree()))
    throw DomainError("need one extended state per child position");
  for (int e : child_ext_states)
    if (e < 0 || e > params.num_states()) throw DomainError("extended child state out of range");
  return params.core(params.clustering.tuple_index_for_children(child_ext_states));
}

StorageCost storage_cost(int num_states, int max_degree, std::span<const int> sizes) {
  if (num_states < 1 || max_degree < 1 || sizes.size() != static_cast<std::size_t>(max_degree))
    throw DomainError("storage_cost: invalid sizes");
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  const auto c = static_cast<std::uint64_t>(num_states);
  StorageCost out;
  std::uint64_t explicit_entries = 1;
  for (int i = 0; i <= max_degree; ++i) {
    if (explicit_entries > kMax / c) {
      out.saturated = true;
      explicit_entries = kMax;
      break;
    }
    explicit_entries *= c;
  }
  out.explicit_entries = explicit_entries;
  std::uint64_t core = c;
  std::uint64_t modes = 0;
  for (int k : sizes) {
    if (k < 1) throw DomainError("storage_cost: k_l must be >= 1");
    const auto kk = static_cast<std::uint64_t>(k);
    if (core > kMax / kk) throw DomainError("storage_cost: factored size overflows");
    core *= kk;
    modes += (c + 1) * kk;
  }
  out.factored_entries = core + modes;
  return out;
}

std::vector<int> random_binary_split(int num_ext_states, Rng& rng) {
  std::vector<int> assign(static_cast<std::size_t>(num_ext_states));
  for (;;) {
    int ones = 0;
    for (auto& a : assign) {
      a = sample_bernoulli(0.5, rng) ? 1 : 0;
      ones += a;
    }
    if (ones > 0 && ones < num_ext_states) return assign;
  }
}

TfModelParams init_params(const HyperParams& hyper, Rng& rng) {
  hyper.validate();
  const int C = hyper.num_states;
  const int L = hyper.max_degree;
  TfModelParams p(C, L, hyper.alphabet_size, hyper.alpha);
  for (auto& row : p.pi) row = sample_dirichlet(static_cast<std::size_t>(C), hyper.gamma, rng);
  for (auto& row : p.emission)
    row = sample_dirichlet(static_cast<std::size_t>(hyper.alphabet_size), hyper.beta, rng);
  p.lambda0 = sample_dirichlet(static_cast<std::size_t>(C), hyper.alpha0 / C, rng);

  std::vector<int> positions(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) positions[static_cast<std::size_t>(l)] = l;
  for (int i = 0; i < hyper.l_min; ++i) {
    const std::size_t pick = i + sample_index(positions.size() - i, rng);
    std::swap(positions[static_cast<std::size_t>(i)], positions[pick]);
    p.clustering.set_assignment(positions[static_cast<std::size_t>(i)],
                                random_binary_split(hyper.num_ext_states(), rng));
  }
  p.seed_core_rng(rng());
  return p;
}

SpModelParams init_sp_params(const HyperParams& hyper, Rng& rng) {
  hyper.validate();
  const int C = hyper.num_states;
  const int L = hyper.max_degree;
  SpModelParams p;
  p.num_states = C;
  p.max_degree = L;
  p.alphabet_size = hyper.alphabet_size;
  p.pi.resize(static_cast<std::size_t>(L));
  for (auto& row : p.pi) row = sample_dirichlet(static_cast<std::size_t>(C), hyper.gamma, rng);
  p.emission.resize(static_cast<std::size_t>(C));
  for (auto& row : p.emission)
    row = sample_dirichlet(static_cast<std::size_t>(hyper.alphabet_size), hyper.beta, rng);
  p.switch_weights = sample_dirichlet(static_cast<std::size_t>(L), 1.0, rng);
  p.elementary.assign(static_cast<std::size_t>(L),
                      std::vector<Simplex>(static_cast<std::size_t>(C + 1)));
  for (auto& mat : p.elementary)
    for (auto& row : mat) row = sample_dirichlet(static_cast<std::size_t>(C), hyper.alpha / C, rng);
  return p;
}

}  // namespace tfhtmm
