#include "tfhtmm/tasks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "tfhtmm/errors.hpp"
#include "tfhtmm/gibbs.hpp"
#include "tfhtmm/inference.hpp"
#include "tfhtmm/sp_baseline.hpp"

namespace tfhtmm {

double model_log_likelihood(const AnyModel& model, const LabelledTree& tree) {
  if (const auto* tf = std::get_if<TfModelParams>(&model)) return marginal_log_likelihood(tree, *tf);
  return sp_marginal_log_likelihood(tree, std::get<SpModelParams>(model));
}

std::vector<Simplex> model_label_marginals(const AnyModel& model, const LabelledTree& structure) {
  if (const auto* tf = std::get_if<TfModelParams>(&model)) return node_label_marginals(structure, *tf);
  return sp_node_label_marginals(structure, std::get<SpModelParams>(model));
}

AnyModel train_model(const TreeCorpus& corpus, const HyperParams& hyper, ModelKind kind,
                     const TrainingLogger& logger) {
  if (kind == ModelKind::kTf) return train(corpus, hyper, logger).params;
  return sp_train(corpus, hyper, logger).params;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finaliser over a stream-offset seed
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ClassifierBundle train_classifier(const TreeCorpus& corpus, const HyperParams& hyper, ModelKind kind,
                                  int jobs, const std::vector<TrainingLogger>& loggers) {
  if (!corpus.class_labels) throw ConfigError("classification corpus has no class labels");
  const int K = corpus.num_classes();
  std::vector<TreeCorpus> parts;
  for (int c = 0; c < K; ++c) {
    parts.push_back(corpus.select_class(c));
    if (parts.back().trees.empty())
      throw ConfigError("class " + std::to_string(c) + " has no training trees");
  }
  ClassifierBundle bundle;
  bundle.kind = kind;
  bundle.hyper = hyper;
  bundle.models.resize(static_cast<std::size_t>(K));

  auto run = [&](int c) {
    HyperParams h = hyper;
    h.seed = derive_seed(hyper.seed, static_cast<std::uint64_t>(c));
    const TrainingLogger logger = loggers.empty() ? TrainingLogger{} : loggers.at(static_cast<std::size_t>(c));
    bundle.models[static_cast<std::size_t>(c)] = train_model(parts[static_cast<std::size_t>(c)], h, kind, logger);
  };

  const int workers = std::max(1, std::min(jobs, K));
  if (workers == 1) {
    for (int c = 0; c < K; ++c) run(c);
    return bundle;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int c = next++; c < K; c = next++) {
        try {
          run(c);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return bundle;
}

Classification classify_from_log_likelihoods(const std::vector<double>& log_likelihoods) {
  Classification out;
  out.log_likelihoods = log_likelihoods;
  out.predicted = static_cast<int>(argmax(log_likelihoods));
  const double hi = log_likelihoods[static_cast<std::size_t>(out.predicted)];
  out.distribution.assign(log_likelihoods.size(), 0.0);
  if (hi == kLogZero) {
    std::fill(out.distribution.begin(), out.distribution.end(), 1.0 / static_cast<double>(log_likelihoods.size()));
    return out;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < log_likelihoods.size(); ++c) {
    out.distribution[c] = std::exp(log_likelihoods[c] - hi);
    total += out.distribution[c];
  }
  for (auto& v : out.distribution) v /= total;
  return out;
}

Classification classify(const LabelledTree& tree, const ClassifierBundle& bundle) {
  std::vector<double> ll;
  ll.reserve(bundle.models.size());
  for (const auto& m : bundle.models) ll.push_back(model_log_likelihood(m, tree));
  return classify_from_log_likelihoods(ll);
}

EvalReport report_from_predictions(const std::string& task, int num_classes,
                                   const std::vector<int>& truth, const std::vector<int>& predicted,
                                   const std::vector<std::vector<double>>& distributions) {
  if (truth.size() != predicted.size() || truth.size() != distributions.size())
    throw DomainError("prediction and truth lengths differ");
  const auto K = static_cast<std::size_t>(num_classes);
  EvalReport r;
  r.task = task;
  r.num_classes = num_classes;
  r.total = static_cast<std::int64_t>(truth.size());
  r.per_class_count.assign(K, 0);
  r.per_class_accuracy.assign(K, 0.0);
  r.per_class_entropy.assign(K, 0.0);
  r.confusion.assign(K, std::vector<std::int64_t>(K, 0));
  std::int64_t correct = 0;
  double entropy_sum = 0.0;
  std::vector<std::int64_t> class_correct(K, 0);
  std::vector<double> class_entropy(K, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (t >= K || p >= K) throw DomainError("class index outside [0, K)");
    ++r.confusion[t][p];
    ++r.per_class_count[t];
    const double h = entropy(distributions[i]) * 100.0;
    entropy_sum += h;
    class_entropy[t] += h;
    if (t == p) {
      ++correct;
      ++class_correct[t];
    }
  }
  if (r.total > 0) {
    r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(r.total);
    r.entropy = entropy_sum / static_cast<double>(r.total);
  }
  for (std::size_t c = 0; c < K; ++c) {
    if (r.per_class_count[c] == 0) continue;
    const auto n = static_cast<double>(r.per_class_count[c]);
    r.per_class_accuracy[c] = 100.0 * static_cast<double>(class_correct[c]) / n;
    r.per_class_entropy[c] = class_entropy[c] / n;
  }
  return r;
}

EvalReport eval_classification(const TreeCorpus& test, const ClassifierBundle& bundle) {
  if (!test.class_labels) throw ConfigError("test corpus has no class labels");
  std::vector<int> truth = *test.class_labels;
  std::vector<int> predicted;
  std::vector<std::vector<double>> dists;
  for (const auto& tree : test.trees) {
    auto c = classify(tree, bundle);
    predicted.push_back(c.predicted);
    dists.push_back(std::move(c.distribution));
  }
  EvalReport r = report_from_predictions("classify", bundle.num_classes(), truth, predicted, dists);
  r.metadata["model"] = to_string(bundle.kind);
  r.metadata["seed"] = std::to_string(bundle.hyper.seed);
  r.metadata["hyper"] = hyper_to_json_string(bundle.hyper);
  return r;
}

EvalReport eval_labelling(const TreeCorpus& test, const AnyModel& model) {
  std::vector<int> truth, predicted;
  std::vector<std::vector<double>> dists;
  for (const auto& tree : test.trees) {
    auto marg = model_label_marginals(model, tree);
    for (NodeId u = 0; u < tree.size(); ++u) {
      truth.push_back(tree.label(u));
      predicted.push_back(static_cast<int>(argmax(marg[u])));
      dists.push_back(std::move(marg[u]));
    }
  }
  EvalReport r = report_from_predictions("label", test.alphabet_size, truth, predicted, dists);
  r.metadata["model"] = to_string(kind_of(model));
  return r;
}

namespace {

std::string fixed(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

}  // namespace

std::string format_report_table(const EvalReport& r) {
  std::ostringstream out;
  const std::string unit = r.task == "label" ? "label" : "class";
  out << pad(unit, 8) << pad("count", 10) << pad("accuracy", 12) << pad("entropy", 12) << '\n';
  for (int c = 0; c < r.num_classes; ++c) {
    const auto i = static_cast<std::size_t>(c);
    out << pad(std::to_string(c), 8) << pad(std::to_string(r.per_class_count[i]), 10)
        << pad(fixed(r.per_class_accuracy[i]), 12) << pad(fixed(r.per_class_entropy[i]), 12) << '\n';
  }
  out << pad("all", 8) << pad(std::to_string(r.total), 10) << pad(fixed(r.accuracy), 12)
      << pad(fixed(r.entropy), 12) << '\n';
  return out.str();
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::json j{{"task", r.task},
                   {"num_classes", r.num_classes},
                   {"total", r.total},
                   {"accuracy", r.accuracy},
                   {"entropy", r.entropy},
                   {"per_class_count", r.per_class_count},
                   {"per_class_accuracy", r.per_class_accuracy},
                   {"per_class_entropy", r.per_class_entropy},
                   {"confusion", r.confusion},
                   {"metadata", r.metadata}};
  return j.dump(1) + "\n";
}

std::string confusion_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "truth\\predicted";
  for (int c = 0; c < r.num_classes; ++c) out << ',' << c;
  out << '\n';
  for (int t = 0; t < r.num_classes; ++t) {
    out << t;
    for (auto v : r.confusion[static_cast<std::size_t>(t)]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace

AggregateReport aggregate_reports(const std::vector<EvalReport>& reports) {
  AggregateReport agg;
  if (reports.empty()) return agg;
  agg.task = reports.front().task;
  agg.runs = static_cast<int>(reports.size());
  std::vector<double> acc, ent;
  for (const auto& r : reports) {
    acc.push_back(r.accuracy);
    ent.push_back(r.entropy);
  }
  std::tie(agg.accuracy_mean, agg.accuracy_std) = mean_std(acc);
  std::tie(agg.entropy_mean, agg.entropy_std) = mean_std(ent);
  const auto K = static_cast<std::size_t>(reports.front().num_classes);
  for (std::size_t c = 0; c < K; ++c) {
    std::vector<double> a, e;
    for (const auto& r : reports) {
      a.push_back(r.per_class_accuracy.at(c));
      e.push_back(r.per_class_entropy.at(c));
    }
    auto [am, as] = mean_std(a);
    auto [em, es] = mean_std(e);
    agg.per_class_accuracy_mean.push_back(am);
    agg.per_class_accuracy_std.push_back(as);
    agg.per_class_entropy_mean.push_back(em);
    agg.per_class_entropy_std.push_back(es);
  }
  return agg;
}

std::string format_aggregate_table(const AggregateReport& agg) {
  const bool with_std = agg.runs > 1;
  auto cell = [with_std](double m, double s) {
    return with_std ? fixed(m) + " (" + fixed(s) + ")" : fixed(m);
  };
  std::ostringstream out;
  const std::string unit = agg.task == "label" ? "label" : "class";
  const std::size_t w = with_std ? 20 : 12;
  out << pad(unit, 8) << pad("accuracy", w) << pad("entropy", w) << '\n';
  for (std::size_t c = 0; c < agg.per_class_accuracy_mean.size(); ++c)
    out << pad(std::to_string(c), 8)
        << pad(cell(agg.per_class_accuracy_mean[c], agg.per_class_accuracy_std[c]), w)
        << pad(cell(agg.per_class_entropy_mean[c], agg.per_class_entropy_std[c]), w) << '\n';
  out << pad("all", 8) << pad(cell(agg.accuracy_mean, agg.accuracy_std), w)
      << pad(cell(agg.entropy_mean, agg.entropy_std), w) << '\n';
  out << "runs: " << agg.runs << '\n';
  return out.str();
}

std::string aggregate_to_json(const AggregateReport& agg) {
  nlohmann::json j{{"task", agg.task},
                   {"runs", agg.runs},
                   {"accuracy_mean", agg.accuracy_mean},
                   {"entropy_mean", agg.entropy_mean},
                   {"per_class_accuracy_mean", agg.per_class_accuracy_mean},
                   {"per_class_entropy_mean", agg.per_class_entropy_mean}};
  if (agg.runs > 1) {
    j["accuracy_std"] = agg.accuracy_std;
    j["entropy_std"] = agg.entropy_std;
    j["per_class_accuracy_std"] = agg.per_class_accuracy_std;
    j["per_class_entropy_std"] = agg.per_class_entropy_std;
  }
  return j.dump(1) + "\n";
}

void GeneratorConfig::validate() const {
  if (count_per_type < 1) throw ConfigError("count per type must be >= 1");
  if (test_per_type < 0 || test_per_type >= count_per_type)
    throw ConfigError("test per type must lie in [0, count per type)");
  if (depth_cap < 1) throw ConfigError("depth cap must be >= 1");
  if (min_nodes < 1) throw ConfigError("minimum node count must be >= 1");
  for (const auto& row : occupation)
    for (double p : row)
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("occupation probabilities must lie in [0, 1]");
}

std::string GeneratorConfig::to_json() const {
  nlohmann::json j{{"count_per_type", count_per_type}, {"test_per_type", test_per_type},
                   {"occupation", occupation},         {"depth_cap", depth_cap},
                   {"min_nodes", min_nodes},           {"symmetric_tolerance", symmetric_tolerance}};
  return j.dump(1) + "\n";
}

std::pair<int, int> outer_position_counts(const LabelledTree& tree) {
  int left = 0, right = 0;
  const int last = tree.max_degree() - 1;
  for (NodeId u = 0; u < tree.size(); ++u) {
    const int pos = tree.node(u).position;
    if (pos == 0) ++left;
    if (pos == last) ++right;
  }
  return {left, right};
}

bool satisfies_type(const LabelledTree& tree, int type, const GeneratorConfig& config) {
  const auto [left, right] = outer_position_counts(tree);
  switch (type) {
    case 0: return left > right;
    case 2: return right > left;
    default: return std::abs(left - right) <= config.symmetric_tolerance;
  }
}

namespace {

LabelledTree grow_tree(const std::array<double, 3>& p, int depth_cap, Rng& rng) {
  constexpr int L = 3;
  std::vector<Node> nodes(1);
  nodes[0].children.assign(L, std::nullopt);
  std::vector<std::pair<NodeId, int>> frontier{{0, 0}};
  while (!frontier.empty()) {
    const auto [id, depth] = frontier.back();
    frontier.pop_back();
    if (depth >= depth_cap) continue;
    for (int l = 0; l < L; ++l) {
      if (!sample_bernoulli(p[static_cast<std::size_t>(l)], rng)) continue;
      const NodeId child = nodes.size();
      nodes.emplace_back();
      nodes[child].children.assign(L, std::nullopt);
      nodes[child].parent = id;
      nodes[child].position = l;
      nodes[id].children[static_cast<std::size_t>(l)] = child;
      frontier.emplace_back(child, depth + 1);
    }
  }
  for (auto& nd : nodes)
    nd.label = static_cast<int>(std::count_if(nd.children.begin(), nd.children.end(),
                                              [](const auto& c) { return c.has_value(); }));
  return LabelledTree(std::move(nodes), 0, L, 4);
}

}  // namespace

TreeCorpus generate_synthetic(const GeneratorConfig& config, Rng& rng) {
  config.validate();
  TreeCorpus corpus;
  corpus.max_degree = 3;
  corpus.alphabet_size = 4;
  corpus.class_count = 3;
  corpus.class_labels.emplace();
  for (int type = 0; type < 3; ++type) {
    for (int n = 0; n < config.count_per_type; ++n) {
      for (;;) {
        LabelledTree t = grow_tree(config.occupation[static_cast<std::size_t>(type)], config.depth_cap, rng);
        if (static_cast<int>(t.size()) < config.min_nodes || !satisfies_type(t, type, config)) continue;
        corpus.trees.push_back(std::move(t));
        corpus.class_labels->push_back(type);
        break;
      }
    }
  }
  return corpus;
}

CorpusSplit split_stratified(const TreeCorpus& corpus, int test_per_class) {
  if (!corpus.class_labels) throw ConfigError("stratified split needs class labels");
  CorpusSplit out;
  for (TreeCorpus* part : {&out.train, &out.test}) {
    part->max_degree = corpus.max_degree;
    part->alphabet_size = corpus.alphabet_size;
    part->class_count = corpus.class_count;
    part->symbols = corpus.symbols;
    part->class_labels.emplace();
  }
  const int K = corpus.num_classes();
  std::vector<int> total(static_cast<std::size_t>(K), 0), seen(static_cast<std::size_t>(K), 0);
  for (int c : *corpus.class_labels) ++total[static_cast<std::size_t>(c)];
  for (std::size_t i = 0; i < corpus.trees.size(); ++i) {
    const auto c = static_cast<std::size_t>((*corpus.class_labels)[i]);
    TreeCorpus& part = seen[c]++ < total[c] - test_per_class ? out.train : out.test;
    part.trees.push_back(corpus.trees[i]);
    part.class_labels->push_back(static_cast<int>(c));
  }
  return out;
}

double majority_label_accuracy(const TreeCorpus& train, const TreeCorpus& test) {
  std::vector<std::int64_t> freq(static_cast<std::size_t>(train.alphabet_size), 0);
  for (const auto& t : train.trees)
    for (NodeId u = 0; u < t.size(); ++u) ++freq[static_cast<std::size_t>(t.label(u))];
  const auto majority = static_cast<int>(std::max_element(freq.begin(), freq.end()) - freq.begin());
  std::int64_t hits = 0, total = 0;
  for (const auto& t : test.trees)
    for (NodeId u = 0; u < t.size(); ++u) {
      ++total;
      if (t.label(u) == majority) ++hits;
    }
  return total ? 100.0 * static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

}  // namespace tfhtmm
