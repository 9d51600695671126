#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "tfhtmm/checkpoint.hpp"
#include "tfhtmm/gibbs.hpp"
#include "tfhtmm/trees.hpp"

namespace tfhtmm {

/// log P(tree) under either model kind.
double model_log_likelihood(const AnyModel& model, const LabelledTree& tree);

/// Per-node label distributions given only the tree shape.
std::vector<Simplex> model_label_marginals(const AnyModel& model, const LabelledTree& structure);

/// Trains one model of the requested kind from hyper.seed.
AnyModel train_model(const TreeCorpus& corpus, const HyperParams& hyper, ModelKind kind,
                     const TrainingLogger& logger = {});

/// One generative model per class.
struct ClassifierBundle {
  ModelKind kind = ModelKind::kTf;
  HyperParams hyper;
  std::vector<AnyModel> models;

  int num_classes() const { return static_cast<int>(models.size()); }
};

/// Seed for class `cls` derived from the run seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Trains class partitions independently, at most `jobs` at a time.
/// `loggers`, when non-empty, holds one logger per class.
ClassifierBundle train_classifier(const TreeCorpus& corpus, const HyperParams& hyper, ModelKind kind,
                                  int jobs = 1, const std::vector<TrainingLogger>& loggers = {});

struct Classification {
  int predicted = 0;
  std::vector<double> log_likelihoods;
  std::vector<double> distribution;  // uniform class prior
};

/// argmax of the per-class log-likelihoods (ties to the lowest index) and the
/// softmax class distribution.
Classification classify_from_log_likelihoods(const std::vector<double>& log_likelihoods);
Classification classify(const LabelledTree& tree, const ClassifierBundle& bundle);

/// Accuracy (percent), entropy (natural-log Shannon entropy x 100), and
/// per-class breakdowns. For labelling, "class" means the true node label.
struct EvalReport {
  std::string task;  // "classify" or "label"
  int num_classes = 0;
  std::int64_t total = 0;
  double accuracy = 0.0;
  double entropy = 0.0;
  std::vector<std::int64_t> per_class_count;
  std::vector<double> per_class_accuracy;
  std::vector<double> per_class_entropy;
  std::vector<std::vector<std::int64_t>> confusion;  // [truth][predicted]
  std::map<std::string, std::string> metadata;
};

/// Builds a report from raw predictions; each distribution row gives the
/// predicted class probabilities for that item.
EvalReport report_from_predictions(const std::string& task, int num_classes,
                                   const std::vector<int>& truth, const std::vector<int>& predicted,
                                   const std::vector<std::vector<double>>& distributions);

EvalReport eval_classification(const TreeCorpus& test, const ClassifierBundle& bundle);
EvalReport eval_labelling(const TreeCorpus& test, const AnyModel& model);

/// Fixed-width human table.
std::string format_report_table(const EvalReport& report);
/// Structured JSON text.
std::string report_to_json(const EvalReport& report);
/// Confusion matrix with a header row of predicted classes.
std::string confusion_csv(const EvalReport& report);

/// Mean and sample standard deviation of each metric over several runs.
struct AggregateReport {
  std::string task;
  int runs = 0;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double entropy_mean = 0.0, entropy_std = 0.0;
  std::vector<double> per_class_accuracy_mean, per_class_accuracy_std;
  std::vector<double> per_class_entropy_mean, per_class_entropy_std;
};

AggregateReport aggregate_reports(const std::vector<EvalReport>& reports);
/// mean (std) columns; the std column is omitted for a single run.
std::string format_aggregate_table(const AggregateReport& agg);
std::string aggregate_to_json(const AggregateReport& agg);

/// Synthetic ternary-tree generator. Type 0 is left-asymmetric, 1 symmetric,
/// 2 right-asymmetric; the type is stored as the tree's class label.
struct GeneratorConfig {
  int count_per_type = 260;
  int test_per_type = 60;
  std::array<std::array<double, 3>, 3> occupation{{{0.8, 0.5, 0.2},
                                                   {0.5, 0.5, 0.5},
                                                   {0.2, 0.5, 0.8}}};
  int depth_cap = 6;
  int min_nodes = 3;
  /// Symmetric trees need |n_left - n_right| <= this.
  int symmetric_tolerance = 1;

  void validate() const;
  std::string to_json() const;
};

/// Node counts at the leftmost and rightmost child positions.
std::pair<int, int> outer_position_counts(const LabelledTree& tree);

/// Type test used by the rejection step.
bool satisfies_type(const LabelledTree& tree, int type, const GeneratorConfig& config);

/// L = 3, M = 4 corpus; each label is the node's occupied-slot count.
TreeCorpus generate_synthetic(const GeneratorConfig& config, Rng& rng);

struct CorpusSplit {
  TreeCorpus train;
  TreeCorpus test;
};

/// Per class, the first (count - test_per_class) trees go to train.
CorpusSplit split_stratified(const TreeCorpus& corpus, int test_per_class);

/// Share of the most common label across all nodes, in percent.
double majority_label_accuracy(const TreeCorpus& train, const TreeCorpus& test);

}  // namespace tfhtmm
