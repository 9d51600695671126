#include <doctest.h>

#include <cmath>
#include <set>

#include "test_support.hpp"
#include "tfhtmm/errors.hpp"
#include "tfhtmm/tasks.hpp"

using namespace tfhtmm;

namespace {

TfModelParams single_state_model(int L, Simplex emission) {
  TfModelParams p(1, L, static_cast<int>(emission.size()), 1.0);
  for (auto& r : p.pi) r = {1.0};
  p.emission = {std::move(emission)};
  p.lambda0 = {1.0};
  p.materialise_core();
  return p;
}

}  // namespace

TEST_CASE("classification ties and extremes") {
  const auto tie = classify_from_log_likelihoods({-5.0, -5.0, -5.0});
  CHECK(tie.predicted == 0);
  for (double v : tie.distribution) CHECK(v == doctest::Approx(1.0 / 3.0));
  CHECK(entropy(tie.distribution) * 100.0 == doctest::Approx(std::log(3.0) * 100.0));

  const auto dom = classify_from_log_likelihoods({-200.0, -100.0, -200.0});
  CHECK(dom.predicted == 1);
  CHECK(entropy(dom.distribution) < 1e-30);
}

TEST_CASE("classification is invariant under a common shift") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> ll(5), shifted(5);
    const double shift = (sample_uniform(rng) - 0.5) * 1e4;
    for (int k = 0; k < 5; ++k) {
      ll[k] = -50.0 * sample_uniform(rng);
      shifted[k] = ll[k] + shift;
    }
    const auto a = classify_from_log_likelihoods(ll);
    const auto b = classify_from_log_likelihoods(shifted);
    CHECK(a.predicted == b.predicted);
    for (int k = 0; k < 5; ++k) CHECK(a.distribution[k] == doctest::Approx(b.distribution[k]).epsilon(1e-9));
  }
}

TEST_CASE("two single-leaf models give the Bayes posterior") {
  ClassifierBundle b;
  b.models = {single_state_model(1, {0.7, 0.3}), single_state_model(1, {0.4, 0.6})};
  const auto c0 = classify(testing::parse_tree("(0)", 1, 2), b);
  CHECK(c0.predicted == 0);
  CHECK(c0.distribution[0] == doctest::Approx(0.7 / 1.1));
  const auto c1 = classify(testing::parse_tree("(1)", 1, 2), b);
  CHECK(c1.predicted == 1);
  CHECK(c1.distribution[1] == doctest::Approx(0.6 / 0.9));
}

TEST_CASE("report arithmetic") {
  const auto r = report_from_predictions("classify", 3, {0, 0, 1, 2, 2}, {0, 1, 1, 2, 0},
                                         {{1, 0, 0}, {0.5, 0.5, 0}, {0, 1, 0}, {0, 0, 1}, {0.25, 0.25, 0.5}});
  CHECK(r.accuracy == doctest::Approx(60.0));
  std::int64_t trace = 0;
  for (int k = 0; k < 3; ++k) trace += r.confusion[k][k];
  CHECK(100.0 * static_cast<double>(trace) / static_cast<double>(r.total) == r.accuracy);
  const double h5 = -(0.5 * std::log(0.25) + 0.5 * std::log(0.5));
  CHECK(r.entropy == doctest::Approx((std::log(2.0) + h5) * 100.0 / 5.0));
  CHECK(r.per_class_accuracy == std::vector<double>{50.0, 100.0, 50.0});
  CHECK(confusion_csv(r).rfind("truth\\predicted,0,1,2\n", 0) == 0);
  CHECK(report_to_json(r).find("\"accuracy\"") != std::string::npos);
  CHECK_THROWS_AS(report_from_predictions("classify", 2, {0}, {2}, {{1, 0}}), DomainError);
}

TEST_CASE("uniform guessing over 18 classes scores ln 18 x 100") {
  std::vector<int> truth(36), pred(36, 0);
  std::vector<std::vector<double>> dist(36, std::vector<double>(18, 1.0 / 18.0));
  for (int i = 0; i < 36; ++i) truth[i] = i % 18;
  const auto r = report_from_predictions("classify", 18, truth, pred, dist);
  CHECK(std::abs(r.entropy - 289.0) < 0.5);
  CHECK(r.entropy == doctest::Approx(std::log(18.0) * 100.0));
}

TEST_CASE("labelling evaluation") {
  const TreeCorpus one = parse_corpus("L=2 M=1\n(0 (0) (0))\n(0)\n");
  const auto r1 = eval_labelling(one, single_state_model(2, {1.0}));
  CHECK(r1.accuracy == 100.0);
  CHECK(r1.entropy == 0.0);
  CHECK(r1.total == 4);

  const TreeCorpus four = parse_corpus("L=2 M=4\n(3 (0) (2))\n");
  const auto r4 = eval_labelling(four, single_state_model(2, {0.25, 0.25, 0.25, 0.25}));
  CHECK(r4.entropy == doctest::Approx(std::log(4.0) * 100.0));

  const TreeCorpus det = parse_corpus("L=1 M=2\n(1)\n");
  CHECK(eval_labelling(det, single_state_model(1, {0.0, 1.0})).accuracy == 100.0);
}

TEST_CASE("a perfect classifier") {
  ClassifierBundle b;
  b.models = {single_state_model(1, {1.0, 0.0}), single_state_model(1, {0.0, 1.0})};
  const TreeCorpus test = parse_corpus("L=1 M=2 CLASSES=2\n(0) | 0\n(1) | 1\n(0 (0)) | 0\n");
  const auto r = eval_classification(test, b);
  CHECK(r.accuracy == 100.0);
  CHECK(r.entropy == doctest::Approx(0.0));
}

TEST_CASE("aggregation over runs") {
  EvalReport a, b;
  a.task = b.task = "label";
  a.num_classes = b.num_classes = 1;
  a.accuracy = 80.0, b.accuracy = 90.0;
  a.entropy = 10.0, b.entropy = 20.0;
  a.per_class_accuracy = {80.0}, b.per_class_accuracy = {90.0};
  a.per_class_entropy = {10.0}, b.per_class_entropy = {20.0};
  const auto agg = aggregate_reports({a, b});
  CHECK(agg.runs == 2);
  CHECK(agg.accuracy_mean == doctest::Approx(85.0));
  CHECK(agg.accuracy_std == doctest::Approx(std::sqrt(50.0)));
  CHECK(format_aggregate_table(agg).find("(") != std::string::npos);
  const auto single = aggregate_reports({a});
  CHECK(format_aggregate_table(single).find("(") == std::string::npos);
  CHECK(aggregate_to_json(agg).find("accuracy_std") != std::string::npos);
}

TEST_CASE("synthetic generator") {
  Rng rng(3);
  const GeneratorConfig cfg;
  const TreeCorpus c = generate_synthetic(cfg, rng);
  CHECK(c.trees.size() == 780);
  CHECK(c.max_degree == 3);
  CHECK(c.alphabet_size == 4);
  REQUIRE(c.class_labels.has_value());
  std::vector<int> per_type(3, 0);
  for (std::size_t i = 0; i < c.trees.size(); ++i) {
    const auto& t = c.trees[i];
    const int type = (*c.class_labels)[i];
    ++per_type[type];
    CHECK(static_cast<int>(t.size()) >= cfg.min_nodes);
    for (NodeId u = 0; u < t.size(); ++u) CHECK(t.label(u) == t.occupied_slots(u));
    const auto [left, right] = outer_position_counts(t);
    if (type == 0) CHECK(left > right);
    if (type == 2) CHECK(right > left);
    if (type == 1) CHECK(std::abs(left - right) <= cfg.symmetric_tolerance);
    CHECK(satisfies_type(t, type, cfg));
  }
  CHECK(per_type == std::vector<int>{260, 260, 260});

  const auto split = split_stratified(c, 60);
  CHECK(split.train.trees.size() == 600);
  CHECK(split.test.trees.size() == 180);
  CHECK(split.train.trees.front() == c.trees.front());

  Rng again(3);
  CHECK(serialise_corpus(generate_synthetic(cfg, again)) == serialise_corpus(c));
  const double maj = majority_label_accuracy(split.train, split.test);
  CHECK(maj > 0.0);
  CHECK(maj < 100.0);
}

TEST_CASE("generator configuration checks") {
  GeneratorConfig cfg;
  cfg.count_per_type = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = GeneratorConfig{};
  cfg.occupation[0][1] = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("classifier training") {
  Rng rng(4);
  const TreeCorpus train = testing::separable_corpus(20, rng);
  HyperParams h = HyperParams::defaults(2, 2, 4, 2, 30);
  h.seed = 11;
  const auto a = train_classifier(train, h, ModelKind::kTf, 2);
  const auto b = train_classifier(train, h, ModelKind::kTf, 1);
  REQUIRE(a.num_classes() == 2);
  CHECK(std::get<TfModelParams>(a.models[0]) == std::get<TfModelParams>(b.models[0]));
  CHECK(std::get<TfModelParams>(a.models[1]) == std::get<TfModelParams>(b.models[1]));
  const TreeCorpus test = testing::separable_corpus(10, rng);
  CHECK(eval_classification(test, a).accuracy > 90.0);
  CHECK(eval_classification(test, train_classifier(train, h, ModelKind::kSp)).accuracy > 90.0);

  TreeCorpus only0 = train.select_class(0);
  only0.class_labels = std::vector<int>(only0.trees.size(), 0);
  only0.class_count = 1;
  const auto single = train_classifier(only0, h, ModelKind::kTf);
  CHECK(single.num_classes() == 1);
  CHECK(classify(test.trees[1], single).predicted == 0);

  TreeCorpus gap = train;
  gap.class_count = 3;
  CHECK_THROWS_AS(train_classifier(gap, h, ModelKind::kTf), ConfigError);
  TreeCorpus unlabelled = train;
  unlabelled.class_labels.reset();
  CHECK_THROWS_AS(train_classifier(unlabelled, h, ModelKind::kTf), ConfigError);
}

TEST_CASE("derived seeds differ per stream") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 100; ++s) seen.insert(derive_seed(7, s));
  CHECK(seen.size() == 100);
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}
