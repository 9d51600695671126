#include "cli.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tfhtmm/errors.hpp"
#include "tfhtmm/io.hpp"
#include "tfhtmm/version.hpp"

namespace tfhtmm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Task task) { return task == Task::kClassify ? "classify" : "label"; }

Task task_from_string(const std::string& name) {
  if (name == "classify") return Task::kClassify;
  if (name == "label") return Task::kLabel;
  throw UsageError("unknown task '" + name + "' (expected classify or label)");
}

HyperParams resolve_hyper(const HyperFlags& flags, Task task, int max_degree, int alphabet_size,
                          std::uint64_t seed) {
  const int l_max = flags.l_max.value_or(task == Task::kClassify ? 5 : 3);
  HyperParams h = HyperParams::defaults(flags.num_states, max_degree, alphabet_size, l_max,
                                        flags.iterations);
  h.phi = flags.phi;
  h.l_min = std::min(flags.l_min, h.l_max);
  if (flags.alpha) h.alpha = *flags.alpha;
  if (flags.alpha0) h.alpha0 = *flags.alpha0;
  h.gamma = flags.gamma;
  h.beta = flags.beta;
  h.t0 = flags.t0;
  if (flags.m0) h.m0 = *flags.m0;
  h.acceptance = latent_acceptance_from_string(flags.acceptance);
  h.seed = seed;
  h.validate();
  return h;
}

int default_jobs() {
  if (const char* env = std::getenv("TFHTMM_JOBS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

namespace {

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

json run_metadata(const RunConfig& c, const HyperParams* hyper) {
  json j{{"command", c.command},
         {"code_version", kVersion},
         {"seed", c.seed},
         {"model", to_string(c.model)},
         {"task", to_string(c.task)},
         {"runs", c.runs}};
  if (!c.corpus_path.empty()) j["corpus"] = c.corpus_path;
  if (!c.test_path.empty()) j["test"] = c.test_path;
  if (!c.models_dir.empty()) j["models"] = c.models_dir;
  if (hyper) j["hyper"] = json::parse(hyper_to_json_string(*hyper));
  return j;
}

// Bounded worker pool over [0, n); the first exception is rethrown.
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string log_text(const std::vector<TrainingLogRow>& rows) {
  std::string out = log_header() + "\n";
  for (const auto& r : rows) out += format_log_row(r) + "\n";
  return out;
}

struct LoadedModels {
  Task task = Task::kLabel;
  ModelKind kind = ModelKind::kTf;
  std::vector<Checkpoint> checkpoints;
};

LoadedModels load_models(const std::string& dir) {
  const json manifest = json::parse(read_text_file(join(dir, "manifest.json")));
  LoadedModels out;
  try {
    if (manifest.at("format").get<std::string>() != "tfhtmm-models")
      throw DomainError("manifest format is not tfhtmm-models");
    out.task = task_from_string(manifest.at("task").get<std::string>());
    out.kind = model_kind_from_string(manifest.at("model").get<std::string>());
    for (const auto& name : manifest.at("checkpoints"))
      out.checkpoints.push_back(read_checkpoint_file(join(dir, name.get<std::string>())));
  } catch (const json::exception& e) {
    throw DomainError(std::string("malformed manifest: ") + e.what());
  }
  if (out.checkpoints.empty()) throw DomainError("manifest lists no checkpoints");
  return out;
}

void check_fits(const TreeCorpus& corpus, const HyperParams& hyper) {
  if (corpus.max_degree != hyper.max_degree || corpus.alphabet_size != hyper.alphabet_size)
    throw ConfigError("corpus (L=" + std::to_string(corpus.max_degree) + ", M=" +
                      std::to_string(corpus.alphabet_size) + ") does not match model (L=" +
                      std::to_string(hyper.max_degree) + ", M=" + std::to_string(hyper.alphabet_size) + ")");
}

ClassifierBundle bundle_from(const LoadedModels& m) {
  ClassifierBundle b;
  b.kind = m.kind;
  b.hyper = m.checkpoints.front().hyper;
  for (const auto& c : m.checkpoints) b.models.push_back(c.model);
  return b;
}

void write_report(const fs::path& dir, const EvalReport& r) {
  write_text_file_atomic(join(dir, "report.txt"), format_report_table(r));
  write_text_file_atomic(join(dir, "report.json"), report_to_json(r));
  write_text_file_atomic(join(dir, "confusion.csv"), confusion_csv(r));
}

Checkpoint make_checkpoint(const HyperParams& h, AnyModel model) {
  Checkpoint c;
  c.hyper = h;
  c.model = std::move(model);
  c.iteration = h.iterations;
  c.rng_state = rng_to_string(Rng(h.seed));
  return c;
}

}  // namespace

void cmd_generate(const RunConfig& c, std::ostream& out) {
  if (c.out_dir.empty()) throw UsageError("generate needs --out-dir");
  if (c.generator.count_per_type < 1) throw UsageError("--count-per-type must be >= 1");
  c.generator.validate();
  Rng rng(c.seed);
  const TreeCorpus corpus = generate_synthetic(c.generator, rng);
  const CorpusSplit split = split_stratified(corpus, c.generator.test_per_type);
  const fs::path dir(c.out_dir);
  write_corpus_file(join(dir, "train.trees"), split.train);
  write_corpus_file(join(dir, "test.trees"), split.test);
  json meta = run_metadata(c, nullptr);
  meta["generator"] = json::parse(c.generator.to_json());
  meta["train_trees"] = split.train.trees.size();
  meta["test_trees"] = split.test.trees.size();
  write_text_file_atomic(join(dir, "generate_meta.json"), meta.dump(1) + "\n");
  out << "generated " << corpus.trees.size() << " trees (" << split.train.trees.size() << " train, "
      << split.test.trees.size() << " test) in " << c.out_dir << "\n";
}

void cmd_train(const RunConfig& c, std::ostream& out) {
  if (c.corpus_path.empty()) throw UsageError("train needs --corpus");
  if (c.out_dir.empty()) throw UsageError("train needs --out-dir");
  const TreeCorpus corpus = read_corpus_file(c.corpus_path);
  const HyperParams hyper = resolve_hyper(c.hyper, c.task, corpus.max_degree, corpus.alphabet_size, c.seed);
  const fs::path dir(c.out_dir);
  json manifest{{"format", "tfhtmm-models"},
                {"version", 1},
                {"task", to_string(c.task)},
                {"model", to_string(c.model)}};
  json files = json::array();

  if (c.task == Task::kLabel) {
    std::vector<TrainingLogRow> rows;
    AnyModel model = train_model(corpus, hyper, c.model, [&rows](const TrainingLogRow& r) { rows.push_back(r); });
    write_checkpoint_file(join(dir, "model.json"), make_checkpoint(hyper, std::move(model)));
    write_text_file_atomic(join(dir, "train.log.tsv"), log_text(rows));
    files.push_back("model.json");
  } else {
    const int K = corpus.num_classes();
    std::vector<std::vector<TrainingLogRow>> rows(static_cast<std::size_t>(K));
    std::vector<TrainingLogger> loggers;
    for (int k = 0; k < K; ++k)
      loggers.emplace_back([&rows, k](const TrainingLogRow& r) { rows[static_cast<std::size_t>(k)].push_back(r); });
    ClassifierBundle bundle = train_classifier(corpus, hyper, c.model, c.jobs, loggers);
    for (int k = 0; k < K; ++k) {
      HyperParams hk = hyper;
      hk.seed = derive_seed(hyper.seed, static_cast<std::uint64_t>(k));
      const std::string name = "model_class" + std::to_string(k) + ".json";
      write_checkpoint_file(join(dir, name), make_checkpoint(hk, bundle.models[static_cast<std::size_t>(k)]));
      write_text_file_atomic(join(dir, "train_class" + std::to_string(k) + ".log.tsv"),
                             log_text(rows[static_cast<std::size_t>(k)]));
      files.push_back(name);
    }
    manifest["classes"] = K;
  }
  manifest["checkpoints"] = files;
  manifest["run"] = run_metadata(c, &hyper);
  write_text_file_atomic(join(dir, "manifest.json"), manifest.dump(1) + "\n");
  out << "trained " << files.size() << " " << to_string(c.model) << " model(s) into " << c.out_dir << "\n";
}

void cmd_eval(const RunConfig& c, std::ostream& out) {
  if (c.test_path.empty()) throw UsageError("eval needs --test");
  if (c.out_dir.empty()) throw UsageError("eval needs --out-dir");
  if (c.models_dir.empty() == c.corpus_path.empty())
    throw UsageError("eval needs exactly one of --models or --train");
  if (c.runs < 1) throw UsageError("--runs must be >= 1");
  const TreeCorpus test = read_corpus_file(c.test_path);
  const fs::path dir(c.out_dir);

  if (!c.models_dir.empty()) {
    const LoadedModels models = load_models(c.models_dir);
    check_fits(test, models.checkpoints.front().hyper);
    EvalReport r = models.task == Task::kLabel ? eval_labelling(test, models.checkpoints.front().model)
                                               : eval_classification(test, bundle_from(models));
    write_report(dir, r);
    write_text_file_atomic(join(dir, "run_meta.json"), run_metadata(c, &models.checkpoints.front().hyper).dump(1) + "\n");
    out << format_report_table(r);
    return;
  }

  const TreeCorpus train = read_corpus_file(c.corpus_path);
  if (train.max_degree != test.max_degree || train.alphabet_size != test.alphabet_size)
    throw ConfigError("training and test corpora disagree on L or M");
  std::vector<EvalReport> reports(static_cast<std::size_t>(c.runs));
  std::vector<HyperParams> hypers;
  for (int r = 0; r < c.runs; ++r)
    hypers.push_back(resolve_hyper(c.hyper, c.task, train.max_degree, train.alphabet_size,
                                   c.seed + static_cast<std::uint64_t>(r)));
  const int inner_jobs = c.runs > 1 ? 1 : c.jobs;
  parallel_for(c.runs, c.jobs, [&](int r) {
    const HyperParams& h = hypers[static_cast<std::size_t>(r)];
    EvalReport rep = c.task == Task::kLabel
                         ? eval_labelling(test, train_model(train, h, c.model))
                         : eval_classification(test, train_classifier(train, h, c.model, inner_jobs));
    rep.metadata["seed"] = std::to_string(h.seed);
    reports[static_cast<std::size_t>(r)] = std::move(rep);
  });
  for (int r = 0; r < c.runs; ++r) write_report(dir / ("run" + std::to_string(r)), reports[static_cast<std::size_t>(r)]);
  const AggregateReport agg = aggregate_reports(reports);
  write_text_file_atomic(join(dir, "summary.txt"), format_aggregate_table(agg));
  write_text_file_atomic(join(dir, "summary.json"), aggregate_to_json(agg));
  write_text_file_atomic(join(dir, "run_meta.json"), run_metadata(c, &hypers.front()).dump(1) + "\n");
  out << format_aggregate_table(agg);
}

void cmd_classify(const RunConfig& c, std::ostream& out) {
  if (c.models_dir.empty() || c.input_path.empty()) throw UsageError("classify needs --models and --input");
  const LoadedModels models = load_models(c.models_dir);
  if (models.task != Task::kClassify) throw ConfigError("models were trained for labelling, not classification");
  const TreeCorpus input = read_corpus_file(c.input_path);
  check_fits(input, models.checkpoints.front().hyper);
  const ClassifierBundle bundle = bundle_from(models);
  std::ostringstream text;
  text << "tree\tpredicted\tdistribution\n";
  text.precision(6);
  for (std::size_t i = 0; i < input.trees.size(); ++i) {
    const Classification cls = classify(input.trees[i], bundle);
    text << i << '\t' << cls.predicted << '\t';
    for (std::size_t k = 0; k < cls.distribution.size(); ++k) text << (k ? "," : "") << cls.distribution[k];
    text << '\n';
  }
  if (c.out_path.empty())
    out << text.str();
  else
    write_text_file_atomic(c.out_path, text.str());
}

void cmd_label(const RunConfig& c, std::ostream& out) {
  if (c.models_dir.empty() || c.input_path.empty()) throw UsageError("label needs --models and --input");
  const LoadedModels models = load_models(c.models_dir);
  if (models.task != Task::kLabel) throw ConfigError("models were trained for classification, not labelling");
  TreeCorpus input = read_corpus_file(c.input_path);
  check_fits(input, models.checkpoints.front().hyper);
  for (auto& tree : input.trees) {
    const auto marg = model_label_marginals(models.checkpoints.front().model, tree);
    std::vector<int> labels(tree.size());
    for (NodeId u = 0; u < tree.size(); ++u) labels[u] = static_cast<int>(argmax(marg[u]));
    tree = tree.with_labels(labels);
  }
  if (c.out_path.empty())
    out << serialise_corpus(input);
  else
    write_corpus_file(c.out_path, input);
}

namespace {

void add_hyper_flags(CLI::App* app, HyperFlags& h) {
  app->add_option("-C,--states", h.num_states, "Hidden states C")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--iterations", h.iterations, "Gibbs sweeps")->capture_default_str()->check(CLI::NonNegativeNumber);
  app->add_option("--phi", h.phi, "Size-prior decay")->capture_default_str();
  app->add_option("--lmin", h.l_min, "Minimum number of informative child positions")->capture_default_str();
  app->add_option("--lmax", h.l_max, "Maximum informative positions (default 5 classify, 3 label; clamped to L)");
  app->add_option("--alpha", h.alpha, "Core concentration (default C)");
  app->add_option("--alpha0", h.alpha0, "Base-measure concentration (default C)");
  app->add_option("--gamma", h.gamma, "Leaf-prior concentration")->capture_default_str();
  app->add_option("--beta", h.beta, "Emission concentration")->capture_default_str();
  app->add_option("--t0", h.t0, "Initial annealing temperature")->capture_default_str();
  app->add_option("--m0", h.m0, "Iteration at which the temperature reaches 1 (default iterations/10)");
  app->add_option("--acceptance", h.acceptance, "Latent acceptance rule")
      ->capture_default_str()
      ->check(CLI::IsMember({"emission", "as-printed", "core-ratio"}));
}

void add_model_flags(CLI::App* app, std::string& model, std::string& task) {
  app->add_option("--model", model, "Model kind")->capture_default_str()->check(CLI::IsMember({"tf", "sp"}));
  app->add_option("--task", task, "Task")->capture_default_str()->check(CLI::IsMember({"classify", "label"}));
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tensor-factorised bottom-up hidden tree Markov models"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunConfig cfg;
  cfg.jobs = default_jobs();
  std::string model = "tf";
  std::string task = "label";
  std::vector<double> p_left{0.8, 0.5, 0.2}, p_sym{0.5, 0.5, 0.5}, p_right{0.2, 0.5, 0.8};

  auto* gen = app.add_subcommand("generate", "Generate the synthetic ternary-tree corpus");
  gen->add_option("--out-dir", cfg.out_dir, "Output directory")->required();
  gen->add_option("--count-per-type", cfg.generator.count_per_type, "Trees per type")->capture_default_str();
  gen->add_option("--test-per-type", cfg.generator.test_per_type, "Test trees per type")->capture_default_str();
  gen->add_option("--depth-cap", cfg.generator.depth_cap, "Maximum depth")->capture_default_str();
  gen->add_option("--min-nodes", cfg.generator.min_nodes, "Minimum tree size")->capture_default_str();
  gen->add_option("--symmetric-tolerance", cfg.generator.symmetric_tolerance,
                  "Max |leftmost - rightmost| node-count gap for symmetric trees")->capture_default_str();
  gen->add_option("--p-left", p_left, "Slot occupation probabilities, left-asymmetric")->expected(3)->delimiter(',')->capture_default_str();
  gen->add_option("--p-sym", p_sym, "Slot occupation probabilities, symmetric")->expected(3)->delimiter(',')->capture_default_str();
  gen->add_option("--p-right", p_right, "Slot occupation probabilities, right-asymmetric")->expected(3)->delimiter(',')->capture_default_str();
  gen->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train a model (label) or one model per class (classify)");
  tr->add_option("--corpus", cfg.corpus_path, "Training corpus")->required();
  tr->add_option("--out-dir", cfg.out_dir, "Directory for checkpoints and logs")->required();
  add_model_flags(tr, model, task);
  add_hyper_flags(tr, cfg.hyper);
  tr->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
  tr->add_option("--jobs", cfg.jobs, "Parallel workers (env TFHTMM_JOBS)")->capture_default_str();

  auto* ev = app.add_subcommand("eval", "Evaluate saved models, or train and evaluate over several seeds");
  ev->add_option("--test", cfg.test_path, "Test corpus")->required();
  ev->add_option("--out-dir", cfg.out_dir, "Directory for reports")->required();
  ev->add_option("--models", cfg.models_dir, "Directory written by train");
  ev->add_option("--train", cfg.corpus_path, "Training corpus (train + eval per run)");
  ev->add_option("--runs", cfg.runs, "Runs with seeds seed, seed+1, ...")->capture_default_str();
  add_model_flags(ev, model, task);
  add_hyper_flags(ev, cfg.hyper);
  ev->add_option("--seed", cfg.seed, "First RNG seed")->capture_default_str();
  ev->add_option("--jobs", cfg.jobs, "Parallel workers (env TFHTMM_JOBS)")->capture_default_str();

  auto* cl = app.add_subcommand("classify", "Predict the class of each tree");
  cl->add_option("--models", cfg.models_dir, "Directory written by train --task classify")->required();
  cl->add_option("--input", cfg.input_path, "Corpus to classify")->required();
  cl->add_option("--out", cfg.out_path, "Output file (default stdout)");

  auto* lb = app.add_subcommand("label", "Predict node labels from tree structure");
  lb->add_option("--models", cfg.models_dir, "Directory written by train --task label")->required();
  lb->add_option("--input", cfg.input_path, "Corpus whose labels are replaced")->required();
  lb->add_option("--out", cfg.out_path, "Output corpus (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    cfg.model = model_kind_from_string(model);
    cfg.task = task_from_string(task);
    cfg.generator.occupation = {{{p_left[0], p_left[1], p_left[2]},
                                 {p_sym[0], p_sym[1], p_sym[2]},
                                 {p_right[0], p_right[1], p_right[2]}}};
    if (gen->parsed()) {
      cfg.command = "generate";
      cmd_generate(cfg, out);
    } else if (tr->parsed()) {
      cfg.command = "train";
      cmd_train(cfg, out);
    } else if (ev->parsed()) {
      cfg.command = "eval";
      cmd_eval(cfg, out);
    } else if (cl->parsed()) {
      cfg.command = "classify";
      cmd_classify(cfg, out);
    } else if (lb->parsed()) {
      cfg.command = "label";
      cmd_label(cfg, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}

}  // namespace tfhtmm::cli
