#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "tfhtmm/checkpoint.hpp"
#include "tfhtmm/model.hpp"
#include "tfhtmm/tasks.hpp"

namespace tfhtmm::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kValidation = 4,
};

/// Bad flag combination detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { kClassify, kLabel };
std::string to_string(Task task);
Task task_from_string(const std::string& name);

/// Hyper-parameter flags; unset fields fall back to HyperParams::defaults.
struct HyperFlags {
  int num_states = 10;
  int iterations = 100;
  double phi = 2.0;
  int l_min = 1;
  std::optional<int> l_max;  // 5 for classification, 3 for labelling
  std::optional<double> alpha, alpha0;
  double gamma = 1.0;
  double beta = 1.0;
  double t0 = 10.0;
  std::optional<int> m0;
  std::string acceptance = "emission";
};

HyperParams resolve_hyper(const HyperFlags& flags, Task task, int max_degree, int alphabet_size,
                          std::uint64_t seed);

struct RunConfig {
  std::string command;
  std::string corpus_path;  // train: training corpus; eval: training corpus for --runs
  std::string test_path;
  std::string input_path;
  std::string models_dir;
  std::string out_dir;
  std::string out_path;
  HyperFlags hyper;
  ModelKind model = ModelKind::kTf;
  Task task = Task::kLabel;
  GeneratorConfig generator;
  std::uint64_t seed = 1;
  int runs = 1;
  int jobs = 1;
};

void cmd_generate(const RunConfig& config, std::ostream& out);
void cmd_train(const RunConfig& config, std::ostream& out);
void cmd_eval(const RunConfig& config, std::ostream& out);
void cmd_classify(const RunConfig& config, std::ostream& out);
void cmd_label(const RunConfig& config, std::ostream& out);

/// Default --jobs: TFHTMM_JOBS when set and positive, otherwise 1.
int default_jobs();

/// Parses argv, dispatches, and maps errors to exit codes.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace tfhtmm::cli
