#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "tfhtmm/io.hpp"

using namespace tfhtmm;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tfhtmm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

}  // namespace

TEST_CASE("hyper-parameter defaults per task") {
  const cli::HyperFlags f;
  const HyperParams c = cli::resolve_hyper(f, cli::Task::kClassify, 8, 10, 1);
  CHECK(c.l_max == 5);
  CHECK(c.num_states == 10);
  CHECK(c.iterations == 100);
  CHECK(c.phi == 2.0);
  CHECK(c.l_min == 1);
  CHECK(cli::resolve_hyper(f, cli::Task::kLabel, 8, 10, 1).l_max == 3);
  CHECK(cli::resolve_hyper(f, cli::Task::kClassify, 2, 10, 1).l_max == 2);
}

TEST_CASE("generate is reproducible and validates counts") {
  TempDir d("tfhtmm_cli_gen");
  REQUIRE(run_cli({"generate", "--out-dir", d / "a", "--seed", "5", "--count-per-type", "20", "--test-per-type", "5"}).code == 0);
  REQUIRE(run_cli({"generate", "--out-dir", d / "b", "--seed", "5", "--count-per-type", "20", "--test-per-type", "5"}).code == 0);
  CHECK(read_text_file(d / "a/train.trees") == read_text_file(d / "b/train.trees"));
  CHECK(read_text_file(d / "a/test.trees") == read_text_file(d / "b/test.trees"));
  CHECK(read_text_file(d / "a/generate_meta.json").find("occupation") != std::string::npos);
  CHECK(run_cli({"generate", "--out-dir", d / "c", "--count-per-type", "0"}).code == cli::kUsage);
}

TEST_CASE("usage, I/O and validation exit codes") {
  TempDir d("tfhtmm_cli_codes");
  CHECK(run_cli({}).code == cli::kUsage);
  CHECK(run_cli({"bogus"}).code == cli::kUsage);
  CHECK(run_cli({"train", "--out-dir", d / "m"}).code == cli::kUsage);
  CHECK(run_cli({"--help"}).code == cli::kOk);
  CHECK(run_cli({"train", "--corpus", d / "missing.trees", "--out-dir", d / "m"}).code == cli::kIo);
  write_text_file_atomic(d / "bad.trees", "L=2 M=2\n(5)\n");
  CHECK(run_cli({"train", "--corpus", d / "bad.trees", "--out-dir", d / "m"}).code == cli::kValidation);
  write_text_file_atomic(d / "ok.trees", "L=2 M=2\n(1 (0) (1))\n");
  CHECK(run_cli({"train", "--corpus", d / "ok.trees", "--out-dir", d / "m", "--task", "classify"}).code ==
        cli::kValidation);
  CHECK(run_cli({"train", "--corpus", d / "ok.trees", "--out-dir", d / "m", "--states", "2", "--iterations", "3"})
            .code == cli::kOk);
  write_text_file_atomic(d / "other.trees", "L=3 M=2\n(1 (0))\n");
  CHECK(run_cli({"eval", "--models", d / "m", "--test", d / "other.trees", "--out-dir", d / "e"}).code ==
        cli::kValidation);
}

TEST_CASE("labelling pipeline") {
  TempDir d("tfhtmm_cli_label");
  REQUIRE(run_cli({"generate", "--out-dir", d / "data", "--count-per-type", "12", "--test-per-type", "3"}).code == 0);
  const auto tr = run_cli({"train", "--corpus", d / "data/train.trees", "--out-dir", d / "m", "--states", "3",
                           "--iterations", "5", "--seed", "2"});
  REQUIRE(tr.code == 0);
  CHECK(fs::exists(d / "m/model.json"));
  CHECK(fs::exists(d / "m/train.log.tsv"));
  const std::string manifest = read_text_file(d / "m/manifest.json");
  CHECK(manifest.find("code_version") != std::string::npos);
  CHECK(manifest.find("\"seed\": 2") != std::string::npos);

  const auto ev = run_cli({"eval", "--models", d / "m", "--test", d / "data/test.trees", "--out-dir", d / "e"});
  REQUIRE(ev.code == 0);
  CHECK(ev.out.find("all") != std::string::npos);
  CHECK(fs::exists(d / "e/report.json"));
  CHECK(fs::exists(d / "e/confusion.csv"));

  const auto lb = run_cli({"label", "--models", d / "m", "--input", d / "data/test.trees"});
  REQUIRE(lb.code == 0);
  CHECK(parse_corpus(lb.out).trees.size() == 9);

  // training twice from the same seed gives identical files
  REQUIRE(run_cli({"train", "--corpus", d / "data/train.trees", "--out-dir", d / "m2", "--states", "3",
                   "--iterations", "5", "--seed", "2"}).code == 0);
  CHECK(read_text_file(d / "m/model.json") == read_text_file(d / "m2/model.json"));
}

TEST_CASE("multi-run evaluation and classification") {
  TempDir d("tfhtmm_cli_runs");
  REQUIRE(run_cli({"generate", "--out-dir", d / "data", "--count-per-type", "10", "--test-per-type", "3"}).code == 0);
  const auto one = run_cli({"eval", "--train", d / "data/train.trees", "--test", d / "data/test.trees", "--out-dir",
                            d / "e1", "--task", "classify", "--states", "2", "--iterations", "4"});
  REQUIRE(one.code == 0);
  CHECK(one.out.find("(") == std::string::npos);
  const auto two = run_cli({"eval", "--train", d / "data/train.trees", "--test", d / "data/test.trees", "--out-dir",
                            d / "e2", "--task", "classify", "--states", "2", "--iterations", "4", "--runs", "2",
                            "--jobs", "2", "--model", "sp"});
  REQUIRE(two.code == 0);
  CHECK(two.out.find("(") != std::string::npos);
  CHECK(fs::exists(d / "e2/run1/report.txt"));
  CHECK(fs::exists(d / "e2/summary.json"));
  CHECK(run_cli({"eval", "--test", d / "data/test.trees", "--out-dir", d / "e3"}).code == cli::kUsage);

  REQUIRE(run_cli({"train", "--corpus", d / "data/train.trees", "--out-dir", d / "m", "--task", "classify",
                   "--states", "2", "--iterations", "4"}).code == 0);
  CHECK(fs::exists(d / "m/model_class2.json"));
  const auto cl = run_cli({"classify", "--models", d / "m", "--input", d / "data/test.trees"});
  REQUIRE(cl.code == 0);
  std::istringstream lines(cl.out);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 10);
  CHECK(run_cli({"label", "--models", d / "m", "--input", d / "data/test.trees"}).code == cli::kValidation);
}
