#include <doctest.h>

#include <cmath>
#include <vector>

#include "tfhtmm/numeric.hpp"

using namespace tfhtmm;

TEST_CASE("log_sum_exp handles large magnitudes and empty input") {
  std::vector<double> v{1000.0, 1000.0};
  CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)));
  std::vector<double> small{-1000.0, -1001.0};
  CHECK(log_sum_exp(small) == doctest::Approx(-1000.0 + std::log1p(std::exp(-1.0))));
  CHECK(log_sum_exp(std::vector<double>{}) == kLogZero);
  CHECK(log_sum_exp(std::vector<double>{kLogZero, kLogZero}) == kLogZero);
  CHECK(log_add_exp(kLogZero, 3.0) == 3.0);
}

TEST_CASE("entropy is natural-log Shannon entropy") {
  CHECK(entropy(std::vector<double>{1.0, 0.0}) == 0.0);
  CHECK(entropy(std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)));
  std::vector<double> u(18, 1.0 / 18.0);
  CHECK(entropy(u) == doctest::Approx(std::log(18.0)));
}

TEST_CASE("log multivariate beta") {
  CHECK(log_multivariate_beta(std::vector<double>{1.0, 1.0}) == doctest::Approx(0.0));
  CHECK(log_multivariate_beta(std::vector<double>{2.0, 1.0}) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("dirichlet draws are simplexes with the right mean") {
  Rng rng(7);
  std::vector<double> conc{0.3, 1.0, 2.7};
  std::vector<double> mean(3, 0.0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_dirichlet(conc, rng);
    REQUIRE(is_simplex(s));
    for (int j = 0; j < 3; ++j) mean[j] += s[j] / n;
  }
  CHECK(mean[0] == doctest::Approx(0.3 / 4.0).epsilon(0.05));
  CHECK(mean[2] == doctest::Approx(2.7 / 4.0).epsilon(0.02));
}

TEST_CASE("tiny concentrations still give valid simplexes") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) CHECK(is_simplex(sample_dirichlet(4, 1e-3, rng)));
}

TEST_CASE("argmax breaks ties towards the lowest index") {
  CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
  CHECK(argmax(std::vector<double>{2.0, 2.0}) == 0);
}

TEST_CASE("categorical sampling follows weights") {
  Rng rng(11);
  std::vector<double> w{1.0, 3.0, 0.0};
  int hits[3] = {0, 0, 0};
  for (int i = 0; i < 40000; ++i) ++hits[sample_categorical(w, rng)];
  CHECK(hits[2] == 0);
  CHECK(hits[1] / 40000.0 == doctest::Approx(0.75).epsilon(0.02));
}
