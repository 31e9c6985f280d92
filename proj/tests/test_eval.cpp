#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "confusio/error.hpp"
#include "confusio/eval.hpp"

using namespace confusio;

namespace {

constexpr auto C = Judgment::Confusion;
constexpr auto N = Judgment::NoConfusion;

// F1 from raw counts, with 2TP / (2TP + FP + FN).
double f1_oracle(const std::vector<Judgment>& p, const std::vector<Judgment>& g) {
  double total = 0;
  for (Judgment c : {N, C}) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      tp += p[i] == c && g[i] == c;
      fp += p[i] == c && g[i] != c;
      fn += p[i] != c && g[i] == c;
    }
    total += tp + fp + fn == 0 ? 0 : 2 * tp / (2 * tp + fp + fn);
  }
  return total / 2;
}

FactorScores fs(std::array<double, 5> v) {
  FactorScores f;
  f.values = v;
  return f;
}

PredictionRecord pr(bool correct, double p) {
  PredictionRecord r;
  r.gold = C;
  r.predicted = correct ? C : N;
  r.confidence = p;
  return r;
}

}  // namespace

TEST_CASE("macro F1 worked examples") {
  std::vector<Judgment> g{C, C, C, N, N}, p{C, C, N, N, C};
  CHECK(macro_f1(p, g) == doctest::Approx(7.0 / 12));
  std::vector<Judgment> g2{C, C, N, N, N, N}, p2{C, N, N, N, N, C};
  CHECK(macro_f1(p2, g2) == doctest::Approx(0.625));
  CHECK(macro_f1(g, g) == 1.0);
  std::vector<Judgment> inv{N, N, N, C, C};
  CHECK(macro_f1(inv, g) == 0.0);
}

TEST_CASE("macro F1 matches the count oracle on random labelings") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 30;
    std::vector<Judgment> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng() % 2 ? C : N;
      g[i] = rng() % 2 ? C : N;
    }
    const double f = macro_f1(p, g);
    CHECK(f == doctest::Approx(f1_oracle(p, g)).epsilon(1e-12));
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);

    // Swapping class names leaves macro F1 unchanged.
    auto flip = [](std::vector<Judgment> v) {
      for (auto& j : v) j = j == C ? N : C;
      return v;
    };
    CHECK(macro_f1(flip(p), flip(g)) == doctest::Approx(f).epsilon(1e-12));
  }
}

TEST_CASE("macro F1 warnings and errors") {
  std::vector<std::string> w;
  std::vector<Judgment> all{C, C};
  CHECK(macro_f1(all, all, &w) == 0.5);
  CHECK(w.size() == 1);
  std::vector<Judgment> one{C};
  CHECK_THROWS_AS(macro_f1(one, all), ValidationError);
  CHECK_THROWS_AS(macro_f1({}, {}), ValidationError);
}

TEST_CASE("MAE and MSE") {
  std::vector<FactorScores> a{fs({1, 2, 3, 4, 5})};
  auto m = mae_mse(a, a);
  CHECK(m.mae == 0.0);
  CHECK(m.mse == 0.0);
  std::vector<FactorScores> b{fs({3, 4, 5, 2, 3})};
  m = mae_mse(b, a);
  CHECK(m.mae == 2.0);
  CHECK(m.mse == 4.0);
  CHECK(m.mae <= std::sqrt(m.mse) + 1e-12);
  CHECK_THROWS(mae_mse(a, std::vector<FactorScores>{}));
}

TEST_CASE("uniform random predictions match the enumerated expectation") {
  // Over 0..5 paired with 0..5: E|d| = 70/36, E d^2 = 210/36.
  double ea = 0, es = 0;
  for (int i = 0; i <= 5; ++i)
    for (int j = 0; j <= 5; ++j) {
      ea += std::abs(i - j) / 36.0;
      es += (i - j) * (i - j) / 36.0;
    }
  CHECK(ea == doctest::Approx(70.0 / 36));
  CHECK(es == doctest::Approx(210.0 / 36));

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> u(0, 5);
  std::vector<FactorScores> p, g;
  for (int n = 0; n < 100000; ++n) {
    FactorScores a, b;
    for (int k = 0; k < 5; ++k) {
      a.values[k] = u(rng);
      b.values[k] = u(rng);
    }
    p.push_back(a);
    g.push_back(b);
  }
  auto m = mae_mse(p, g);
  CHECK(std::abs(m.mae - ea) / ea <= 0.02);
  CHECK(std::abs(m.mse - es) / es <= 0.02);
}

TEST_CASE("ECE worked examples") {
  std::vector<PredictionRecord> sure{pr(true, 1.0), pr(true, 1.0), pr(true, 1.0)};
  CHECK(ece(sure).ece == 0.0);

  std::vector<PredictionRecord> half{pr(true, 0.95), pr(false, 0.95)};
  CHECK(ece(half).ece == doctest::Approx(0.45));

  std::vector<PredictionRecord> mixed;
  for (int i = 0; i < 5; ++i) mixed.push_back(pr(true, 0.9));
  for (int i = 0; i < 5; ++i) mixed.push_back(pr(i < 3, 0.7));
  auto r = ece(mixed);
  CHECK(r.ece == doctest::Approx(0.10));
  REQUIRE(r.table.bins.size() == 5);
  CHECK(r.table.bins[3].count == 5);
  CHECK(r.table.bins[3].accuracy == doctest::Approx(0.6));
  CHECK(r.table.bins[4].count == 5);
  CHECK(r.table.bins[0].count == 0);
  CHECK(r.table.bins[0].accuracy == 0.0);
}

TEST_CASE("calibration bin boundaries") {
  CHECK(calibration_bin(0.0, 5) == 1);
  CHECK(calibration_bin(0.2, 5) == 1);
  CHECK(calibration_bin(std::nextafter(0.2, 1.0), 5) == 2);
  CHECK(calibration_bin(0.6, 5) == 3);
  CHECK(calibration_bin(1.0, 5) == 5);
  CHECK(calibration_bin(0.5, 1) == 1);
  for (std::size_t m : {1u, 3u, 5u, 10u})
    for (int i = 0; i <= 1000; ++i) {
      const double p = i / 1000.0;
      const auto b = calibration_bin(p, m);
      CHECK(b >= 1);
      CHECK(b <= m);
    }
  CHECK_THROWS(ece({}));
  std::vector<PredictionRecord> one{pr(true, 0.5)};
  CHECK_THROWS(ece(one, 0));
}

TEST_CASE("ECE properties on random records") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.5, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<PredictionRecord> rs;
    const int n = 1 + int(rng() % 60);
    for (int i = 0; i < n; ++i) rs.push_back(pr(rng() % 2, u(rng)));
    const double e = ece(rs).ece;
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
    std::shuffle(rs.begin(), rs.end(), rng);
    CHECK(ece(rs).ece == doctest::Approx(e).epsilon(1e-12));
    std::size_t total = 0;
    for (auto& b : ece(rs).table.bins) total += b.count;
    CHECK(total == rs.size());
  }
}

TEST_CASE("mean and sample standard deviation") {
  std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  auto m = mean_std(v);
  CHECK(m.mean == 5.0);
  CHECK(m.stddev == doctest::Approx(std::sqrt(32.0 / 7)));
  CHECK(m.n == 8);
  std::vector<double> one{3.5};
  CHECK(mean_std(one).stddev == 0.0);
  CHECK_THROWS(mean_std({}));
}
