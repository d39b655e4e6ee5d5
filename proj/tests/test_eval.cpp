#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "test_util.hpp"
#include "trex/eval.hpp"

using namespace trex;

namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

Counts count_at(const std::vector<double>& s, const std::vector<bool>& y, double cut) {
  Counts c;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool pred = s[i] >= cut;
    c.tp += pred && y[i];
    c.fp += pred && !y[i];
    c.fn += !pred && y[i];
  }
  return c;
}

// Best F1 over every distinct score used as an inclusive cut.
double brute_max_f1(const std::vector<double>& s, const std::vector<bool>& y) {
  double best = 0.0;
  for (double cut : s) {
    const auto c = count_at(s, y, cut);
    best = std::max(best, 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn));
  }
  return best;
}

}  // namespace

TEST_CASE("f1 from counts") {
  CHECK(f1_score(2, 1, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(f1_score(0, 0, 3) == 0.0);
  CHECK(f1_score(5, 0, 0) == 1.0);
}

TEST_CASE("sweep examples") {
  const std::vector<double> scores{0.1, 0.2, 0.3, 0.8, 0.9};
  const std::vector<bool> labels{false, false, false, true, true};
  const auto r = sweep(scores, labels, 11);
  CHECK(r.max_f1 == 1.0);
  CHECK(r.pr_auc == doctest::Approx(1.0));
  CHECK(r.thresholds.size() == 11);
  CHECK(r.thresholds.front() == 0.0);
  CHECK(r.thresholds.back() == 1.0);
  CHECK(r.n_positive == 2);
  CHECK(r.n_negative == 3);

  // TP=2, FP=1, FN=1 at normalized thresholds in [0.55, 0.65).
  const std::vector<double> s2{0.0, 0.55, 0.65, 0.8, 1.0, 0.3};
  const std::vector<bool> y2{false, true, false, true, true, false};
  const auto r2 = sweep(s2, y2, 21);
  CHECK(r2.precision[12] == doctest::Approx(2.0 / 3.0));
  CHECK(r2.recall[12] == doctest::Approx(2.0 / 3.0));
  CHECK(r2.f1[12] == doctest::Approx(2.0 / 3.0));
  CHECK(r2.max_f1 == doctest::Approx(brute_max_f1(s2, y2)));

  const auto flat = sweep(std::vector<double>(6, 0.4), {true, false, true, false, false, false}, 16);
  for (double rc : flat.recall) CHECK((rc == 0.0 || rc == 1.0));
  CHECK(flat.recall.front() == 0.0);
  CHECK(flat.max_f1 == doctest::Approx(f1_score(2, 4, 0)));

  CHECK_THROWS_CODE(sweep({0.1, 0.2}, {false, false}), Errc::NoPositives);
  CHECK_THROWS_CODE(sweep({0.1, 0.2}, {true, true}), Errc::NoNegatives);
  CHECK_THROWS_CODE(sweep({0.1, 0.2}, {true}), Errc::ShapeMismatch);
}

TEST_CASE("sweep pr auc on a hand curve") {
  // Cuts in descending order: (R,P) = (1/2, 1), (1/2, 1/2), (1, 2/3).
  const auto r = sweep({0.9, 0.8, 0.7, 0.1}, {true, false, true, false}, 8);
  const double want = 0.5 * 1.0 + 0.5 * (0.5 + 2.0 / 3.0) / 2.0;
  CHECK(r.pr_auc == doctest::Approx(want).epsilon(1e-12));
  CHECK(r.max_f1 == doctest::Approx(0.8));
}

TEST_CASE("sweep properties on random scores") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(300);
    std::vector<bool> y(300);
    for (std::size_t i = 0; i < s.size(); ++i) {
      y[i] = coin(rng);
      s[i] = normal(rng) + (y[i] ? 0.8 : 0.0);
    }
    y[0] = true;
    y[1] = false;
    const auto r = sweep(s, y, 128);
    for (std::size_t k = 1; k < r.recall.size(); ++k) CHECK(r.recall[k] <= r.recall[k - 1]);
    for (std::size_t k = 0; k < r.f1.size(); ++k) {
      CHECK(r.precision[k] >= 0.0);
      CHECK(r.precision[k] <= 1.0);
      CHECK(r.f1[k] <= r.max_f1 + 1e-12);
    }
    CHECK(r.max_f1 == doctest::Approx(brute_max_f1(s, y)).epsilon(1e-12));

    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(2.0 * s[i]) + 7.0;
    const auto rt = sweep(t, y, 128);
    CHECK(std::abs(rt.max_f1 - r.max_f1) < 1e-9);
    CHECK(std::abs(rt.pr_auc - r.pr_auc) < 1e-9);
  }
}

TEST_CASE("random scores give pr auc near prevalence") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u;
    std::vector<double> s(2000);
    std::vector<bool> y(2000);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = u(rng);
      y[i] = i % 2 == 0;
    }
    CHECK(std::abs(sweep(s, y).pr_auc - 0.5) < 0.05);
  }
}

TEST_CASE("percent deltas and metric formatting") {
  CHECK(format_delta(0.80, 0.90) == "+13%");
  CHECK(format_delta(0.82, 0.97) == "+18%");
  CHECK(format_delta(0.80, 0.80) == "+0%");
  CHECK(format_delta(0.80, 0.87) == "+9%");
  CHECK(format_delta(0.90, 0.80) == "-11%");
  CHECK(format_delta(0.8049, 0.9) == "+13%");
  CHECK(format_metric(0.8) == "0.80");
  CHECK(format_metric(0.976) == "0.98");
  CHECK(display_name("trexdino") == "TREX-DINO");
  CHECK(display_name("tire") == "TIRE");
  CHECK(display_name("binseg") == "Binseg");
}

TEST_CASE("report layout") {
  const std::vector<double> s{0.1, 0.2, 0.3, 0.8, 0.9, 0.5};
  const std::vector<bool> y{false, false, true, true, true, false};
  std::vector<MethodResult> results{{"trexdino", sweep(s, y)}, {"binseg", sweep({0.5, 0.2, 0.3, 0.8, 0.1, 0.9}, y)}};
  const auto text = render_report(results);
  MESSAGE(text);
  const auto binseg_at = text.find("Binseg");
  const auto dino_at = text.find("TREX-DINO");
  REQUIRE(binseg_at != std::string::npos);
  REQUIRE(dino_at != std::string::npos);
  CHECK(binseg_at < dino_at);
  CHECK(text.find("F1 score") != std::string::npos);
  CHECK(text.find("PR AUC") != std::string::npos);
  CHECK(text.find("Baseline") != std::string::npos);
  CHECK(text.find('%') != std::string::npos);

  const auto alone = render_report({{"binseg", results[1].sweep}});
  CHECK(alone.find('%') == std::string::npos);

  const auto j = summary_json(results);
  CHECK(j["methods"].size() == 2);

  const auto dir = std::filesystem::temp_directory_path() / "trex_eval_test" / "curves";
  std::filesystem::remove_all(dir);
  write_curve_csv(results[0].sweep, dir / "trexdino.csv");
  std::ifstream in(dir / "trexdino.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "threshold,precision,recall,f1");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 512);
}
