#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "coopmod/calibration.hpp"
#include "coopmod/random.hpp"

using namespace coopmod;
using namespace coopmod::calib;
using Catch::Matchers::WithinAbs;

namespace {

double sse(const CalibrationSet& set, const std::vector<double>& w) {
  const CalibrationModel m(w);
  double acc = 0.0;
  for (const auto& p : set.pairs()) {
    const double r = p.d - m.evaluate(p.s);
    acc += r * r;
  }
  return acc;
}

CalibrationSet random_set(Rng& rng, std::size_t n) {
  std::vector<CalibrationPair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 600.0 * (static_cast<double>(i) + rng.uniform(0.05, 0.95)) / static_cast<double>(n);
    pairs.push_back({s, 2.0 + 0.07 * s + 0.00025 * s * s + rng.normal(0.0, 1.5) + 5.0});
  }
  return CalibrationSet(std::move(pairs));
}

}  // namespace

TEST_CASE("projection onto the reference line") {
  const ReferenceLine line({0.0, 0.0}, {100.0, 0.0});
  CHECK(project_to_line({0.0, 0.0}, line) == 0.0);
  CHECK(project_to_line({100.0, 0.0}, line) == 100.0);
  CHECK(project_to_line({40.0, 12.0}, line) == 40.0);
  CHECK(project_to_line({-5.0, 1.0}, line) == 0.0);
  CHECK(project_to_line({130.0, -3.0}, line) == 100.0);
  CHECK(line.s_max() == 100.0);
  CHECK_THROWS_AS(ReferenceLine({3.0, 4.0}, {3.0, 4.0}), std::invalid_argument);
}

TEST_CASE("projection is idempotent along a slanted line") {
  const ReferenceLine line({640.0, 800.0}, {660.0, 200.0});
  CHECK_THAT(line.s_max(), WithinAbs(std::hypot(20.0, 600.0), 1e-12));
  for (int i = 0; i <= 100; ++i) {
    const double s = line.s_max() * i / 100.0;
    CHECK_THAT(project_to_line(line.point_at(s), line), WithinAbs(s, 1e-9));
  }
}

TEST_CASE("fit recovers a noiseless quadratic") {
  std::vector<CalibrationPair> pairs;
  for (int s = 0; s <= 9; ++s) pairs.push_back({double(s), 2.0 + 0.5 * s + 0.01 * s * s});
  const auto m = fit(CalibrationSet(pairs), 2);
  REQUIRE(m.order() == 2);
  CHECK_THAT(m.weights()[0], WithinAbs(2.0, 1e-9));
  CHECK_THAT(m.weights()[1], WithinAbs(0.5, 1e-9));
  CHECK_THAT(m.weights()[2], WithinAbs(0.01, 1e-9));
}

TEST_CASE("fit matches the hand-solved linear case") {
  const auto m = fit(CalibrationSet({{0, 1}, {1, 2}, {2, 5}}), 1);
  CHECK_THAT(m.weights()[0], WithinAbs(2.0 / 3.0, 1e-12));
  CHECK_THAT(m.weights()[1], WithinAbs(2.0, 1e-12));
  CHECK_THAT(estimate_distance(m, 0.0).meters, WithinAbs(2.0 / 3.0, 1e-12));
}

TEST_CASE("fit rejects underdetermined and bad data") {
  CHECK_THROWS_AS(fit(CalibrationSet({{1.0, 3.0}}), 1), InsufficientPoints);
  CHECK_THROWS_AS(fit(CalibrationSet({{1.0, 3.0}, {2.0, 4.0}}), 2), InsufficientPoints);
  CHECK_THROWS_AS(CalibrationSet({{1.0, 3.0}, {1.0, 4.0}}), InvalidCalibrationData);
  CHECK_THROWS_AS(CalibrationSet({{1.0, -3.0}}), InvalidCalibrationData);
  CHECK_THROWS_AS(CalibrationSet({{NAN, 3.0}}), InvalidCalibrationData);
  CHECK_THROWS_AS(fit(CalibrationSet({{0, 1}, {1, 2}}), -1), std::invalid_argument);
}

TEST_CASE("fit reports ill-conditioned systems") {
  std::vector<CalibrationPair> pairs;
  for (int i = 0; i < 12; ++i) pairs.push_back({1e6 + i * 1e-3, 10.0 + i});
  CHECK_THROWS_AS(fit(CalibrationSet(pairs), 4), SingularSystem);
}

TEST_CASE("polynomial evaluation") {
  CHECK_THAT(estimate_distance(CalibrationModel({2, 0.5, 0.01}), 10.0).meters, WithinAbs(8.0, 1e-12));
  for (double s : {0.0, 3.0, 1e4}) CHECK(estimate_distance(CalibrationModel({5, 0}), s).meters == 5.0);
  const auto neg = estimate_distance(CalibrationModel({-1.0, 0.1}), 2.0);
  CHECK(neg.meters == 0.0);
  CHECK(neg.extrapolated);
}

TEST_CASE("least-squares optimality under single-weight perturbation") {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto set = random_set(rng, 6 + trial % 10);
    const int order = trial % 3;
    const auto w = fit(set, order).weights();
    const double base = sse(set, w);
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (double delta : {1e-3, -1e-3}) {
        auto p = w;
        p[i] += delta;
        REQUIRE(sse(set, p) >= base);
      }
    }
  }
}

TEST_CASE("exact recovery of random low-order polynomials") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const int order = trial % 3;
    std::vector<double> truth(order + 1);
    for (auto& c : truth) c = rng.uniform(-2.0, 2.0);
    truth[0] = 500.0;  // keep distances positive
    const CalibrationModel model(truth);
    std::vector<CalibrationPair> pairs;
    const int n = order + 1 + static_cast<int>(rng.next() % 6);
    for (int i = 0; i < n; ++i) pairs.push_back({rng.uniform(0.0, 10.0) + 10.0 * i, 0.0});
    for (auto& p : pairs) p.d = model.evaluate(p.s);
    bool positive = true;
    for (const auto& p : pairs) positive = positive && p.d > 0.0;
    if (!positive) continue;
    const auto w = fit(CalibrationSet(pairs), order).weights();
    for (int i = 0; i <= order; ++i) REQUIRE_THAT(w[i], WithinAbs(truth[i], 1e-9));
  }
}

TEST_CASE("calibration CSV parsing") {
  std::istringstream good("s_px,distance_m\n0,1\n1,2\r\n\n2,5\n");
  const auto set = parse_calibration_csv(good);
  CHECK(set.size() == 3);

  std::istringstream bad("s,d\n1,2\nthree,4\n");
  CHECK_THROWS_AS(parse_calibration_csv(bad), InvalidCalibrationData);
  std::istringstream single("s,d\n1\n");
  CHECK_THROWS_AS(parse_calibration_csv(single), InvalidCalibrationData);
  std::istringstream empty("");
  CHECK_THROWS_AS(parse_calibration_csv(empty), InvalidCalibrationData);
  CHECK_THROWS_AS(load_calibration_csv("/nonexistent/calib.csv"), std::ios_base::failure);
}
