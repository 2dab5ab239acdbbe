#pragma once

// Road reference line and the polynomial distance model fitted from
// (line coordinate, true distance) calibration pairs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coopmod/geometry.hpp"

namespace coopmod::calib {

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientPoints : public CalibrationError {
 public:
  using CalibrationError::CalibrationError;
};

class SingularSystem : public CalibrationError {
 public:
  using CalibrationError::CalibrationError;
};

class InvalidCalibrationData : public CalibrationError {
 public:
  using CalibrationError::CalibrationError;
};

/// Condition-number ceiling for the (equilibrated) normal matrix.
inline constexpr double kMaxConditionNumber = 1e12;

/// Straight line along the lane centre in image coordinates; s runs from
/// 0 at p0 to s_max at p1.
class ReferenceLine {
 public:
  ReferenceLine(Vec2 p0, Vec2 p1) : p0_(p0), p1_(p1), s_max_(distance(p0, p1)) {
    if (!(s_max_ > 0.0) || !std::isfinite(s_max_)) {
      throw std::invalid_argument("reference line endpoints must be distinct and finite");
    }
    unit_ = (1.0 / s_max_) * (p1_ - p0_);
  }

  [[nodiscard]] Vec2 p0() const { return p0_; }
  [[nodiscard]] Vec2 p1() const { return p1_; }
  [[nodiscard]] double s_max() const { return s_max_; }
  [[nodiscard]] Vec2 direction() const { return unit_; }

  /// Unclamped scalar projection of (point - p0) on the line direction.
  [[nodiscard]] double coordinate(Vec2 point) const { return (point - p0_).dot(unit_); }

  [[nodiscard]] Vec2 point_at(double s) const { return p0_ + s * unit_; }

 private:
  Vec2 p0_;
  Vec2 p1_;
  double s_max_;
  Vec2 unit_;
};

/// Orthogonal projection onto the segment, clamped to [0, s_max].
inline double project_to_line(Vec2 point, const ReferenceLine& line) {
  return std::clamp(line.coordinate(point), 0.0, line.s_max());
}

struct CalibrationPair {
  double s = 0.0;
  double d = 0.0;
};

/// Calibration pairs sorted by s; s values distinct, distances positive.
class CalibrationSet {
 public:
  explicit CalibrationSet(std::vector<CalibrationPair> pairs) : pairs_(std::move(pairs)) {
    std::sort(pairs_.begin(), pairs_.end(),
              [](const CalibrationPair& a, const CalibrationPair& b) { return a.s < b.s; });
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const auto& p = pairs_[i];
      if (!std::isfinite(p.s) || !std::isfinite(p.d)) {
        throw InvalidCalibrationData("calibration values must be finite");
      }
      if (!(p.d > 0.0)) throw InvalidCalibrationData("calibration distances must be positive");
      if (i > 0 && !(p.s > pairs_[i - 1].s)) {
        throw InvalidCalibrationData("calibration line coordinates must be distinct");
      }
    }
  }

  [[nodiscard]] const std::vector<CalibrationPair>& pairs() const { return pairs_; }
  [[nodiscard]] std::size_t size() const { return pairs_.size(); }

 private:
  std::vector<CalibrationPair> pairs_;
};

/// d(s) = sum_i weights[i] * s^i.
class CalibrationModel {
 public:
  explicit CalibrationModel(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw std::invalid_argument("calibration model needs at least one weight");
    for (double w : weights_) {
      if (!std::isfinite(w)) throw std::invalid_argument("calibration weights must be finite");
    }
  }

  [[nodiscard]] int order() const { return static_cast<int>(weights_.size()) - 1; }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }

  /// Raw polynomial value (Horner).
  [[nodiscard]] double evaluate(double s) const {
    double acc = 0.0;
    for (auto it = weights_.rbegin(); it != weights_.rend(); ++it) acc = acc * s + *it;
    return acc;
  }

 private:
  std::vector<double> weights_;
};

struct DistanceEstimate {
  double meters = 0.0;
  bool extrapolated = false;  // polynomial went negative and was clamped
};

inline DistanceEstimate estimate_distance(const CalibrationModel& model, double s) {
  const double d = model.evaluate(s);
  if (d < 0.0) return {0.0, true};
  return {d, false};
}

namespace detail {

using Matrix = std::vector<std::vector<double>>;

/// LU with partial pivoting, in place. Returns false on an exactly zero pivot.
inline bool lu_decompose(Matrix& a, std::vector<std::size_t>& perm) {
  const std::size_t n = a.size();
  perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (a[pivot][col] == 0.0) return false;
    std::swap(a[pivot], a[col]);
    std::swap(perm[pivot], perm[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      a[r][col] /= a[col][col];
      for (std::size_t c = col + 1; c < n; ++c) a[r][c] -= a[r][col] * a[col][c];
    }
  }
  return true;
}

inline std::vector<double> lu_solve(const Matrix& lu, const std::vector<std::size_t>& perm,
                                    const std::vector<double>& b) {
  const std::size_t n = lu.size();
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[perm[i]];
    for (std::size_t j = 0; j < i; ++j) v -= lu[i][j] * x[j];
    x[i] = v;
  }
  for (std::size_t i = n; i-- > 0;) {
    double v = x[i];
    for (std::size_t j = i + 1; j < n; ++j) v -= lu[i][j] * x[j];
    x[i] = v / lu[i][i];
  }
  return x;
}

inline double norm1(const Matrix& a) {
  double best = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    double col = 0.0;
    for (std::size_t r = 0; r < a.size(); ++r) col += std::abs(a[r][c]);
    best = std::max(best, col);
  }
  return best;
}

}  // namespace detail

/// Least-squares polynomial fit via the normal equations
/// (Phi^T Phi) w = Phi^T d, with phi(s) = [1, s, ..., s^order].
///
/// The normal matrix is symmetrically equilibrated before the pivoted LU so
/// pixel-scale coordinates (s^4 terms near 1e11) stay well conditioned, and
/// the solution gets two rounds of residual refinement in long double.
inline CalibrationModel fit(const CalibrationSet& calib, int order) {
  if (order < 0) throw std::invalid_argument("polynomial order must be non-negative");
  const std::size_t n = static_cast<std::size_t>(order) + 1;
  const auto& pairs = calib.pairs();
  if (pairs.size() < n) {
    throw InsufficientPoints("need at least " + std::to_string(n) + " calibration pairs for order " +
                             std::to_string(order) + ", got " + std::to_string(pairs.size()));
  }

  auto features = [n](double s) {
    std::vector<long double> phi(n);
    long double p = 1.0L;
    for (std::size_t i = 0; i < n; ++i, p *= s) phi[i] = p;
    return phi;
  };

  std::vector<long double> ata(n * n, 0.0L);
  std::vector<long double> atd(n, 0.0L);
  for (const auto& [s, d] : pairs) {
    const auto phi = features(s);
    for (std::size_t i = 0; i < n; ++i) {
      atd[i] += phi[i] * d;
      for (std::size_t j = 0; j < n; ++j) ata[i * n + j] += phi[i] * phi[j];
    }
  }

  std::vector<double> scale(n);
  for (std::size_t i = 0; i < n; ++i) {
    scale[i] = ata[i * n + i] > 0.0L ? 1.0 / std::sqrt(static_cast<double>(ata[i * n + i])) : 1.0;
  }
  detail::Matrix a(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      a[i][j] = static_cast<double>(ata[i * n + j]) * scale[i] * scale[j];
    }
  }
  const double a_norm = detail::norm1(a);

  detail::Matrix lu = a;
  std::vector<std::size_t> perm;
  if (!detail::lu_decompose(lu, perm)) throw SingularSystem("normal matrix is singular");

  detail::Matrix inverse(n, std::vector<double>(n));
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> e(n, 0.0);
    e[c] = 1.0;
    const auto col = detail::lu_solve(lu, perm, e);
    for (std::size_t r = 0; r < n; ++r) inverse[r][c] = col[r];
  }
  const double cond = a_norm * detail::norm1(inverse);
  if (!std::isfinite(cond) || cond > kMaxConditionNumber) {
    throw SingularSystem("normal matrix condition estimate " + std::to_string(cond) +
                         " exceeds 1e12");
  }

  // Solve in scaled variables y = w / scale, then refine on the true residual.
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = static_cast<double>(atd[i]) * scale[i];
  auto y = detail::lu_solve(lu, perm, rhs);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = y[i] * scale[i];

  for (int iter = 0; iter < 2; ++iter) {
    std::vector<long double> grad(n, 0.0L);  // Phi^T (d - Phi w)
    for (const auto& [s, d] : pairs) {
      const auto phi = features(s);
      long double pred = 0.0L;
      for (std::size_t i = 0; i < n; ++i) pred += phi[i] * w[i];
      const long double r = d - pred;
      for (std::size_t i = 0; i < n; ++i) grad[i] += phi[i] * r;
    }
    for (std::size_t i = 0; i < n; ++i) rhs[i] = static_cast<double>(grad[i]) * scale[i];
    const auto dy = detail::lu_solve(lu, perm, rhs);
    for (std::size_t i = 0; i < n; ++i) w[i] += dy[i] * scale[i];
  }
  return CalibrationModel(std::move(w));
}

/// Two-column CSV (s, d) with a one-line header.
inline CalibrationSet parse_calibration_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidCalibrationData("calibration CSV is empty");
  std::vector<CalibrationPair> pairs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::stringstream row(line);
    std::string s_text;
    std::string d_text;
    if (!std::getline(row, s_text, ',') || !std::getline(row, d_text)) {
      throw InvalidCalibrationData("line " + std::to_string(line_no) + ": expected two columns");
    }
    try {
      std::size_t used_s = 0;
      std::size_t used_d = 0;
      const double s = std::stod(s_text, &used_s);
      const double d = std::stod(d_text, &used_d);
      if (s_text.find_first_not_of(" \t", used_s) != std::string::npos ||
          d_text.find_first_not_of(" \t", used_d) != std::string::npos) {
        throw std::invalid_argument("trailing characters");
      }
      pairs.push_back({s, d});
    } catch (const std::logic_error&) {
      throw InvalidCalibrationData("line " + std::to_string(line_no) + ": not a number pair");
    }
  }
  return CalibrationSet(std::move(pairs));
}

inline CalibrationSet load_calibration_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open calibration file " + path);
  return parse_calibration_csv(in);
}

}  // namespace coopmod::calib
