#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pilot {

inline constexpr const char* kVersion = "1.0.0";

// Vectors with a norm below this are treated as degenerate (not normalizable).
inline constexpr double kNormEpsilon = 1e-9;

// Base error type for everything the library throws on bad input or bad state.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration / contract violations (bad hyperparameters, malformed files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

inline Eigen::VectorXd normalized(const Eigen::VectorXd& v, const char* what) {
  double n = v.norm();
  if (n < kNormEpsilon) throw Error(std::string("degenerate ") + what);
  return v / n;
}

// Cosine similarity that maps degenerate inputs to 0 instead of throwing.
inline double safe_cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  double nu = u.norm();
  double nv = v.norm();
  if (nu < kNormEpsilon || nv < kNormEpsilon) return 0.0;
  return u.dot(v) / (nu * nv);
}

inline double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return 1.0 - safe_cosine(u, v);
}

inline Eigen::VectorXd unit_sphere_sample(int dim, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
  } while (v.norm() < kNormEpsilon);
  return v / v.norm();
}

// Fisher-Yates over [0, n); hand-rolled so shuffles are identical across
// standard library implementations.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  return idx;
}

// Linear-interpolation percentile, p in [0, 100]. Input need not be sorted.
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("percentile of empty sample");
  if (p < 0.0 || p > 100.0) throw ConfigError("percentile out of [0, 100]");
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(rank));
  auto hi = static_cast<std::size_t>(std::ceil(rank));
  double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw Error("mean of empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Standard error of the mean; 0 for a single observation.
inline double stderr_of(const std::vector<double>& xs) {
  if (xs.empty()) throw Error("stderr of empty sample");
  if (xs.size() == 1) return 0.0;
  double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  double var = ss / static_cast<double>(xs.size() - 1);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

// Shortest round-trip decimal form, used everywhere we emit numbers so report
// files are byte-stable across runs.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace pilot
