// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mwgnn/matrix.hpp"

/// Monte Carlo check of the concentration bound for one mean-aggregation
/// layer on a k-regular graph with random neighbor labels.
namespace mwgnn::theory {

/// Distribution of the per-node homophily level P.
struct HomophilyLaw {
  enum class Kind { kPoint, kBeta };
  Kind kind = Kind::kPoint;
  double mean = 0.5;
  double variance = 0.0;  // must be 0 for kPoint

  static HomophilyLaw point(double p) { return {Kind::kPoint, p, 0.0}; }
  /// Throws InvalidArgument unless 0 < variance < mean (1 - mean).
  static HomophilyLaw beta(double mean, double variance);

  double alpha() const;  // Beta shape parameters
  double beta_shape() const;
  double sample(std::mt19937_64& rng) const;
};

struct TheoremSetting {
  std::size_t k = 10;
  std::size_t d = 4;
  Vector class_mean[2];  // location of the untruncated normal per class
  double feature_sd = 0.5;
  double clip = 2.0;  // C_x: features are truncated to [-clip, clip]
  HomophilyLaw homophily;
  Matrix weight;  // d x d
  int ego_label = 0;
};

/// Throws InvalidArgument on shape mismatches, |mean| > clip, or a bad label.
void validate(const TheoremSetting& s);

/// k = 10, d = 4, class means +1 / -1, sd 0.5, clip 2, W = I, ego label 0,
/// P ~ Beta with mean 0.5 and the given variance (point mass when 0).
TheoremSetting canonical_setting(double homophily_variance);

/// Moments of N(mu, sd^2) truncated to [lo, hi]; sd = 0 is a point mass.
struct TruncatedMoments {
  double mean;
  double second_moment;
};
TruncatedMoments truncated_normal_moments(double mu, double sd, double lo, double hi);
double sample_truncated_normal(double mu, double sd, double lo, double hi, std::mt19937_64& rng);

/// Effective per-class mean vector of the (truncated) feature law.
Vector feature_mean(const TheoremSetting& s, int label);
/// Per-class coordinate-wise second moments.
Vector feature_second_moment(const TheoremSetting& s, int label);
/// Max |mean| and max second moment over both classes and all coordinates.
double mean_bound(const TheoremSetting& s);
double second_moment_bound(const TheoremSetting& s);

Vector sample_embedding(const TheoremSetting& s, std::mt19937_64& rng);
Vector expected_embedding(const TheoremSetting& s);

/// Largest singular value via power iteration on W^T W.
double spectral_norm(const Matrix& w, double tol = 1e-15, std::size_t max_iter = 100000);

struct BoundValue {
  double raw;
  double clamped;  // min(1, raw)
};
/// Throws InvalidArgument for t <= 0.
BoundValue analytic_bound(const TheoremSetting& s, double t);

struct GridPoint {
  double t = 0.0;
  double empirical = 0.0;
  double stderr_ = 0.0;
  double bound_raw = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct VerificationReport {
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<GridPoint> points;
  bool all_pass() const;
};

/// Draws `trials` embeddings (trials >= 1000) and tabulates
/// P(||h - E h|| >= t) per grid point. Trials are split into fixed blocks
/// with their own seed streams, so the result does not depend on `threads`.
VerificationReport verify_concentration(const TheoremSetting& s, const std::vector<double>& t_grid,
                                        std::size_t trials, std::uint64_t seed, std::size_t threads = 1);

struct BernsteinProbe {
  double empirical;
  double bound;
  double stderr_;
};
/// n i.i.d. variables uniform on [a, b] (a point mass when a == b);
/// compares P(mean - E mean >= t) with exp(-n t^2 / (2 sigma^2 + 2 t (b - a) / 3)),
/// sigma^2 = n * variance.
BernsteinProbe bernstein_probe(double a, double b, double variance, std::size_t n, double t, std::size_t trials,
                               std::uint64_t seed);

// JSON surface for the command-line tool.
struct VerifyRequest {
  TheoremSetting setting;
  std::vector<double> t_grid;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
};
VerifyRequest verify_request_from_json(std::string_view text);
std::string report_to_json(const VerifyRequest& req, const VerificationReport& r);
std::string report_to_csv(const VerificationReport& r);

}  // namespace mwgnn::theory
