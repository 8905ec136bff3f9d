// SPDX-License-Identifier: Apache-2.0
#include "mwgnn/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mwgnn/error.hpp"

namespace mwgnn::theory {

namespace {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

constexpr std::size_t kBlockTrials = 1024;

std::mt19937_64 block_rng(std::uint64_t seed, std::size_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), 0x7468u};
  return std::mt19937_64(seq);
}

}  // namespace

HomophilyLaw HomophilyLaw::beta(double mean, double variance) {
  if (!(mean > 0.0 && mean < 1.0)) throw InvalidArgument("homophily: Beta mean must lie in (0,1)");
  if (!(variance > 0.0 && variance < mean * (1.0 - mean))) {
    throw InvalidArgument("homophily: Beta variance must lie in (0, mean (1 - mean))");
  }
  return {Kind::kBeta, mean, variance};
}

double HomophilyLaw::alpha() const { return mean * (mean * (1.0 - mean) / variance - 1.0); }
double HomophilyLaw::beta_shape() const { return (1.0 - mean) * (mean * (1.0 - mean) / variance - 1.0); }

double HomophilyLaw::sample(std::mt19937_64& rng) const {
  if (kind == Kind::kPoint) return mean;
  std::gamma_distribution<double> ga(alpha(), 1.0);
  std::gamma_distribution<double> gb(beta_shape(), 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

void validate(const TheoremSetting& s) {
  if (s.k == 0 || s.d == 0) throw InvalidArgument("setting: k and d must be positive");
  for (int c = 0; c < 2; ++c) {
    if (s.class_mean[c].size() != static_cast<Eigen::Index>(s.d)) {
      throw InvalidArgument("setting: class mean " + std::to_string(c) + " must have d entries");
    }
    if ((s.class_mean[c].array().abs() > s.clip).any()) {
      throw InvalidArgument("setting: class means must lie inside [-clip, clip]");
    }
  }
  if (!(s.clip > 0.0) || !(s.feature_sd >= 0.0)) throw InvalidArgument("setting: need clip > 0 and sd >= 0");
  if (s.weight.rows() != static_cast<Eigen::Index>(s.d) || s.weight.cols() != static_cast<Eigen::Index>(s.d)) {
    throw InvalidArgument("setting: W must be d x d");
  }
  if (s.ego_label != 0 && s.ego_label != 1) throw InvalidArgument("setting: ego label must be 0 or 1");
  const auto& h = s.homophily;
  if (!(h.mean >= 0.0 && h.mean <= 1.0)) throw InvalidArgument("setting: homophily mean must lie in [0,1]");
  if (h.kind == HomophilyLaw::Kind::kPoint && h.variance != 0.0) {
    throw InvalidArgument("setting: point-mass homophily has zero variance");
  }
  if (h.kind == HomophilyLaw::Kind::kBeta) HomophilyLaw::beta(h.mean, h.variance);
}

TheoremSetting canonical_setting(double homophily_variance) {
  TheoremSetting s;
  s.k = 10;
  s.d = 4;
  s.class_mean[0] = Vector::Constant(4, 1.0);
  s.class_mean[1] = Vector::Constant(4, -1.0);
  s.feature_sd = 0.5;
  s.clip = 2.0;
  s.homophily = homophily_variance > 0.0 ? HomophilyLaw::beta(0.5, homophily_variance) : HomophilyLaw::point(0.5);
  s.weight = Matrix::Identity(4, 4);
  s.ego_label = 0;
  return s;
}

TruncatedMoments truncated_normal_moments(double mu, double sd, double lo, double hi) {
  if (sd == 0.0) {
    const double x = std::clamp(mu, lo, hi);
    return {x, x * x};
  }
  const double a = (lo - mu) / sd;
  const double b = (hi - mu) / sd;
  const double z = normal_cdf(b) - normal_cdf(a);
  if (!(z > 1e-12)) throw InvalidArgument("truncated normal: negligible mass inside the interval");
  const double shift = (normal_pdf(a) - normal_pdf(b)) / z;
  const double mean = mu + sd * shift;
  const double var = sd * sd * (1.0 + (a * normal_pdf(a) - b * normal_pdf(b)) / z - shift * shift);
  return {mean, var + mean * mean};
}

double sample_truncated_normal(double mu, double sd, double lo, double hi, std::mt19937_64& rng) {
  if (sd == 0.0) return std::clamp(mu, lo, hi);
  std::normal_distribution<double> nd(mu, sd);
  for (;;) {
    const double x = nd(rng);
    if (x >= lo && x <= hi) return x;
  }
}

Vector feature_mean(const TheoremSetting& s, int label) {
  const Vector& mu = s.class_mean[label];
  Vector out(mu.size());
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    out(j) = truncated_normal_moments(mu(j), s.feature_sd, -s.clip, s.clip).mean;
  }
  return out;
}

Vector feature_second_moment(const TheoremSetting& s, int label) {
  const Vector& mu = s.class_mean[label];
  Vector out(mu.size());
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    out(j) = truncated_normal_moments(mu(j), s.feature_sd, -s.clip, s.clip).second_moment;
  }
  return out;
}

double mean_bound(const TheoremSetting& s) {
  return std::max(feature_mean(s, 0).cwiseAbs().maxCoeff(), feature_mean(s, 1).cwiseAbs().maxCoeff());
}

double second_moment_bound(const TheoremSetting& s) {
  return std::max(feature_second_moment(s, 0).maxCoeff(), feature_second_moment(s, 1).maxCoeff());
}

Vector sample_embedding(const TheoremSetting& s, std::mt19937_64& rng) {
  const double p = s.homophily.sample(rng);
  std::bernoulli_distribution same(p);
  const auto d = static_cast<Eigen::Index>(s.d);
  Vector total = Vector::Zero(d);
  auto draw = [&](int label) {
    for (Eigen::Index j = 0; j < d; ++j) {
      total(j) += sample_truncated_normal(s.class_mean[label](j), s.feature_sd, -s.clip, s.clip, rng);
    }
  };
  draw(s.ego_label);
  for (std::size_t n = 0; n < s.k; ++n) draw(same(rng) ? s.ego_label : 1 - s.ego_label);
  return s.weight * total / static_cast<double>(s.k + 1);
}

Vector expected_embedding(const TheoremSetting& s) {
  const double kk = static_cast<double>(s.k);
  const double ep = s.homophily.mean;
  const Vector own = feature_mean(s, s.ego_label);
  const Vector other = feature_mean(s, 1 - s.ego_label);
  return s.weight * (own / (kk + 1.0) + (kk / (kk + 1.0)) * (ep * own + (1.0 - ep) * other));
}

double spectral_norm(const Matrix& w, double tol, std::size_t max_iter) {
  if (w.size() == 0) return 0.0;
  const Matrix gram = w.transpose() * w;
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Vector v(gram.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = u(rng);
  v.normalize();
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector next = gram * v;
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    next /= norm;
    const double updated = next.dot(gram * next);
    const bool done = std::abs(updated - lambda) <= tol * std::max(1.0, updated) && (next - v).norm() < 1e-12;
    v = next;
    lambda = updated;
    if (done) break;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

BoundValue analytic_bound(const TheoremSetting& s, double t) {
  if (!(t > 0.0)) throw InvalidArgument("analytic_bound: t must be positive");
  const double rho = spectral_norm(s.weight);
  if (rho == 0.0) return {0.0, 0.0};
  const double k = static_cast<double>(s.k);
  const double d = static_cast<double>(s.d);
  const double c_mu = mean_bound(s);
  const double c_tau = second_moment_bound(s);
  const double sigma2 = 4.0 * k * c_mu * c_mu * s.homophily.variance + k * c_tau;
  const double a = (k + 1.0) * t / rho + std::sqrt(d) * s.clip + std::sqrt(d) * c_mu;
  const double denom = 2.0 * k * d * sigma2 + (4.0 / 3.0) * std::sqrt(d) * s.clip * a;
  const double raw = 2.0 * d * std::exp(-a * a / denom);
  return {raw, std::min(1.0, raw)};
}

bool VerificationReport::all_pass() const {
  return std::all_of(points.begin(), points.end(), [](const GridPoint& p) { return p.pass; });
}

VerificationReport verify_concentration(const TheoremSetting& s, const std::vector<double>& t_grid,
                                        std::size_t trials, std::uint64_t seed, std::size_t threads) {
  validate(s);
  if (trials < 1000) throw InvalidArgument("verify_concentration: need at least 1000 trials");
  if (t_grid.empty()) throw InvalidArgument("verify_concentration: empty t grid");
  for (double t : t_grid) {
    if (!(t > 0.0)) throw InvalidArgument("verify_concentration: grid values must be positive");
  }
  const Vector center = expected_embedding(s);
  const std::size_t blocks = (trials + kBlockTrials - 1) / kBlockTrials;
  std::vector<std::vector<std::size_t>> tallies(blocks, std::vector<std::size_t>(t_grid.size(), 0));

  auto run_block = [&](std::size_t b) {
    auto rng = block_rng(seed, b);
    const std::size_t end = std::min(trials, (b + 1) * kBlockTrials);
    for (std::size_t i = b * kBlockTrials; i < end; ++i) {
      const double dev = (sample_embedding(s, rng) - center).norm();
      for (std::size_t g = 0; g < t_grid.size(); ++g) {
        if (dev >= t_grid[g]) ++tallies[b][g];
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, blocks);
  if (workers == 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < blocks; b += workers) run_block(b);
      });
    }
  }

  VerificationReport r;
  r.trials = trials;
  r.seed = seed;
  const double n = static_cast<double>(trials);
  for (std::size_t g = 0; g < t_grid.size(); ++g) {
    std::size_t hits = 0;
    for (const auto& block : tallies) hits += block[g];
    GridPoint p;
    p.t = t_grid[g];
    p.empirical = static_cast<double>(hits) / n;
    p.stderr_ = std::sqrt(p.empirical * (1.0 - p.empirical) / n);
    const auto bound = analytic_bound(s, p.t);
    p.bound_raw = bound.raw;
    p.bound = bound.clamped;
    p.pass = p.empirical <= p.bound + 3.0 * p.stderr_;
    r.points.push_back(p);
  }
  return r;
}

BernsteinProbe bernstein_probe(double a, double b, double variance, std::size_t n, double t, std::size_t trials,
                               std::uint64_t seed) {
  if (!(a <= b)) throw InvalidArgument("bernstein_probe: need a <= b");
  if (!(t > 0.0)) throw InvalidArgument("bernstein_probe: t must be positive");
  if (n == 0 || trials == 0) throw InvalidArgument("bernstein_probe: n and trials must be positive");
  if (!(variance >= 0.0)) throw InvalidArgument("bernstein_probe: variance must be >= 0");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(a, b);
  const double center = 0.5 * (a + b);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += a == b ? a : u(rng);
    if (total / static_cast<double>(n) - center >= t) ++hits;
  }
  const double nn = static_cast<double>(n);
  const double sigma2 = nn * variance;
  BernsteinProbe out;
  out.empirical = static_cast<double>(hits) / static_cast<double>(trials);
  out.stderr_ = std::sqrt(out.empirical * (1.0 - out.empirical) / static_cast<double>(trials));
  out.bound = std::exp(-nn * t * t / (2.0 * sigma2 + 2.0 * t * (b - a) / 3.0));
  return out;
}

// ---------------------------------------------------------------- JSON

VerifyRequest verify_request_from_json(std::string_view text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("setting JSON: ") + e.what());
  }
  try {
    VerifyRequest req;
    TheoremSetting& s = req.setting;
    s.k = j.at("k").get<std::size_t>();
    s.d = j.at("d").get<std::size_t>();
    const auto& means = j.at("class_means");
    if (!means.is_array() || means.size() != 2) throw InvalidArgument("setting JSON: class_means needs two rows");
    for (int c = 0; c < 2; ++c) {
      const auto row = means[static_cast<std::size_t>(c)].get<std::vector<double>>();
      s.class_mean[c] = Eigen::Map<const Vector>(row.data(), static_cast<Eigen::Index>(row.size()));
    }
    s.feature_sd = j.value("feature_sd", 0.5);
    s.clip = j.value("clip", 2.0);
    s.ego_label = j.value("ego_label", 0);
    const auto& h = j.at("homophily");
    const auto kind = h.value("kind", std::string("point"));
    if (kind == "point") {
      s.homophily = HomophilyLaw::point(h.at("mean").get<double>());
    } else if (kind == "beta") {
      s.homophily = HomophilyLaw::beta(h.at("mean").get<double>(), h.at("variance").get<double>());
    } else {
      throw InvalidArgument("setting JSON: homophily kind must be point or beta");
    }
    if (j.contains("weight")) {
      const auto rows = j.at("weight").get<std::vector<std::vector<double>>>();
      s.weight.resize(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw InvalidArgument("setting JSON: ragged weight matrix");
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
          s.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
      }
    } else {
      s.weight = Matrix::Identity(static_cast<Eigen::Index>(s.d), static_cast<Eigen::Index>(s.d));
    }
    req.t_grid = j.at("t_grid").get<std::vector<double>>();
    req.trials = j.value("trials", std::size_t{10000});
    req.seed = j.value("seed", std::uint64_t{0});
    validate(s);
    return req;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("setting JSON: ") + e.what());
  }
}

std::string report_to_json(const VerifyRequest& req, const VerificationReport& r) {
  using nlohmann::json;
  const auto& s = req.setting;
  json setting;
  setting["k"] = s.k;
  setting["d"] = s.d;
  setting["class_means"] = {std::vector<double>(s.class_mean[0].data(), s.class_mean[0].data() + s.class_mean[0].size()),
                            std::vector<double>(s.class_mean[1].data(), s.class_mean[1].data() + s.class_mean[1].size())};
  setting["feature_sd"] = s.feature_sd;
  setting["clip"] = s.clip;
  setting["ego_label"] = s.ego_label;
  setting["homophily"] = {{"kind", s.homophily.kind == HomophilyLaw::Kind::kBeta ? "beta" : "point"},
                          {"mean", s.homophily.mean},
                          {"variance", s.homophily.variance}};
  json w = json::array();
  for (Eigen::Index i = 0; i < s.weight.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(s.weight.cols()));
    for (Eigen::Index c = 0; c < s.weight.cols(); ++c) row[static_cast<std::size_t>(c)] = s.weight(i, c);
    w.push_back(row);
  }
  setting["weight"] = w;
  setting["t_grid"] = req.t_grid;
  setting["trials"] = req.trials;
  setting["seed"] = req.seed;

  json pts = json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"t", p.t},
                   {"empirical", p.empirical},
                   {"stderr", p.stderr_},
                   {"bound_raw", p.bound_raw},
                   {"bound", p.bound},
                   {"pass", p.pass}});
  }
  json out;
  out["config"] = setting;
  out["constants"] = {{"rho", spectral_norm(s.weight)},
                      {"c_mu", mean_bound(s)},
                      {"c_tau", second_moment_bound(s)},
                      {"var_p", s.homophily.variance}};
  out["bound_form"] = "a single deviation threshold t is used throughout the exponent";
  out["points"] = pts;
  out["all_pass"] = r.all_pass();
  return out.dump(2) + "\n";
}

std::string report_to_csv(const VerificationReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << "t,empirical,stderr,bound_raw,bound,pass\n";
  for (const auto& p : r.points) {
    os << p.t << ',' << p.empirical << ',' << p.stderr_ << ',' << p.bound_raw << ',' << p.bound << ','
       << (p.pass ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace mwgnn::theory
