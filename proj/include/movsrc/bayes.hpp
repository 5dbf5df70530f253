#pragma once

// Bayesian refinement of the coarse path: approximation-error noise model,
// per-period posterior under the static-source forward operator, and the
// anchored Metropolis-Hastings chain with prior chaining across periods.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "movsrc/adsm.hpp"
#include "movsrc/config.hpp"
#include "movsrc/forward.hpp"

namespace movsrc {

// ---------------------------------------------------------------------------
// Gaussian approximation-error machinery
// ---------------------------------------------------------------------------

/// Joint normal of (zeta, q).
struct GaussianJoint {
  Eigen::VectorXd zeta_mean;
  Eigen::VectorXd q_mean;
  Eigen::MatrixXd zeta_zeta;
  Eigen::MatrixXd zeta_q;  // q_zeta is its transpose
  Eigen::MatrixXd q_q;

  /// Throws ConfigError unless shapes agree and the full covariance is
  /// symmetric positive semidefinite.
  void validate() const;
};

struct ConditionalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// zeta | q ~ N(zeta_* + S_zq S_qq^-1 (q - q_*), S_zz - S_zq S_qq^-1 S_qz).
/// Throws SingularityError when S_qq is not invertible.
ConditionalGaussian gaussian_condition(const GaussianJoint& joint, const Eigen::VectorXd& q);

/// w | q for w = e + zeta | q with e ~ N(e_mean, e_cov) independent of (zeta, q).
ConditionalGaussian approximation_error_noise(const Eigen::VectorXd& e_mean,
                                              const Eigen::MatrixXd& e_cov,
                                              const GaussianJoint& joint,
                                              const Eigen::VectorXd& q);

// ---------------------------------------------------------------------------
// Posterior
// ---------------------------------------------------------------------------

/// iid per-entry Gaussian noise w ~ N(w_mean, w_var). `flat` switches the
/// likelihood off (the w_var -> infinity limit).
struct NoiseModel {
  double w_mean = 1e-4;
  double w_var = 1e-3;
  bool flat = false;
};

class Prior {
 public:
  static Prior normal(const Point3& mean, const Eigen::Matrix3d& cov);
  static Prior isotropic(const Point3& mean, double variance);
  static Prior uniform_box(const Point3& lower, const Point3& upper);

  [[nodiscard]] PriorFamily family() const { return family_; }
  [[nodiscard]] const Point3& mean() const { return mean_; }
  /// Log density (normalized); -inf outside a uniform box.
  [[nodiscard]] double log_density(const Point3& q) const;

 private:
  Prior() = default;

  PriorFamily family_ = PriorFamily::normal;
  Point3 mean_;
  Eigen::Matrix3d precision_ = Eigen::Matrix3d::Identity();
  double log_norm_ = 0.0;
  Point3 lower_, upper_;
};

/// Box outside which the posterior is treated as zero; the sampling box
/// dilated by `margin`.
struct SupportBox {
  Point3 lower;
  Point3 upper;

  static SupportBox dilated(const SamplingGrid& grid, double margin = 1.0);
  [[nodiscard]] bool contains(const Point3& q) const;
};

/// F(q)_{l,n} = lambda(t_j^n - |x_l - q| / c) / (4 pi |x_l - q|), laid out
/// [l][n]. Throws SingularityError if q is at a sensor.
std::vector<double> approximate_forward(const FieldRecord& record, int j, const Point3& q);

/// Unnormalized log posterior of a static source position q on period j:
///   -1/2 sum_{l,n} (m_ln - F(q)_ln - w_mean)^2 / w_var + log prior(q),
/// and -inf outside the support box.
class PeriodPosterior {
 public:
  PeriodPosterior(const FieldRecord& record, int j, NoiseModel noise, Prior prior,
                  SupportBox support);

  [[nodiscard]] double log_likelihood(const Point3& q) const;
  [[nodiscard]] double operator()(const Point3& q) const;
  [[nodiscard]] const Prior& prior() const { return prior_; }

 private:
  const FieldRecord& record_;
  int j_;
  NoiseModel noise_;
  Prior prior_;
  SupportBox support_;
  std::vector<double> block_;  // m, [l][n]
};

double log_posterior(const Point3& q, const FieldRecord& record, int j, const NoiseModel& noise,
                     const Prior& prior, const SupportBox& support);

// ---------------------------------------------------------------------------
// Metropolis-Hastings
// ---------------------------------------------------------------------------

enum class ProposalKind {
  anchored_gaussian,  // beta y_j + (1 - beta) q_prev + sigma N(0, I3)
  uniform_box,        // independent uniform draws over a box
};

struct ChainOptions {
  int samples = 5000;
  double beta = 1.0;
  double sigma_prop = 0.1;
  std::uint64_t seed = 1;
  // Adds the proposal-density ratio for the anchored proposal, making the
  // chain target the posterior exactly. Off reproduces the plain ratio.
  bool corrected = false;
  ProposalKind proposal = ProposalKind::anchored_gaussian;
  SupportBox proposal_box{{-5, -5, -5}, {5, 5, 5}};
};

struct Chain {
  std::vector<Point3> samples;
  std::vector<double> log_post;
  std::vector<char> accepted;  // accepted[k]: sample k came from an accepted move
  int accept_count = 0;
  Point3 cm;

  [[nodiscard]] double acceptance_rate() const {
    return samples.size() > 1 ? static_cast<double>(accept_count) / (samples.size() - 1) : 0.0;
  }
};

using LogDensity = std::function<double(const Point3&)>;

/// q^(1) = start; K - 1 proposals accepted when min(1, exp(lp(q~) - lp(q^(k))))
/// exceeds a U(0,1) draw. beta is forced to 1 when q_prev is empty.
Chain mh_chain(const LogDensity& log_target, const Point3& start, const Point3& anchor_seed,
               const std::optional<Point3>& q_prev, const ChainOptions& options);

/// Convenience form on one period of a record.
Chain mh_chain(const FieldRecord& record, int j, const Point3& y_j,
               const std::optional<Point3>& q_prev, const Prior& prior, const NoiseModel& noise,
               const SupportBox& support, const ChainOptions& options);

struct RefinedPath {
  std::vector<std::vector<Point3>> tracks;        // per source, length J
  std::vector<std::vector<Chain>> chains;         // filled when keep_chains
  std::vector<std::vector<double>> acceptance;    // per source, per period
};

struct RefinementOptions {
  McmcOptions mcmc;
  SupportBox support{{-6, -6, -6}, {6, 6, 6}};
  std::uint64_t master_seed = 1;
  bool keep_chains = false;
  unsigned threads = 0;
};

/// Sequential per-period refinement of each coarse track: prior mean y_1 on
/// the first period and the previous conditional mean afterwards.
RefinedPath run_adsm_mcmc(const FieldRecord& record, const CoarsePath& coarse,
                          const RefinementOptions& options);

/// "j,source_id,x,y,z"
void write_refined_path(const RefinedPath& path, const std::filesystem::path& file);
/// "k,x,y,z,log_post,accepted"
void write_chain(const Chain& chain, const std::filesystem::path& file);

/// Batch-means standard error of the mean of `values`.
double batch_means_standard_error(std::span<const double> values, int batches = 50);

}  // namespace movsrc
