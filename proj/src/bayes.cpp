#include "movsrc/bayes.hpp"

#include <fmt/format.h>

#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "movsrc/parallel.hpp"

namespace movsrc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::Vector3d to_eigen(const Point3& p) { return {p.x, p.y, p.z}; }

}  // namespace

// ---------------------------------------------------------------------------
// Gaussian conditioning
// ---------------------------------------------------------------------------

void GaussianJoint::validate() const {
  const auto nz = zeta_mean.size();
  const auto nq = q_mean.size();
  if (zeta_zeta.rows() != nz || zeta_zeta.cols() != nz || zeta_q.rows() != nz ||
      zeta_q.cols() != nq || q_q.rows() != nq || q_q.cols() != nq)
    throw ConfigError("gaussian joint: block shapes do not match the means");
  Eigen::MatrixXd full(nz + nq, nz + nq);
  full << zeta_zeta, zeta_q, zeta_q.transpose(), q_q;
  const double scale = std::max(1.0, full.cwiseAbs().maxCoeff());
  if ((full - full.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConfigError("gaussian joint: covariance is not symmetric");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(full, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
    throw ConfigError("gaussian joint: covariance is not positive semidefinite");
}

ConditionalGaussian gaussian_condition(const GaussianJoint& joint, const Eigen::VectorXd& q) {
  joint.validate();
  if (q.size() != joint.q_mean.size()) throw ConfigError("gaussian_condition: q has wrong size");
  const Eigen::LLT<Eigen::MatrixXd> llt(joint.q_q);
  const double scale = std::max(1.0, joint.q_q.cwiseAbs().maxCoeff());
  if (llt.info() != Eigen::Success ||
      llt.matrixL().toDenseMatrix().diagonal().minCoeff() < 1e-10 * std::sqrt(scale))
    throw SingularityError("gaussian_condition: Sigma_qq is singular");
  // gain = S_zq S_qq^-1, computed as (S_qq^-1 S_qz)^T
  const Eigen::MatrixXd gain = llt.solve(joint.zeta_q.transpose()).transpose();
  ConditionalGaussian out;
  out.mean = joint.zeta_mean + gain * (q - joint.q_mean);
  out.cov = joint.zeta_zeta - gain * joint.zeta_q.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

ConditionalGaussian approximation_error_noise(const Eigen::VectorXd& e_mean,
                                              const Eigen::MatrixXd& e_cov,
                                              const GaussianJoint& joint,
                                              const Eigen::VectorXd& q) {
  ConditionalGaussian zeta = gaussian_condition(joint, q);
  if (e_mean.size() != zeta.mean.size() || e_cov.rows() != zeta.cov.rows() ||
      e_cov.cols() != zeta.cov.cols())
    throw ConfigError("approximation_error_noise: noise shape does not match zeta");
  zeta.mean += e_mean;
  zeta.cov += e_cov;
  return zeta;
}

// ---------------------------------------------------------------------------
// Prior and posterior
// ---------------------------------------------------------------------------

Prior Prior::normal(const Point3& mean, const Eigen::Matrix3d& cov) {
  const Eigen::LLT<Eigen::Matrix3d> llt(cov);
  if (llt.info() != Eigen::Success || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ConfigError("normal prior covariance must be symmetric positive definite");
  Prior p;
  p.family_ = PriorFamily::normal;
  p.mean_ = mean;
  p.precision_ = llt.solve(Eigen::Matrix3d::Identity());
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  p.log_norm_ = -0.5 * (3.0 * std::log(2.0 * kPi) + log_det);
  return p;
}

Prior Prior::isotropic(const Point3& mean, double variance) {
  if (!(variance > 0.0)) throw ConfigError("prior variance must be positive");
  return normal(mean, variance * Eigen::Matrix3d::Identity());
}

Prior Prior::uniform_box(const Point3& lower, const Point3& upper) {
  if (!(lower.x < upper.x && lower.y < upper.y && lower.z < upper.z))
    throw ConfigError("uniform prior requires lower < upper");
  Prior p;
  p.family_ = PriorFamily::uniform_box;
  p.lower_ = lower;
  p.upper_ = upper;
  p.mean_ = (lower + upper) * 0.5;
  const Point3 w = upper - lower;
  p.log_norm_ = -std::log(w.x * w.y * w.z);
  return p;
}

double Prior::log_density(const Point3& q) const {
  if (family_ == PriorFamily::uniform_box) {
    const bool inside = q.x >= lower_.x && q.x <= upper_.x && q.y >= lower_.y &&
                        q.y <= upper_.y && q.z >= lower_.z && q.z <= upper_.z;
    return inside ? log_norm_ : kNegInf;
  }
  const Eigen::Vector3d d = to_eigen(q - mean_);
  return log_norm_ - 0.5 * d.dot(precision_ * d);
}

SupportBox SupportBox::dilated(const SamplingGrid& grid, double margin) {
  const Point3 m{margin, margin, margin};
  return {grid.lower() - m, grid.upper() + m};
}

bool SupportBox::contains(const Point3& q) const {
  return q.x >= lower.x && q.x <= upper.x && q.y >= lower.y && q.y <= upper.y &&
         q.z >= lower.z && q.z <= upper.z;
}

std::vector<double> approximate_forward(const FieldRecord& record, int j, const Point3& q) {
  const auto& time = record.time();
  const int np = time.samples_per_period();
  std::vector<double> out(record.rows() * static_cast<std::size_t>(np));
  for (std::size_t l = 0; l < record.rows(); ++l)
    for (int n = 1; n <= np; ++n)
      out[l * np + (n - 1)] =
          probe_field(record.sensors()[l], time.time(j, n), q, record.pulse(), record.wave_speed());
  return out;
}

PeriodPosterior::PeriodPosterior(const FieldRecord& record, int j, NoiseModel noise, Prior prior,
                                 SupportBox support)
    : record_(record), j_(j), noise_(noise), prior_(std::move(prior)), support_(support) {
  const int periods = record.time().periods();
  if (j < 1 || j > periods)
    throw ConfigError(fmt::format("period index {} outside 1..{}", j, periods));
  if (!noise.flat && !(noise.w_var > 0.0)) throw ConfigError("noise variance must be positive");
  const int np = record.time().samples_per_period();
  block_.resize(record.rows() * static_cast<std::size_t>(np));
  for (std::size_t l = 0; l < record.rows(); ++l)
    for (int n = 1; n <= np; ++n) block_[l * np + (n - 1)] = record.at(l, j, n);
}

double PeriodPosterior::log_likelihood(const Point3& q) const {
  if (noise_.flat) return 0.0;
  const auto f = approximate_forward(record_, j_, q);
  double sq = 0.0;
  for (std::size_t e = 0; e < f.size(); ++e) {
    const double r = block_[e] - f[e] - noise_.w_mean;
    sq += r * r;
  }
  return -0.5 * sq / noise_.w_var;
}

double PeriodPosterior::operator()(const Point3& q) const {
  if (!support_.contains(q)) return kNegInf;
  const double lp = prior_.log_density(q);
  if (lp == kNegInf) return kNegInf;
  return log_likelihood(q) + lp;
}

double log_posterior(const Point3& q, const FieldRecord& record, int j, const NoiseModel& noise,
                     const Prior& prior, const SupportBox& support) {
  return PeriodPosterior(record, j, noise, prior, support)(q);
}

// ---------------------------------------------------------------------------
// Metropolis-Hastings
// ---------------------------------------------------------------------------

Chain mh_chain(const LogDensity& log_target, const Point3& start, const Point3& anchor_seed,
               const std::optional<Point3>& q_prev, const ChainOptions& options) {
  if (options.samples < 1) throw ConfigError("chain length K must be >= 1");
  if (!(options.sigma_prop > 0.0)) throw ConfigError("proposal sigma must be positive");
  if (!(options.beta >= 0.0 && options.beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");

  const double beta = q_prev ? options.beta : 1.0;
  const Point3 anchor = q_prev ? anchor_seed * beta + *q_prev * (1.0 - beta) : anchor_seed;
  const double inv_two_var = 0.5 / (options.sigma_prop * options.sigma_prop);
  auto log_proposal = [&](const Point3& q) {
    const Point3 d = q - anchor;
    return -dot(d, d) * inv_two_var;
  };

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& box = options.proposal_box;
  std::uniform_real_distribution<double> ux(box.lower.x, box.upper.x);
  std::uniform_real_distribution<double> uy(box.lower.y, box.upper.y);
  std::uniform_real_distribution<double> uz(box.lower.z, box.upper.z);

  const auto K = static_cast<std::size_t>(options.samples);
  Chain chain;
  chain.samples.reserve(K);
  chain.log_post.reserve(K);
  chain.accepted.reserve(K);

  Point3 current = start;
  double current_lp = log_target(current);
  chain.samples.push_back(current);
  chain.log_post.push_back(current_lp);
  chain.accepted.push_back(0);

  for (std::size_t k = 1; k < K; ++k) {
    Point3 proposal;
    if (options.proposal == ProposalKind::anchored_gaussian) {
      const double ex = normal(rng);
      const double ey = normal(rng);
      const double ez = normal(rng);
      proposal = anchor + Point3{ex, ey, ez} * options.sigma_prop;
    } else {
      const double px = ux(rng);
      const double py = uy(rng);
      const double pz = uz(rng);
      proposal = {px, py, pz};
    }
    const double draw = unit(rng);
    const double proposal_lp = log_target(proposal);

    bool accept = false;
    if (proposal_lp != kNegInf) {
      if (current_lp == kNegInf) {
        accept = true;
      } else {
        double log_ratio = proposal_lp - current_lp;
        if (options.corrected && options.proposal == ProposalKind::anchored_gaussian)
          log_ratio += log_proposal(current) - log_proposal(proposal);
        const double alpha = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
        accept = alpha > draw;
      }
    }
    if (accept) {
      current = proposal;
      current_lp = proposal_lp;
      ++chain.accept_count;
    }
    chain.samples.push_back(current);
    chain.log_post.push_back(current_lp);
    chain.accepted.push_back(accept ? 1 : 0);
  }

  Point3 sum;
  for (const Point3& s : chain.samples) sum += s;
  chain.cm = sum * (1.0 / static_cast<double>(K));
  return chain;
}

Chain mh_chain(const FieldRecord& record, int j, const Point3& y_j,
               const std::optional<Point3>& q_prev, const Prior& prior, const NoiseModel& noise,
               const SupportBox& support, const ChainOptions& options) {
  const PeriodPosterior posterior(record, j, noise, prior, support);
  return mh_chain([&](const Point3& q) { return posterior(q); }, y_j, y_j, q_prev, options);
}

RefinedPath run_adsm_mcmc(const FieldRecord& record, const CoarsePath& coarse,
                          const RefinementOptions& options) {
  const int periods = record.time().periods();
  if (coarse.periods() != periods)
    throw ConfigError(fmt::format("coarse path has {} periods, record has {}", coarse.periods(),
                                  periods));
  const auto& m = options.mcmc;
  const NoiseModel noise{m.w_mean, m.w_var, false};
  const std::size_t sources = coarse.tracks.size();

  RefinedPath out;
  out.tracks.assign(sources, {});
  out.acceptance.assign(sources, {});
  out.chains.assign(sources, {});

  parallel_for(sources, options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const auto& track = coarse.tracks[s];
      if (static_cast<int>(track.size()) != periods)
        throw ConfigError(fmt::format("coarse track {} has wrong length", s));
      std::optional<Point3> previous;
      for (int j = 1; j <= periods; ++j) {
        const Point3 y_j = track[static_cast<std::size_t>(j - 1)].position;
        ChainOptions co;
        co.samples = m.samples;
        co.beta = m.beta;
        co.sigma_prop = m.sigma_prop;
        co.corrected = m.corrected;
        co.seed = derive_seed(options.master_seed, 1 + s, static_cast<std::uint64_t>(j));

        Chain chain;
        if (m.seed_from_adsm) {
          const Prior prior = Prior::isotropic(previous ? *previous : track.front().position,
                                               m.prior_var);
          chain = mh_chain(record, j, y_j, previous, prior, noise, options.support, co);
        } else {
          // Uninformed comparator: uniform prior and uniform proposals over the box.
          co.proposal = ProposalKind::uniform_box;
          co.proposal_box = options.support;
          const Prior prior = Prior::uniform_box(options.support.lower, options.support.upper);
          std::mt19937_64 start_rng(
              derive_seed(options.master_seed, 1001 + s, static_cast<std::uint64_t>(j)));
          const auto& b = options.support;
          std::uniform_real_distribution<double> ux(b.lower.x, b.upper.x);
          std::uniform_real_distribution<double> uy(b.lower.y, b.upper.y);
          std::uniform_real_distribution<double> uz(b.lower.z, b.upper.z);
          const double sx = ux(start_rng);
          const double sy = uy(start_rng);
          const double sz = uz(start_rng);
          const Point3 start{sx, sy, sz};
          const PeriodPosterior posterior(record, j, noise, prior, options.support);
          chain = mh_chain([&](const Point3& q) { return posterior(q); }, start, start,
                           std::nullopt, co);
        }
        previous = chain.cm;
        out.tracks[s].push_back(chain.cm);
        out.acceptance[s].push_back(chain.acceptance_rate());
        if (options.keep_chains) out.chains[s].push_back(std::move(chain));
      }
    }
  });
  return out;
}

void write_refined_path(const RefinedPath& path, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
  out << "j,source_id,x,y,z\n";
  const std::size_t periods = path.tracks.empty() ? 0 : path.tracks.front().size();
  for (std::size_t j = 0; j < periods; ++j)
    for (std::size_t s = 0; s < path.tracks.size(); ++s) {
      const Point3& q = path.tracks[s][j];
      out << fmt::format("{},{},{},{},{}\n", j + 1, s, format_double(q.x), format_double(q.y),
                         format_double(q.z));
    }
}

void write_chain(const Chain& chain, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
  out << "k,x,y,z,log_post,accepted\n";
  for (std::size_t k = 0; k < chain.samples.size(); ++k) {
    const Point3& q = chain.samples[k];
    out << fmt::format("{},{},{},{},{},{}\n", k + 1, format_double(q.x), format_double(q.y),
                       format_double(q.z), format_double(chain.log_post[k]),
                       static_cast<int>(chain.accepted[k]));
  }
}

double batch_means_standard_error(std::span<const double> values, int batches) {
  if (batches < 2 || values.size() < static_cast<std::size_t>(batches))
    throw ConfigError("batch means needs at least `batches` values and >= 2 batches");
  const std::size_t size = values.size() / static_cast<std::size_t>(batches);
  std::vector<double> means(static_cast<std::size_t>(batches));
  for (int b = 0; b < batches; ++b) {
    const auto first = values.begin() + static_cast<std::ptrdiff_t>(b * size);
    means[static_cast<std::size_t>(b)] =
        std::accumulate(first, first + static_cast<std::ptrdiff_t>(size), 0.0) / size;
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / batches;
  double ss = 0.0;
  for (double mu : means) ss += (mu - grand) * (mu - grand);
  return std::sqrt(ss / (batches - 1) / batches);
}

}  // namespace movsrc
