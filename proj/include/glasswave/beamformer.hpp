// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fixed beamformer design: delay-and-sum, MVDR and the non-linearly
// constrained minimum variance (NLCMV) design, plus K+1 channel banks,
// beam patterns and white-noise gain.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "glasswave/core.hpp"
#include "glasswave/geometry.hpp"

namespace glasswave {

enum class Designer { das, mvdr, nlcmv, refined };

inline std::string_view to_string(Designer d) {
  switch (d) {
    case Designer::das: return "das";
    case Designer::mvdr: return "mvdr";
    case Designer::nlcmv: return "nlcmv";
    case Designer::refined: return "refined";
  }
  return "unknown";
}

inline Designer designer_from_string(std::string_view name) {
  if (name == "das") return Designer::das;
  if (name == "mvdr") return Designer::mvdr;
  if (name == "nlcmv") return Designer::nlcmv;
  if (name == "refined") return Designer::refined;
  throw Error(ErrorKind::invalid_input, "beamformer-design", "unknown designer '" + std::string(name) + "'");
}

/// h(jw) per retained bin; column k is the M-vector at bin k.
struct BeamformerWeights {
  Eigen::MatrixXcd h;
  SourceDescriptor steer;
  Designer designer = Designer::das;

  std::size_t mics() const noexcept { return static_cast<std::size_t>(h.rows()); }
  std::size_t bins() const noexcept { return static_cast<std::size_t>(h.cols()); }
  Eigen::VectorXcd at(std::size_t k) const { return h.col(static_cast<Eigen::Index>(k)); }
};

inline constexpr double kDefaultLoading = 1e-6;
inline constexpr double kBeamPatternFloorDb = -80.0;

namespace detail {

inline void require_finite(const Eigen::MatrixXcd& h, std::string_view module, std::string_view what) {
  if (!h.allFinite()) throw Error(ErrorKind::numerical_failure, std::string(module), std::string(what) + " is not finite");
}

// Phi + loading * trace(Phi)/M * I
inline Eigen::MatrixXcd loaded(const Eigen::MatrixXcd& phi, double loading) {
  const double scale = phi.trace().real() / static_cast<double>(phi.rows());
  return phi + Eigen::MatrixXcd::Identity(phi.rows(), phi.cols()) * (loading * scale);
}

// Solves B x = g for Hermitian positive-definite B, then scales x so that
// x^H g = 1.
inline Eigen::VectorXcd distortionless_solve(const Eigen::MatrixXcd& b, const Eigen::VectorXcd& g,
                                             std::string_view module, std::size_t bin) {
  Eigen::LLT<Eigen::MatrixXcd> llt(b);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::numerical_failure, std::string(module),
                "matrix at bin " + std::to_string(bin) + " is not positive definite after loading");
  }
  Eigen::VectorXcd x = llt.solve(g);
  const cdouble s = g.dot(x);  // g^H B^{-1} g, real and positive
  if (!(std::abs(s) > 0.0) || !std::isfinite(std::abs(s))) {
    throw Error(ErrorKind::numerical_failure, std::string(module),
                "degenerate normalization at bin " + std::to_string(bin));
  }
  x /= s;
  return x;
}

}  // namespace detail

inline BeamformerWeights design_das(const ChannelResponse& target) {
  BeamformerWeights w{Eigen::MatrixXcd(target.g.rows(), target.g.cols()), target.source, Designer::das};
  for (Eigen::Index k = 0; k < target.g.cols(); ++k) {
    const double energy = target.g.col(k).squaredNorm();
    if (!(energy > 0.0)) {
      throw Error(ErrorKind::invalid_input, "beamformer-design", "zero response vector at bin " + std::to_string(k));
    }
    w.h.col(k) = target.g.col(k) / energy;
  }
  detail::require_finite(w.h, "beamformer-design", "delay-and-sum weights");
  return w;
}

inline BeamformerWeights design_mvdr(const ChannelResponse& target, const CovarianceMatrix& noise_cov,
                                     double loading = kDefaultLoading) {
  if (!(loading >= 0.0)) throw Error(ErrorKind::invalid_input, "beamformer-design", "loading must be >= 0");
  if (noise_cov.bins() != target.bins()) {
    throw Error(ErrorKind::shape_mismatch, "beamformer-design", "noise covariance and response bin counts differ");
  }
  BeamformerWeights w{Eigen::MatrixXcd(target.g.rows(), target.g.cols()), target.source, Designer::mvdr};
  for (std::size_t k = 0; k < target.bins(); ++k) {
    const auto& phi = noise_cov.at(k);
    if (phi.rows() != target.g.rows() || phi.cols() != target.g.rows()) {
      throw Error(ErrorKind::shape_mismatch, "beamformer-design", "covariance size does not match mic count");
    }
    w.h.col(static_cast<Eigen::Index>(k)) =
        detail::distortionless_solve(detail::loaded(phi, loading), target.at(k), "beamformer-design", k);
  }
  detail::require_finite(w.h, "beamformer-design", "MVDR weights");
  return w;
}

struct PointNoiseSource {
  ChannelResponse response;  // g_n(jw)
  double weight = 1.0;       // alpha_n
};

struct NlcmvProblem {
  ChannelResponse target;                    // g(jw), entries G_m(jw)
  CovarianceMatrix diffuse;                  // Phi_dd(jw)
  std::vector<PointNoiseSource> point_sources;
  std::vector<double> point_psd;             // phi_pp(w) per bin; empty means 1

  std::size_t mics() const noexcept { return target.mics(); }
  std::size_t bins() const noexcept { return target.bins(); }

  double psd(std::size_t k) const { return point_psd.empty() ? 1.0 : point_psd.at(k); }

  void validate() const {
    if (target.g.rows() < 1 || target.g.cols() < 1) {
      throw Error(ErrorKind::invalid_input, "beamformer-design", "empty target response");
    }
    if (diffuse.bins() != bins()) {
      throw Error(ErrorKind::shape_mismatch, "beamformer-design", "diffuse covariance bin count differs from target");
    }
    for (const auto& phi : diffuse.per_bin) {
      if (phi.rows() != target.g.rows() || phi.cols() != target.g.rows()) {
        throw Error(ErrorKind::shape_mismatch, "beamformer-design", "diffuse covariance size differs from mic count");
      }
    }
    if (!point_psd.empty() && point_psd.size() != bins()) {
      throw Error(ErrorKind::shape_mismatch, "beamformer-design", "point PSD needs one value per bin");
    }
    for (double v : point_psd) {
      if (!(v >= 0.0)) throw Error(ErrorKind::invalid_input, "beamformer-design", "point PSD must be nonnegative");
    }
    for (const auto& src : point_sources) {
      if (!(src.weight >= 0.0)) {
        throw Error(ErrorKind::invalid_input, "beamformer-design", "point-noise weights must be nonnegative");
      }
      if (src.response.g.rows() != target.g.rows() || src.response.g.cols() != target.g.cols()) {
        throw Error(ErrorKind::shape_mismatch, "beamformer-design", "point-noise response shape differs from target");
      }
    }
  }
};

/// A = Phi_dd + phi_pp * sum_n alpha_n g_n g_n^H at one bin.
inline Eigen::MatrixXcd nlcmv_objective_matrix(const NlcmvProblem& problem, std::size_t k) {
  Eigen::MatrixXcd a = problem.diffuse.at(k);
  const double psd = problem.psd(k);
  for (const auto& src : problem.point_sources) {
    const Eigen::VectorXcd gn = src.response.at(k);
    a += (psd * src.weight) * (gn * gn.adjoint());
  }
  return a;
}

/// Psi = I - g g^H * M / sum_m |G_m|^2
inline Eigen::MatrixXcd wng_constraint_matrix(const Eigen::VectorXcd& g) {
  const auto m = g.size();
  return Eigen::MatrixXcd::Identity(m, m) - (g * g.adjoint()) * (static_cast<double>(m) / g.squaredNorm());
}

/// c = h^H Psi h, evaluated without forming Psi.
inline double wng_constraint_value(const Eigen::VectorXcd& h, const Eigen::VectorXcd& g) {
  return h.squaredNorm() - static_cast<double>(g.size()) * std::norm(g.dot(h)) / g.squaredNorm();
}

struct NlcmvSolverConfig {
  int max_bisection_steps = 200;
  double tol = 1e-10;        // accepted constraint value c(w)
  double loading = kDefaultLoading;
  double max_lambda = 1e14;  // relative to trace(A)/M
};

struct NlcmvSolution {
  BeamformerWeights weights;
  std::vector<double> objective;   // h^H A h per bin
  std::vector<double> constraint;  // c(w) per bin
  std::vector<double> lambda;      // multiplier per bin
};

/// Minimizes h^H A h subject to h^H g = 1 and h^H Psi h <= 0, one bin at a
/// time, by bisection on the multiplier of the quadratic constraint.
///
/// On the distortionless set h^H Psi h = ||h||^2 - M/||g||^2, so the
/// Lagrangian minimizer (A + lambda Psi)^{-1} g (normalized) points along
/// (A + lambda I)^{-1} g; the latter is solved because it stays positive
/// definite for every lambda >= 0. ||h(lambda)||^2 decreases monotonically
/// toward the delay-and-sum norm 1/||g||^2, which always satisfies the
/// constraint when M >= 1.
inline NlcmvSolution design_nlcmv(const NlcmvProblem& problem, const NlcmvSolverConfig& solver = {}) {
  problem.validate();
  if (solver.max_bisection_steps < 1 || !(solver.tol >= 0.0) || !(solver.loading >= 0.0)) {
    throw Error(ErrorKind::invalid_input, "beamformer-design", "invalid NLCMV solver configuration");
  }
  const auto m_count = static_cast<Eigen::Index>(problem.mics());
  const std::size_t bins = problem.bins();

  NlcmvSolution out{{Eigen::MatrixXcd(m_count, static_cast<Eigen::Index>(bins)), problem.target.source, Designer::nlcmv},
                    std::vector<double>(bins),
                    std::vector<double>(bins),
                    std::vector<double>(bins)};

  for (std::size_t k = 0; k < bins; ++k) {
    const Eigen::VectorXcd g = problem.target.at(k);
    if (!(g.squaredNorm() > 0.0)) {
      throw Error(ErrorKind::invalid_input, "beamformer-design", "zero target response at bin " + std::to_string(k));
    }
    const Eigen::MatrixXcd a = nlcmv_objective_matrix(problem, k);
    const Eigen::MatrixXcd a_loaded = detail::loaded(a, solver.loading);
    const Eigen::MatrixXcd identity = Eigen::MatrixXcd::Identity(m_count, m_count);

    auto solve = [&](double lambda) {
      return detail::distortionless_solve(a_loaded + lambda * identity, g, "beamformer-design", k);
    };

    double lambda = 0.0;
    Eigen::VectorXcd h = solve(0.0);
    double c = wng_constraint_value(h, g);

    if (c > solver.tol) {
      const double scale = std::max(a_loaded.trace().real() / static_cast<double>(m_count),
                                    std::numeric_limits<double>::min());
      const double limit = solver.max_lambda * scale;
      double lo = 0.0;
      double hi = std::min(scale, limit);
      Eigen::VectorXcd h_hi = solve(hi);
      double c_hi = wng_constraint_value(h_hi, g);
      while (c_hi > 0.0) {
        if (!(hi < limit)) {
          throw Error(ErrorKind::infeasible, "beamformer-design",
                      "white-noise-gain constraint infeasible at bin " + std::to_string(k));
        }
        lo = hi;
        hi = std::min(4.0 * hi, limit);
        h_hi = solve(hi);
        c_hi = wng_constraint_value(h_hi, g);
      }
      // Invariant: c(lo) > 0 >= c(hi). Stop once the feasible end is active
      // to within tol.
      const double active_band = solver.tol;
      for (int step = 0; step < solver.max_bisection_steps && c_hi < -active_band; ++step) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        Eigen::VectorXcd h_mid = solve(mid);
        const double c_mid = wng_constraint_value(h_mid, g);
        if (c_mid > 0.0) {
          lo = mid;
        } else {
          hi = mid;
          h_hi = std::move(h_mid);
          c_hi = c_mid;
        }
      }
      lambda = hi;
      h = std::move(h_hi);
      c = c_hi;
    }

    if (!h.allFinite()) {
      throw Error(ErrorKind::numerical_failure, "beamformer-design", "non-finite weights at bin " + std::to_string(k));
    }
    out.weights.h.col(static_cast<Eigen::Index>(k)) = h;
    out.objective[k] = h.dot(a * h).real();
    out.constraint[k] = c;
    out.lambda[k] = lambda;
  }
  return out;
}

/// 10 log10(|h^H g|^2 / ||h||^2) per bin.
inline std::vector<double> white_noise_gain(const BeamformerWeights& weights, const ChannelResponse& target) {
  if (weights.h.rows() != target.g.rows() || weights.h.cols() != target.g.cols()) {
    throw Error(ErrorKind::shape_mismatch, "beamformer-design", "weights and response shapes differ");
  }
  std::vector<double> out(weights.bins());
  for (Eigen::Index k = 0; k < weights.h.cols(); ++k) {
    const double norm2 = weights.h.col(k).squaredNorm();
    if (!(norm2 > 0.0)) {
      throw Error(ErrorKind::invalid_input, "beamformer-design", "zero-norm weights at bin " + std::to_string(k));
    }
    out[static_cast<std::size_t>(k)] = 10.0 * std::log10(std::norm(weights.h.col(k).dot(target.g.col(k))) / norm2);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Banks

struct NullSpec {
  Direction direction;
  double weight = 1.0;
};

struct DesignerSpec {
  Designer designer = Designer::nlcmv;
  double loading = kDefaultLoading;
  std::vector<NullSpec> nulls;  // point-noise directions shared by all channels
  double point_psd = 1.0;
  NlcmvSolverConfig solver;
  double speed_of_sound = kSpeedOfSound;
};

/// Channel 0 is the mouth beam; channels 1..K are horizontal steers at
/// azimuth 360 k / K degrees, k = 0..K-1.
struct BeamformerBank {
  std::vector<BeamformerWeights> channels;
  std::size_t horizontal_count = 0;  // K
  FrequencyGrid grid{16000.0, 512, 256};
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const noexcept { return channels.size(); }
  std::size_t mics() const noexcept { return channels.empty() ? 0 : channels.front().mics(); }
};

inline BeamformerWeights design_single(const ArrayGeometry& geometry, const FrequencyGrid& grid,
                                       const SourceDescriptor& steer, const DesignerSpec& spec) {
  const ChannelResponse target = steering_vector(geometry, steer, grid, default_model(steer), spec.speed_of_sound);
  switch (spec.designer) {
    case Designer::das: return design_das(target);
    case Designer::mvdr:
      return design_mvdr(target, diffuse_covariance(geometry, grid, spec.speed_of_sound), spec.loading);
    case Designer::nlcmv: {
      NlcmvProblem problem{target, diffuse_covariance(geometry, grid, spec.speed_of_sound), {},
                           std::vector<double>(grid.bins(), spec.point_psd)};
      for (const auto& null : spec.nulls) {
        problem.point_sources.push_back(
            {steering_vector(geometry, null.direction, grid, PropagationModel::far_field, spec.speed_of_sound),
             null.weight});
      }
      NlcmvSolverConfig solver = spec.solver;
      solver.loading = spec.loading;
      return design_nlcmv(problem, solver).weights;
    }
    case Designer::refined: break;
  }
  throw Error(ErrorKind::invalid_input, "beamformer-design", "'refined' banks come from refinement, not design");
}

inline BeamformerBank design_bank(const ArrayGeometry& geometry, const FrequencyGrid& grid, std::size_t k_horizontal,
                                  const SourceDescriptor& mouth, const DesignerSpec& spec = {}) {
  if (k_horizontal < 1) throw Error(ErrorKind::invalid_input, "beamformer-design", "K must be >= 1");
  BeamformerBank bank;
  bank.horizontal_count = k_horizontal;
  bank.grid = grid;
  std::vector<SourceDescriptor> steers{mouth};
  for (std::size_t k = 0; k < k_horizontal; ++k) {
    steers.emplace_back(Direction::degrees(360.0 * static_cast<double>(k) / static_cast<double>(k_horizontal), 0.0));
  }
  bank.channels.reserve(steers.size());
  for (std::size_t c = 0; c < steers.size(); ++c) {
    try {
      bank.channels.push_back(design_single(geometry, grid, steers[c], spec));
    } catch (const Error& e) {
      throw Error(e.kind(), e.module(), "bank channel " + std::to_string(c) + ": " + e.detail());
    }
  }
  bank.provenance = {{"designer", std::string(to_string(spec.designer))},
                     {"geometry", geometry.name()},
                     {"loading", spec.loading},
                     {"K", k_horizontal}};
  return bank;
}

// ---------------------------------------------------------------------------
// Analysis

struct BeamPattern {
  double frequency_hz = 0.0;
  std::vector<double> azimuth_deg;
  std::vector<double> gain_db;
};

/// Weights at an arbitrary frequency, linearly interpolated between
/// neighbouring bins.
inline Eigen::VectorXcd weights_at_frequency(const BeamformerWeights& weights, const FrequencyGrid& grid,
                                             double frequency_hz) {
  const double pos = frequency_hz / grid.spacing_hz();
  const double last = static_cast<double>(weights.bins() - 1);
  if (!(pos >= 0.0) || pos > last + 1e-9) {
    throw Error(ErrorKind::invalid_input, "beamformer-design",
                "frequency " + std::to_string(frequency_hz) + " Hz is outside the weight grid");
  }
  const auto lo = static_cast<std::size_t>(std::min(std::floor(pos), last));
  const double frac = std::clamp(pos - static_cast<double>(lo), 0.0, 1.0);
  if (frac < 1e-12 || lo + 1 >= weights.bins()) return weights.at(lo);
  return (1.0 - frac) * weights.at(lo) + frac * weights.at(lo + 1);
}

inline BeamPattern beam_pattern(const BeamformerWeights& weights, const ArrayGeometry& geometry,
                                const FrequencyGrid& grid, double frequency_hz, double azimuth_step_deg = 1.0,
                                double floor_db = kBeamPatternFloorDb, double speed_of_sound = kSpeedOfSound) {
  if (!(azimuth_step_deg > 0.0)) throw Error(ErrorKind::invalid_input, "beamformer-design", "azimuth step must be > 0");
  if (weights.mics() != geometry.size()) {
    throw Error(ErrorKind::shape_mismatch, "beamformer-design", "weights and geometry mic counts differ");
  }
  const Eigen::VectorXcd h = weights_at_frequency(weights, grid, frequency_hz);
  BeamPattern pattern{frequency_hz, {}, {}};
  const auto steps = static_cast<std::size_t>(std::ceil(360.0 / azimuth_step_deg - 1e-9));
  for (std::size_t i = 0; i < steps; ++i) {
    const double az = static_cast<double>(i) * azimuth_step_deg;
    const Eigen::VectorXcd g = steering_vector_at(geometry, Direction::degrees(az, 0.0), frequency_hz,
                                                  PropagationModel::far_field, speed_of_sound);
    const double mag = std::abs(h.dot(g));
    pattern.azimuth_deg.push_back(az);
    pattern.gain_db.push_back(mag > 0.0 ? std::max(20.0 * std::log10(mag), floor_db) : floor_db);
  }
  return pattern;
}

inline double pattern_gain_at(const BeamformerWeights& weights, const ArrayGeometry& geometry,
                              const FrequencyGrid& grid, double frequency_hz, double azimuth_deg,
                              double floor_db = kBeamPatternFloorDb, double speed_of_sound = kSpeedOfSound) {
  const Eigen::VectorXcd h = weights_at_frequency(weights, grid, frequency_hz);
  const Eigen::VectorXcd g = steering_vector_at(geometry, Direction::degrees(azimuth_deg, 0.0), frequency_hz,
                                                PropagationModel::far_field, speed_of_sound);
  const double mag = std::abs(h.dot(g));
  return mag > 0.0 ? std::max(20.0 * std::log10(mag), floor_db) : floor_db;
}

}  // namespace glasswave
