// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scale-invariant signal-to-distortion ratio.

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "glasswave/core.hpp"

namespace glasswave {

inline constexpr double kSiSdrCeilingDb = 60.0;

namespace detail {

inline void check_si_sdr_inputs(const Eigen::VectorXd& estimate, const Eigen::VectorXd& reference) {
  if (estimate.size() != reference.size()) {
    throw Error(ErrorKind::shape_mismatch, "metrics", "estimate and reference lengths differ");
  }
  if (!(reference.squaredNorm() > 0.0)) throw Error(ErrorKind::invalid_input, "metrics", "reference signal is all zero");
}

}  // namespace detail

/// Unclamped SI-SDR in dB; may be +/-infinity for perfect or orthogonal
/// estimates.
inline double si_sdr_raw(const Eigen::VectorXd& estimate, const Eigen::VectorXd& reference) {
  detail::check_si_sdr_inputs(estimate, reference);
  const double alpha = estimate.dot(reference) / reference.squaredNorm();
  const Eigen::VectorXd target = alpha * reference;
  const double signal = target.squaredNorm();
  const double distortion = (target - estimate).squaredNorm();
  if (signal == 0.0) return -std::numeric_limits<double>::infinity();
  if (distortion == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / distortion);
}

inline double clamp_si_sdr(double value) {
  if (std::isnan(value)) return -kSiSdrCeilingDb;
  return std::clamp(value, -kSiSdrCeilingDb, kSiSdrCeilingDb);
}

inline double si_sdr(const Eigen::VectorXd& estimate, const Eigen::VectorXd& reference) {
  return clamp_si_sdr(si_sdr_raw(estimate, reference));
}

/// SI-SDR of the estimate minus SI-SDR of the unprocessed mixture channel.
inline double si_sdr_improvement(const Eigen::VectorXd& estimate, const Eigen::VectorXd& mixture_ref_channel,
                                 const Eigen::VectorXd& reference) {
  return si_sdr(estimate, reference) - si_sdr(mixture_ref_channel, reference);
}

/// d si_sdr_raw / d estimate. With p = <e, r>, R = ||r||^2 and
/// Q = R ||e||^2 - p^2, the raw value is 10 log10(p^2 / Q).
inline Eigen::VectorXd si_sdr_gradient(const Eigen::VectorXd& estimate, const Eigen::VectorXd& reference) {
  detail::check_si_sdr_inputs(estimate, reference);
  const double p = estimate.dot(reference);
  const double r2 = reference.squaredNorm();
  const double q = r2 * estimate.squaredNorm() - p * p;
  if (p == 0.0 || !(q > 0.0)) return Eigen::VectorXd::Zero(estimate.size());
  const double scale = 10.0 / std::log(10.0);
  return scale * (2.0 / p * reference - 2.0 / q * (r2 * estimate - p * reference));
}

}  // namespace glasswave
