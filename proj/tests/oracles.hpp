// SPDX-License-Identifier: Apache-2.0
#pragma once

// Slow, independent reference computations used as test oracles. None of
// these call into the library's numerical code paths.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using cd = std::complex<double>;
inline constexpr double pi = 3.14159265358979323846;

/// Bins 0..nfft/2 of the DFT of x zero-padded to nfft, by direct summation.
inline Eigen::VectorXcd naive_half_dft(const Eigen::VectorXd& x, std::size_t nfft) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(nfft / 2 + 1));
  for (std::size_t k = 0; k <= nfft / 2; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (Eigen::Index n = 0; n < x.size(); ++n) {
      const long double ang = -2.0L * static_cast<long double>(pi) * static_cast<long double>(k) *
                              static_cast<long double>(n) / static_cast<long double>(nfft);
      re += static_cast<long double>(x(n)) * std::cos(ang);
      im += static_cast<long double>(x(n)) * std::sin(ang);
    }
    out(static_cast<Eigen::Index>(k)) = cd(static_cast<double>(re), static_cast<double>(im));
  }
  return out;
}

inline Eigen::VectorXd direct_convolve(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < b.size(); ++j) y(i + j) += a(i) * b(j);
  }
  return y;
}

/// Far-field response: wave from unit direction u arrives at mic m earlier
/// by (p_m - p_ref).u / c than at the reference.
inline Eigen::VectorXcd far_field_response(const std::vector<Eigen::Vector3d>& mics, std::size_t ref,
                                           const Eigen::Vector3d& u, double f, double c) {
  Eigen::VectorXcd g(static_cast<Eigen::Index>(mics.size()));
  for (std::size_t m = 0; m < mics.size(); ++m) {
    const double lead = (mics[m] - mics[ref]).dot(u) / c;
    g(static_cast<Eigen::Index>(m)) = std::polar(1.0, 2.0 * pi * f * lead);
  }
  return g;
}

/// Spherical-wave response relative to the reference mic.
inline Eigen::VectorXcd near_field_response(const std::vector<Eigen::Vector3d>& mics, std::size_t ref,
                                            const Eigen::Vector3d& src, double f, double c) {
  const double d_ref = (src - mics[ref]).norm();
  Eigen::VectorXcd g(static_cast<Eigen::Index>(mics.size()));
  for (std::size_t m = 0; m < mics.size(); ++m) {
    const double d = (src - mics[m]).norm();
    g(static_cast<Eigen::Index>(m)) = std::polar(d_ref / d, -2.0 * pi * f * (d - d_ref) / c);
  }
  return g;
}

/// Isotropic diffuse covariance from a superposition of plane waves over the
/// sphere, using a Gauss-Legendre x uniform-azimuth product quadrature.
inline Eigen::MatrixXcd plane_wave_diffuse_covariance(const std::vector<Eigen::Vector3d>& mics, double f, double c,
                                                      int n_elevation = 48, int n_azimuth = 96) {
  // Gauss-Legendre nodes on [-1, 1] by Newton iteration.
  std::vector<double> nodes(static_cast<std::size_t>(n_elevation)), weights(nodes.size());
  for (int i = 0; i < n_elevation; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n_elevation + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n_elevation; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n_elevation * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[static_cast<std::size_t>(i)] = x;
    weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  const auto m = static_cast<Eigen::Index>(mics.size());
  Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(m, m);
  double total = 0.0;
  for (int i = 0; i < n_elevation; ++i) {
    const double z = nodes[static_cast<std::size_t>(i)];
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int j = 0; j < n_azimuth; ++j) {
      const double phi = 2.0 * pi * j / n_azimuth;
      const Eigen::Vector3d u(rho * std::cos(phi), rho * std::sin(phi), z);
      Eigen::VectorXcd d(m);
      for (Eigen::Index k = 0; k < m; ++k) d(k) = std::polar(1.0, 2.0 * pi * f * mics[static_cast<std::size_t>(k)].dot(u) / c);
      const double w = weights[static_cast<std::size_t>(i)];
      r += w * d * d.adjoint();
      total += w;
    }
  }
  return r / total;
}

/// min h^H A h subject to h^H g = 1 and ||h||^2 <= M / ||g||^2 by
/// accelerated projected gradient from `restarts` random feasible starts.
/// The feasible set is a ball inside the distortionless plane centred on
/// g / ||g||^2 with squared radius (M - 1) / ||g||^2.
inline double projected_gradient_nlcmv(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& g, int restarts,
                                       std::mt19937_64& rng, int max_iterations = 4000) {
  const auto m = g.size();
  const double g2 = g.squaredNorm();
  const Eigen::VectorXcd center = g / g2;
  const double radius = std::sqrt(std::max(0.0, (static_cast<double>(m) - 1.0) / g2));
  auto project = [&](Eigen::VectorXcd h) {
    h -= g * ((g.dot(h) - 1.0) / g2);  // onto g^H h = 1
    Eigen::VectorXcd off = h - center;
    const double n = off.norm();
    if (n > radius) off *= radius / n;
    return Eigen::VectorXcd(center + off);
  };
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  const double lipschitz = 2.0 * es.eigenvalues().maxCoeff();
  std::normal_distribution<double> normal(0.0, 1.0);
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXcd h(m);
    for (Eigen::Index i = 0; i < m; ++i) h(i) = cd(normal(rng), normal(rng)) * (2.0 * radius + 1.0 / std::sqrt(g2));
    h = project(h);
    Eigen::VectorXcd y = h;
    double t = 1.0;
    for (int it = 0; it < max_iterations; ++it) {
      const Eigen::VectorXcd next = project(y - (2.0 / lipschitz) * (a * y));
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = next + ((t - 1.0) / t_next) * (next - h);
      const double change = (next - h).norm();
      h = next;
      t = t_next;
      if (change < 1e-15 * (1.0 + h.norm())) break;
    }
    best = std::min(best, h.dot(a * h).real());
  }
  return best;
}

/// Central-difference gradient of a scalar function of a real vector.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + step;
    const double up = f(probe);
    probe(i) = x(i) - step;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * step);
  }
  return g;
}

/// Random compact array: M mics inside a `span`-metre cube, pairwise at
/// least `min_gap` apart.
inline std::vector<Eigen::Vector3d> random_mics(std::mt19937_64& rng, int m, double span = 0.16, double min_gap = 0.01) {
  std::uniform_real_distribution<double> u(-span / 2.0, span / 2.0);
  std::vector<Eigen::Vector3d> mics;
  while (static_cast<int>(mics.size()) < m) {
    const Eigen::Vector3d p(u(rng), u(rng), u(rng) * 0.5);
    bool ok = true;
    for (const auto& q : mics) ok = ok && (p - q).norm() >= min_gap;
    if (ok) mics.push_back(p);
  }
  return mics;
}

/// Mean square of the interior of a vector, ignoring `edge` samples at each end.
inline double interior_relative_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want, Eigen::Index edge) {
  const Eigen::Index n = want.size() - 2 * edge;
  return (got.segment(edge, n) - want.segment(edge, n)).norm() / want.segment(edge, n).norm();
}

}  // namespace oracle
