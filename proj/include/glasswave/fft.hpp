// SPDX-License-Identifier: Apache-2.0
#pragma once

// Thin real-signal helpers over Eigen's FFT module.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "glasswave/core.hpp"

namespace glasswave::fft {

inline Eigen::FFT<double>& engine() {
  thread_local Eigen::FFT<double> instance;
  return instance;
}

/// One-sided spectrum (nfft/2 + 1 bins) of x zero-padded to nfft.
inline Eigen::VectorXcd rfft(const double* x, std::size_t n, std::size_t nfft) {
  thread_local std::vector<double> in;
  thread_local std::vector<cdouble> out;
  in.assign(nfft, 0.0);
  for (std::size_t i = 0; i < n && i < nfft; ++i) in[i] = x[i];
  engine().fwd(out, in);
  Eigen::VectorXcd half(static_cast<Eigen::Index>(nfft / 2 + 1));
  for (std::size_t k = 0; k <= nfft / 2; ++k) half(static_cast<Eigen::Index>(k)) = out[k];
  return half;
}

inline Eigen::VectorXcd rfft(const Eigen::VectorXd& x, std::size_t nfft) {
  return rfft(x.data(), static_cast<std::size_t>(x.size()), nfft);
}

/// Inverse of rfft for even nfft. The imaginary parts of the DC and Nyquist
/// bins are ignored.
inline Eigen::VectorXd irfft(const Eigen::VectorXcd& half, std::size_t nfft) {
  thread_local std::vector<cdouble> full;
  thread_local std::vector<double> out;
  full.assign(nfft, cdouble(0.0, 0.0));
  const std::size_t nyq = nfft / 2;
  full[0] = half(0).real();
  for (std::size_t k = 1; k < nyq; ++k) {
    full[k] = half(static_cast<Eigen::Index>(k));
    full[nfft - k] = std::conj(full[k]);
  }
  full[nyq] = half(static_cast<Eigen::Index>(nyq)).real();
  engine().inv(out, full);
  return Eigen::Map<const Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(nfft));
}

/// Complex inverse DFT, unscaled: y[n] = sum_k X[k] e^{+j 2 pi k n / N}.
inline Eigen::VectorXcd inverse_unscaled(const Eigen::VectorXcd& spectrum) {
  thread_local std::vector<cdouble> in;
  thread_local std::vector<cdouble> out;
  const auto n = static_cast<std::size_t>(spectrum.size());
  in.assign(spectrum.data(), spectrum.data() + n);
  engine().inv(out, in);
  Eigen::VectorXcd y(spectrum.size());
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = out[i] * static_cast<double>(n);
  return y;
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace glasswave::fft
