// SPDX-License-Identifier: Apache-2.0
#pragma once

// STFT analysis/synthesis, masking, inter-channel phase differences and the
// composite separation loss.

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "glasswave/core.hpp"
#include "glasswave/fft.hpp"
#include "glasswave/metrics.hpp"

namespace glasswave {

/// Periodic Hann window analysis with weighted overlap-add synthesis.
/// Spectrograms keep the full one-sided spectrum (fft_size/2 + 1 bins);
/// `retained_bins` is the feature/beamformer dimension (Nyquist dropped by
/// default).
struct StftConfig {
  std::size_t fft_size = 512;
  std::size_t hop = 256;
  std::size_t retained_bins = 256;

  std::size_t full_bins() const noexcept { return fft_size / 2 + 1; }

  void validate() const;
};

inline Eigen::VectorXd hann_window(std::size_t n) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    w(static_cast<Eigen::Index>(i)) = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

/// Largest deviation of sum_t w[n + t*hop] from its mean.
inline double cola_deviation(const Eigen::VectorXd& window, std::size_t hop) {
  const auto n = static_cast<std::size_t>(window.size());
  double lo = 1e300;
  double hi = -1e300;
  for (std::size_t i = 0; i < hop; ++i) {
    double s = 0.0;
    for (std::size_t j = i; j < n; j += hop) s += window(static_cast<Eigen::Index>(j));
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return hi - lo;
}

inline void StftConfig::validate() const {
  if (fft_size < 4 || fft_size % 2 != 0) {
    throw Error(ErrorKind::invalid_input, "spectral", "fft_size must be an even integer >= 4");
  }
  if (hop == 0 || hop >= fft_size || fft_size % hop != 0) {
    throw Error(ErrorKind::invalid_input, "spectral", "hop must divide fft_size and be smaller than it");
  }
  if (retained_bins == 0 || retained_bins > full_bins()) {
    throw Error(ErrorKind::invalid_input, "spectral", "retained_bins must be in [1, fft_size/2 + 1]");
  }
  if (cola_deviation(hann_window(fft_size), hop) > 1e-10) {
    throw Error(ErrorKind::invalid_input, "spectral", "Hann window is not constant-overlap-add at this hop");
  }
}

/// channels[c] is bins x frames.
struct Spectrogram {
  std::vector<Eigen::MatrixXcd> channels;
  StftConfig config;
  std::size_t signal_length = 0;

  std::size_t channel_count() const noexcept { return channels.size(); }
  std::size_t bins() const noexcept { return channels.empty() ? 0 : static_cast<std::size_t>(channels[0].rows()); }
  std::size_t frames() const noexcept { return channels.empty() ? 0 : static_cast<std::size_t>(channels[0].cols()); }
};

namespace detail {

// Signals are padded with fft_size/2 zeros in front and zero-filled at the
// end up to the last frame, so every original sample sees a window weight.
struct FrameLayout {
  std::size_t front = 0;
  std::size_t frames = 0;
  std::size_t padded = 0;
};

inline FrameLayout frame_layout(std::size_t length, const StftConfig& cfg) {
  FrameLayout l;
  l.front = cfg.fft_size / 2;
  const std::size_t last = l.front + length - 1;
  l.frames = last / cfg.hop + 1;
  l.padded = (l.frames - 1) * cfg.hop + cfg.fft_size;
  return l;
}

// Sum of squared window weights landing on each padded sample.
inline Eigen::VectorXd synthesis_norm(const FrameLayout& l, const StftConfig& cfg, const Eigen::VectorXd& w) {
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.padded));
  const auto n = static_cast<Eigen::Index>(cfg.fft_size);
  for (std::size_t t = 0; t < l.frames; ++t) {
    norm.segment(static_cast<Eigen::Index>(t * cfg.hop), n) += w.cwiseAbs2();
  }
  return norm;
}

}  // namespace detail

inline Eigen::MatrixXcd stft_channel(const Eigen::VectorXd& audio, const StftConfig& cfg) {
  cfg.validate();
  const auto length = static_cast<std::size_t>(audio.size());
  if (length < cfg.fft_size) {
    throw Error(ErrorKind::invalid_input, "spectral", "audio shorter than fft_size");
  }
  const auto l = detail::frame_layout(length, cfg);
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.padded));
  padded.segment(static_cast<Eigen::Index>(l.front), audio.size()) = audio;
  const Eigen::VectorXd w = hann_window(cfg.fft_size);
  const auto n = static_cast<Eigen::Index>(cfg.fft_size);
  Eigen::MatrixXcd spec(static_cast<Eigen::Index>(cfg.full_bins()), static_cast<Eigen::Index>(l.frames));
  Eigen::VectorXd frame(n);
  for (std::size_t t = 0; t < l.frames; ++t) {
    frame = padded.segment(static_cast<Eigen::Index>(t * cfg.hop), n).cwiseProduct(w);
    spec.col(static_cast<Eigen::Index>(t)) = fft::rfft(frame, cfg.fft_size);
  }
  return spec;
}

/// audio is channels x samples.
inline Spectrogram stft(const Eigen::MatrixXd& audio, const StftConfig& cfg) {
  Spectrogram s{{}, cfg, static_cast<std::size_t>(audio.cols())};
  s.channels.reserve(static_cast<std::size_t>(audio.rows()));
  for (Eigen::Index c = 0; c < audio.rows(); ++c) s.channels.push_back(stft_channel(audio.row(c).transpose(), cfg));
  return s;
}

inline Eigen::VectorXd istft_channel(const Eigen::MatrixXcd& spec, const StftConfig& cfg, std::size_t length) {
  cfg.validate();
  const auto l = detail::frame_layout(length, cfg);
  if (static_cast<std::size_t>(spec.rows()) != cfg.full_bins() || static_cast<std::size_t>(spec.cols()) != l.frames) {
    throw Error(ErrorKind::shape_mismatch, "spectral", "spectrogram shape does not match the signal length");
  }
  const Eigen::VectorXd w = hann_window(cfg.fft_size);
  const auto n = static_cast<Eigen::Index>(cfg.fft_size);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.padded));
  for (std::size_t t = 0; t < l.frames; ++t) {
    acc.segment(static_cast<Eigen::Index>(t * cfg.hop), n) +=
        fft::irfft(spec.col(static_cast<Eigen::Index>(t)), cfg.fft_size).cwiseProduct(w);
  }
  const Eigen::VectorXd norm = detail::synthesis_norm(l, cfg, w);
  return acc.segment(static_cast<Eigen::Index>(l.front), static_cast<Eigen::Index>(length))
      .cwiseQuotient(norm.segment(static_cast<Eigen::Index>(l.front), static_cast<Eigen::Index>(length)));
}

inline Eigen::MatrixXd istft(const Spectrogram& s) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(s.channel_count()), static_cast<Eigen::Index>(s.signal_length));
  for (std::size_t c = 0; c < s.channel_count(); ++c) {
    out.row(static_cast<Eigen::Index>(c)) = istft_channel(s.channels[c], s.config, s.signal_length).transpose();
  }
  return out;
}

/// Gradient with respect to the complex spectrogram (d/dRe + j d/dIm) of a
/// loss whose gradient with respect to istft's output is `grad_signal`.
inline Eigen::MatrixXcd istft_adjoint(const Eigen::VectorXd& grad_signal, const StftConfig& cfg) {
  const auto length = static_cast<std::size_t>(grad_signal.size());
  const auto l = detail::frame_layout(length, cfg);
  const Eigen::VectorXd w = hann_window(cfg.fft_size);
  const Eigen::VectorXd norm = detail::synthesis_norm(l, cfg, w);
  Eigen::VectorXd g_padded = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.padded));
  g_padded.segment(static_cast<Eigen::Index>(l.front), grad_signal.size()) =
      grad_signal.cwiseQuotient(norm.segment(static_cast<Eigen::Index>(l.front), grad_signal.size()));
  const auto n = static_cast<Eigen::Index>(cfg.fft_size);
  const double inv_n = 1.0 / static_cast<double>(cfg.fft_size);
  Eigen::MatrixXcd out(static_cast<Eigen::Index>(cfg.full_bins()), static_cast<Eigen::Index>(l.frames));
  Eigen::VectorXd frame(n);
  for (std::size_t t = 0; t < l.frames; ++t) {
    frame = g_padded.segment(static_cast<Eigen::Index>(t * cfg.hop), n).cwiseProduct(w);
    Eigen::VectorXcd col = fft::rfft(frame, cfg.fft_size) * inv_n;
    // Interior bins appear twice in the Hermitian spectrum.
    col.segment(1, static_cast<Eigen::Index>(cfg.fft_size / 2 - 1)) *= 2.0;
    out.col(static_cast<Eigen::Index>(t)) = col;
  }
  return out;
}

/// Gradient with respect to the time signal of a loss whose gradient with
/// respect to stft_channel's output is `grad_spec` (d/dRe + j d/dIm).
inline Eigen::VectorXd stft_adjoint(const Eigen::MatrixXcd& grad_spec, const StftConfig& cfg, std::size_t length) {
  const auto l = detail::frame_layout(length, cfg);
  const Eigen::VectorXd w = hann_window(cfg.fft_size);
  const auto n = static_cast<Eigen::Index>(cfg.fft_size);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.padded));
  Eigen::VectorXcd full(n);
  for (std::size_t t = 0; t < l.frames; ++t) {
    full.setZero();
    full.head(grad_spec.rows()) = grad_spec.col(static_cast<Eigen::Index>(t));
    acc.segment(static_cast<Eigen::Index>(t * cfg.hop), n) += fft::inverse_unscaled(full).real().cwiseProduct(w);
  }
  return acc.segment(static_cast<Eigen::Index>(l.front), static_cast<Eigen::Index>(length));
}

/// Energy of the windowed frame recovered from its one-sided spectrum.
inline double frame_energy(const Eigen::VectorXcd& bins, std::size_t fft_size) {
  const auto nyq = static_cast<Eigen::Index>(fft_size / 2);
  double e = std::norm(bins(0)) + std::norm(bins(nyq));
  e += 2.0 * bins.segment(1, nyq - 1).squaredNorm();
  return e / static_cast<double>(fft_size);
}

/// Phase of each non-reference channel relative to the reference, wrapped
/// to (-pi, pi], over the retained bins. Output order follows channel order
/// with the reference skipped.
inline std::vector<Eigen::MatrixXd> ipd_features(const Spectrogram& spec, std::size_t reference_channel) {
  if (spec.channel_count() < 2) throw Error(ErrorKind::invalid_input, "spectral", "IPD needs at least two channels");
  if (reference_channel >= spec.channel_count()) {
    throw Error(ErrorKind::invalid_input, "spectral", "reference channel out of range");
  }
  const auto bins = static_cast<Eigen::Index>(spec.config.retained_bins);
  const Eigen::MatrixXcd& ref = spec.channels[reference_channel];
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t c = 0; c < spec.channel_count(); ++c) {
    if (c == reference_channel) continue;
    Eigen::MatrixXd ipd(bins, ref.cols());
    for (Eigen::Index t = 0; t < ref.cols(); ++t) {
      for (Eigen::Index k = 0; k < bins; ++k) {
        double a = std::arg(spec.channels[c](k, t) * std::conj(ref(k, t)));
        if (a <= -kPi) a = kPi;
        ipd(k, t) = a;
      }
    }
    out.push_back(std::move(ipd));
  }
  return out;
}

/// Real time-frequency mask with values in [0, 1].
struct Mask {
  Eigen::MatrixXd values;

  void validate() const {
    if (!values.allFinite() || values.minCoeff() < 0.0 || values.maxCoeff() > 1.0) {
      throw Error(ErrorKind::invalid_input, "spectral", "mask values must lie in [0, 1]");
    }
  }
};

inline Eigen::MatrixXcd apply_mask(const Eigen::MatrixXcd& reference, const Mask& mask) {
  if (reference.rows() != mask.values.rows() || reference.cols() != mask.values.cols()) {
    throw Error(ErrorKind::shape_mismatch, "spectral", "mask and spectrogram shapes differ");
  }
  return reference.cwiseProduct(mask.values.cast<cdouble>());
}

struct LossWeights {
  double l1 = 1.0;
  double stft = 1.0;
  double si_sdr = 1.0;
};

struct LossBreakdown {
  double l1 = 0.0;
  double stft = 0.0;
  double neg_log_si_sdr = 0.0;
  double total = 0.0;
};

/// L1 + single-resolution STFT magnitude L1 + negative SI-SDR (dB, clamped
/// at +/-60). When `gradient` is non-null it receives d total / d estimate;
/// the SI-SDR term contributes nothing while clamped.
inline LossBreakdown separation_loss(const Eigen::VectorXd& estimate, const Eigen::VectorXd& reference,
                                     const StftConfig& cfg, const LossWeights& weights = {},
                                     Eigen::VectorXd* gradient = nullptr) {
  if (estimate.size() != reference.size()) {
    throw Error(ErrorKind::shape_mismatch, "spectral", "estimate and reference lengths differ");
  }
  if (!(reference.squaredNorm() > 0.0)) throw Error(ErrorKind::invalid_input, "spectral", "reference signal is all zero");
  const auto n = static_cast<double>(estimate.size());
  const Eigen::VectorXd diff = estimate - reference;

  LossBreakdown loss;
  loss.l1 = diff.cwiseAbs().sum() / n;

  const Eigen::MatrixXcd est_spec = stft_channel(estimate, cfg);
  const Eigen::MatrixXcd ref_spec = stft_channel(reference, cfg);
  const Eigen::MatrixXd mag_diff = est_spec.cwiseAbs() - ref_spec.cwiseAbs();
  const auto cells = static_cast<double>(est_spec.size());
  loss.stft = mag_diff.cwiseAbs().sum() / cells;

  const double raw = si_sdr_raw(estimate, reference);
  const double clamped = clamp_si_sdr(raw);
  loss.neg_log_si_sdr = -clamped;
  loss.total = weights.l1 * loss.l1 + weights.stft * loss.stft + weights.si_sdr * loss.neg_log_si_sdr;

  if (gradient != nullptr) {
    Eigen::VectorXd g = diff.unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }) * (weights.l1 / n);

    Eigen::MatrixXcd spec_grad(est_spec.rows(), est_spec.cols());
    for (Eigen::Index t = 0; t < est_spec.cols(); ++t) {
      for (Eigen::Index k = 0; k < est_spec.rows(); ++k) {
        const double mag = std::abs(est_spec(k, t));
        const double s = mag_diff(k, t) > 0.0 ? 1.0 : (mag_diff(k, t) < 0.0 ? -1.0 : 0.0);
        spec_grad(k, t) = mag > 0.0 ? est_spec(k, t) * (s / mag) : cdouble(0.0, 0.0);
      }
    }
    g += stft_adjoint(spec_grad, cfg, estimate.size()) * (weights.stft / cells);

    if (std::isfinite(raw) && raw > -kSiSdrCeilingDb && raw < kSiSdrCeilingDb) {
      g -= weights.si_sdr * si_sdr_gradient(estimate, reference);
    }
    *gradient = std::move(g);
  }
  return loss;
}

}  // namespace glasswave
