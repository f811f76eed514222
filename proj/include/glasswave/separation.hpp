// SPDX-License-Identifier: Apache-2.0
#pragma once

// Mask-based separation of wearer and partner speech over the beamformed
// front-end, and gradient refinement of the bank weights against the
// separation loss.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "glasswave/bank.hpp"
#include "glasswave/beamformer.hpp"
#include "glasswave/core.hpp"
#include "glasswave/scene.hpp"
#include "glasswave/spectral.hpp"

namespace glasswave {

inline constexpr double kMaskEpsilon = 1e-8;

/// |T| / (|T| + |I| + eps), computed cell by cell.
inline Mask oracle_mask(const Eigen::MatrixXcd& mixture, const Eigen::MatrixXcd& target,
                        const Eigen::MatrixXcd& interferer) {
  if (mixture.rows() != target.rows() || mixture.cols() != target.cols() || target.rows() != interferer.rows() ||
      target.cols() != interferer.cols()) {
    throw Error(ErrorKind::shape_mismatch, "separation", "mask inputs differ in shape");
  }
  const Eigen::MatrixXd t = target.cwiseAbs();
  const Eigen::MatrixXd i = interferer.cwiseAbs();
  return {t.array() / (t.array() + i.array() + kMaskEpsilon)};
}

/// STFT configuration matching a bank's frequency grid (half-frame hop).
inline StftConfig stft_config_for(const FrequencyGrid& grid) {
  return {grid.fft_size(), grid.fft_size() / 2, grid.bins()};
}

struct SeparationResult {
  Eigen::VectorXd wearer_estimate;
  Eigen::VectorXd partner_estimate;
  Mask wearer_mask;
  Mask partner_mask;
  std::string bank_id;
};

struct ProvidedMasks {
  Mask wearer;
  Mask partner;
};

inline std::string bank_id(const BeamformerBank& bank) {
  if (bank.provenance.contains("id")) return bank.provenance.at("id").get<std::string>();
  return "K" + std::to_string(bank.horizontal_count) + "-" +
         std::string(bank.channels.empty() ? "empty" : to_string(bank.channels.front().designer));
}

/// apply_bank -> banked channel 0 as reference -> wearer / partner masks
/// (oracle IRMs from the scene stems unless `masks` is given) -> istft.
inline SeparationResult separate(const BeamformerBank& bank, const SceneAudio& scene,
                                 const std::optional<ProvidedMasks>& masks = std::nullopt) {
  if (static_cast<std::size_t>(scene.mixture.rows()) != bank.mics()) {
    throw Error(ErrorKind::shape_mismatch, "separation",
                "scene has " + std::to_string(scene.mixture.rows()) + " channels, bank expects " +
                    std::to_string(bank.mics()));
  }
  const StftConfig cfg = stft_config_for(bank.grid);
  const auto length = static_cast<std::size_t>(scene.mixture.cols());
  const Spectrogram mix = stft(scene.mixture, cfg);
  check_bank_input(bank, mix);
  const Eigen::MatrixXcd reference = apply_beamformer(bank.channels.front(), mix);

  SeparationResult out;
  out.bank_id = bank_id(bank);
  if (masks) {
    for (const Mask* m : {&masks->wearer, &masks->partner}) {
      if (m->values.rows() != reference.rows() || m->values.cols() != reference.cols()) {
        throw Error(ErrorKind::shape_mismatch, "separation", "provided mask does not match the spectrogram shape");
      }
      m->validate();
    }
    out.wearer_mask = masks->wearer;
    out.partner_mask = masks->partner;
  } else {
    const Eigen::MatrixXcd wearer = apply_beamformer(bank.channels.front(), stft(scene.stem("wearer").audio, cfg));
    const Eigen::MatrixXcd partner = apply_beamformer(bank.channels.front(), stft(scene.stem("partner").audio, cfg));
    out.wearer_mask = oracle_mask(reference, wearer, reference - wearer);
    out.partner_mask = oracle_mask(reference, partner, reference - partner);
  }
  out.wearer_estimate = istft_channel(apply_mask(reference, out.wearer_mask), cfg, length);
  out.partner_estimate = istft_channel(apply_mask(reference, out.partner_mask), cfg, length);
  return out;
}

// ---------------------------------------------------------------------------
// Refinement

enum class GradientMode { analytic, finite_difference };

struct RefinementConfig {
  double step_size = 1e-3;
  std::size_t iterations = 50;
  LossWeights loss;
  GradientMode gradient_mode = GradientMode::analytic;
  double finite_difference_step = 1e-5;

  void validate() const {
    if (!(step_size > 0.0) || !std::isfinite(step_size)) {
      throw Error(ErrorKind::invalid_input, "separation", "step_size must be positive");
    }
    if (!(finite_difference_step > 0.0)) {
      throw Error(ErrorKind::invalid_input, "separation", "finite-difference step must be positive");
    }
  }
};

/// A training scene with its spectrograms computed once.
struct RefinementScene {
  std::string id;
  Spectrogram mixture;
  Spectrogram wearer;
  Spectrogram partner;
  Eigen::VectorXd wearer_reference;
  Eigen::VectorXd partner_reference;
};

inline RefinementScene prepare_refinement_scene(const SceneAudio& scene, const StftConfig& cfg) {
  return {scene.scene_id,
          stft(scene.mixture, cfg),
          stft(scene.stem("wearer").audio, cfg),
          stft(scene.stem("partner").audio, cfg),
          scene.reference("wearer"),
          scene.reference("partner")};
}

struct SceneMasks {
  Mask wearer;
  Mask partner;
};

inline std::vector<SceneMasks> oracle_masks(const BeamformerBank& bank, const std::vector<RefinementScene>& scenes) {
  std::vector<SceneMasks> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) {
    const Eigen::MatrixXcd mix = apply_beamformer(bank.channels.front(), s.mixture);
    const Eigen::MatrixXcd wearer = apply_beamformer(bank.channels.front(), s.wearer);
    const Eigen::MatrixXcd partner = apply_beamformer(bank.channels.front(), s.partner);
    out.push_back({oracle_mask(mix, wearer, mix - wearer), oracle_mask(mix, partner, mix - partner)});
  }
  return out;
}

/// Per-channel complex gradients (d/dRe h + j d/dIm h), shaped like the weights.
using BankGradient = std::vector<Eigen::MatrixXcd>;

/// Mean over scenes of the wearer plus partner separation loss with the
/// masks held fixed. When `gradient` is non-null it receives the analytic
/// gradient with respect to every bank weight. Estimates depend on the bank
/// only through channel 0, so the other channels' gradients are zero.
inline double refinement_objective(const BeamformerBank& bank, const std::vector<RefinementScene>& scenes,
                                   const std::vector<SceneMasks>& masks, const LossWeights& weights,
                                   BankGradient* gradient = nullptr) {
  if (scenes.empty()) throw Error(ErrorKind::invalid_input, "separation", "refinement needs at least one scene");
  if (masks.size() != scenes.size()) throw Error(ErrorKind::shape_mismatch, "separation", "one mask pair per scene");
  const StftConfig cfg = stft_config_for(bank.grid);
  const auto bins = static_cast<Eigen::Index>(bank.grid.bins());
  if (gradient != nullptr) {
    gradient->assign(bank.size(), Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(bank.mics()), bins));
  }
  const double inv_scenes = 1.0 / static_cast<double>(scenes.size());
  double total = 0.0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto& scene = scenes[s];
    check_bank_input(bank, scene.mixture);
    const Eigen::MatrixXcd y = apply_beamformer(bank.channels.front(), scene.mixture);
    const std::pair<const Mask*, const Eigen::VectorXd*> targets[] = {{&masks[s].wearer, &scene.wearer_reference},
                                                                      {&masks[s].partner, &scene.partner_reference}};
    for (const auto& [mask, reference] : targets) {
      const Eigen::VectorXd est = istft_channel(apply_mask(y, *mask), cfg, scene.mixture.signal_length);
      Eigen::VectorXd g;
      total += separation_loss(est, *reference, cfg, weights, gradient ? &g : nullptr).total * inv_scenes;
      if (gradient == nullptr) continue;
      const Eigen::MatrixXcd gy = istft_adjoint(g, cfg).cwiseProduct(mask->values.cast<cdouble>()) * inv_scenes;
      auto& g0 = gradient->front();
      for (Eigen::Index m = 0; m < g0.rows(); ++m) {
        const auto& x = scene.mixture.channels[static_cast<std::size_t>(m)];
        g0.row(m) += (x.topRows(bins).cwiseProduct(gy.topRows(bins).conjugate())).rowwise().sum().transpose();
      }
    }
  }
  return total;
}

/// Central differences of `refinement_objective` over the real and
/// imaginary part of every weight.
inline BankGradient finite_difference_gradient(const BeamformerBank& bank, const std::vector<RefinementScene>& scenes,
                                               const std::vector<SceneMasks>& masks, const LossWeights& weights,
                                               double step = 1e-5) {
  BankGradient grad;
  BeamformerBank probe = bank;
  for (std::size_t c = 0; c < bank.size(); ++c) {
    Eigen::MatrixXcd g(bank.channels[c].h.rows(), bank.channels[c].h.cols());
    for (Eigen::Index k = 0; k < g.cols(); ++k) {
      for (Eigen::Index m = 0; m < g.rows(); ++m) {
        cdouble& w = probe.channels[c].h(m, k);
        const cdouble orig = w;
        double parts[2];
        for (int p = 0; p < 2; ++p) {
          const cdouble d = p == 0 ? cdouble(step, 0.0) : cdouble(0.0, step);
          w = orig + d;
          const double up = refinement_objective(probe, scenes, masks, weights);
          w = orig - d;
          const double down = refinement_objective(probe, scenes, masks, weights);
          parts[p] = (up - down) / (2.0 * step);
        }
        w = orig;
        g(m, k) = cdouble(parts[0], parts[1]);
      }
    }
    grad.push_back(std::move(g));
  }
  return grad;
}

struct RefinementResult {
  BeamformerBank bank;
  std::vector<double> loss_trace;  // iterations + 1 entries; last is the final bank
};

/// Gradient descent on the bank weights. Oracle masks are recomputed from
/// the current bank at every iteration and held fixed for its gradient.
inline RefinementResult refine_beamformer(const BeamformerBank& initial, const std::vector<SceneAudio>& scenes,
                                          const RefinementConfig& config) {
  config.validate();
  if (scenes.empty()) throw Error(ErrorKind::invalid_input, "separation", "refinement needs at least one scene");
  const StftConfig cfg = stft_config_for(initial.grid);
  std::vector<RefinementScene> prepared;
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& s : scenes) {
    if (static_cast<std::size_t>(s.mixture.rows()) != initial.mics()) {
      throw Error(ErrorKind::shape_mismatch, "separation", "scene " + s.scene_id + " channel count differs from the bank");
    }
    prepared.push_back(prepare_refinement_scene(s, cfg));
    ids.push_back(s.scene_id);
  }

  RefinementResult result{initial, {}};
  for (std::size_t it = 0; it <= config.iterations; ++it) {
    const auto masks = oracle_masks(result.bank, prepared);
    const bool last = it == config.iterations;
    BankGradient grad;
    double loss = 0.0;
    if (last) {
      loss = refinement_objective(result.bank, prepared, masks, config.loss);
    } else if (config.gradient_mode == GradientMode::analytic) {
      loss = refinement_objective(result.bank, prepared, masks, config.loss, &grad);
    } else {
      loss = refinement_objective(result.bank, prepared, masks, config.loss);
      grad = finite_difference_gradient(result.bank, prepared, masks, config.loss, config.finite_difference_step);
    }
    bool finite = std::isfinite(loss);
    for (const auto& g : grad) finite = finite && g.allFinite();
    if (!finite) {
      throw Error(ErrorKind::numerical_failure, "separation",
                  "non-finite loss or gradient at iteration " + std::to_string(it));
    }
    result.loss_trace.push_back(loss);
    log(LogLevel::debug, "refine: iteration " + std::to_string(it) + " loss " + std::to_string(loss));
    if (last) break;
    for (std::size_t c = 0; c < grad.size(); ++c) result.bank.channels[c].h -= config.step_size * grad[c];
  }

  if (config.iterations > 0) {
    for (auto& ch : result.bank.channels) ch.designer = Designer::refined;
    result.bank.provenance = {{"refined_from", initial.provenance},
                              {"iterations", config.iterations},
                              {"step_size", config.step_size},
                              {"gradient_mode", config.gradient_mode == GradientMode::analytic ? "analytic"
                                                                                                 : "finite-difference"},
                              {"loss_weights", {config.loss.l1, config.loss.stft, config.loss.si_sdr}},
                              {"scenes", ids},
                              {"loss_trace", result.loss_trace}};
  }
  return result;
}

}  // namespace glasswave
