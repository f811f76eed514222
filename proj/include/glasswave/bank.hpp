// SPDX-License-Identifier: Apache-2.0
#pragma once

// Applying a beamformer bank to multichannel spectrograms, and the bank /
// beam-pattern file formats.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glasswave/beamformer.hpp"
#include "glasswave/spectral.hpp"

namespace glasswave {

/// Y_k(w, t) = h_k(w)^H X(w, t) for every bank channel k. Bins beyond the
/// bank's grid (the Nyquist bin by default) are zero in the output.
inline Eigen::MatrixXcd apply_beamformer(const BeamformerWeights& weights, const Spectrogram& input) {
  const auto bins = static_cast<Eigen::Index>(weights.bins());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(input.bins()),
                                                static_cast<Eigen::Index>(input.frames()));
  for (std::size_t m = 0; m < input.channel_count(); ++m) {
    const Eigen::VectorXcd hc = weights.h.row(static_cast<Eigen::Index>(m)).transpose().conjugate();
    out.topRows(bins) += hc.asDiagonal() * input.channels[m].topRows(bins);
  }
  return out;
}

inline void check_bank_input(const BeamformerBank& bank, const Spectrogram& input) {
  if (input.channel_count() != bank.mics()) {
    throw Error(ErrorKind::shape_mismatch, "beamformer-design",
                "input has " + std::to_string(input.channel_count()) + " channels, bank expects " +
                    std::to_string(bank.mics()));
  }
  if (input.config.fft_size != bank.grid.fft_size() || input.bins() < bank.grid.bins()) {
    throw Error(ErrorKind::shape_mismatch, "beamformer-design", "spectrogram grid does not match the bank grid");
  }
}

inline Spectrogram apply_bank(const BeamformerBank& bank, const Spectrogram& input) {
  check_bank_input(bank, input);
  Spectrogram out{{}, input.config, input.signal_length};
  out.channels.reserve(bank.size());
  for (const auto& w : bank.channels) out.channels.push_back(apply_beamformer(w, input));
  return out;
}

// Bank file: JSON with grid metadata and, per channel, per-bin lists of
// [re, im] pairs (one per microphone). Doubles are written with full
// round-trip precision.

inline nlohmann::json to_json(const BeamformerBank& bank) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& w : bank.channels) {
    nlohmann::json bins = nlohmann::json::array();
    for (Eigen::Index k = 0; k < w.h.cols(); ++k) {
      nlohmann::json col = nlohmann::json::array();
      for (Eigen::Index m = 0; m < w.h.rows(); ++m) col.push_back({w.h(m, k).real(), w.h(m, k).imag()});
      bins.push_back(std::move(col));
    }
    channels.push_back({{"designer", std::string(to_string(w.designer))},
                        {"steer", to_json(w.steer)},
                        {"weights", std::move(bins)}});
  }
  return {{"format", "glasswave-bank/1"},
          {"sample_rate_hz", bank.grid.sample_rate_hz()},
          {"fft_size", bank.grid.fft_size()},
          {"bins", bank.grid.bins()},
          {"mics", bank.mics()},
          {"K", bank.horizontal_count},
          {"provenance", bank.provenance},
          {"channels", std::move(channels)}};
}

inline BeamformerBank bank_from_json(const nlohmann::json& j) {
  try {
    BeamformerBank bank;
    bank.grid = FrequencyGrid(j.at("sample_rate_hz").get<double>(), j.at("fft_size").get<std::size_t>(),
                              j.at("bins").get<std::size_t>());
    bank.horizontal_count = j.at("K").get<std::size_t>();
    bank.provenance = j.value("provenance", nlohmann::json::object());
    const auto mics = j.at("mics").get<Eigen::Index>();
    const auto bins = static_cast<Eigen::Index>(bank.grid.bins());
    for (const auto& ch : j.at("channels")) {
      BeamformerWeights w{Eigen::MatrixXcd(mics, bins), source_from_json(ch.at("steer")),
                          designer_from_string(ch.at("designer").get<std::string>())};
      const auto& data = ch.at("weights");
      if (static_cast<Eigen::Index>(data.size()) != bins) {
        throw Error(ErrorKind::invalid_input, "beamformer-design", "weight bin count does not match header");
      }
      for (Eigen::Index k = 0; k < bins; ++k) {
        const auto& col = data.at(static_cast<std::size_t>(k));
        if (static_cast<Eigen::Index>(col.size()) != mics) {
          throw Error(ErrorKind::invalid_input, "beamformer-design", "weight vector length does not match mic count");
        }
        for (Eigen::Index m = 0; m < mics; ++m) {
          const auto& pair = col.at(static_cast<std::size_t>(m));
          w.h(m, k) = cdouble(pair.at(0).get<double>(), pair.at(1).get<double>());
        }
      }
      bank.channels.push_back(std::move(w));
    }
    if (bank.channels.size() != bank.horizontal_count + 1) {
      throw Error(ErrorKind::invalid_input, "beamformer-design", "bank must hold K + 1 channels");
    }
    return bank;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, "beamformer-design", std::string("malformed bank file: ") + e.what());
  }
}

inline void save_bank(const BeamformerBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "beamformer-design", "cannot write " + path.string());
  out << to_json(bank).dump() << '\n';
}

inline BeamformerBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "beamformer-design", "cannot open bank file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, "beamformer-design", "malformed bank file " + path.string() + ": " + e.what());
  }
  return bank_from_json(j);
}

/// Tab-separated "azimuth_deg<TAB>gain_db" rows with a header line.
inline std::string beam_pattern_table(const BeamPattern& pattern) {
  std::ostringstream os;
  os << "# frequency_hz " << pattern.frequency_hz << "\nazimuth_deg\tgain_db\n";
  os << std::setprecision(10);
  for (std::size_t i = 0; i < pattern.azimuth_deg.size(); ++i) {
    os << pattern.azimuth_deg[i] << '\t' << pattern.gain_db[i] << '\n';
  }
  return os.str();
}

}  // namespace glasswave
