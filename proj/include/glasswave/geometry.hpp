// SPDX-License-Identifier: Apache-2.0
#pragma once

// Microphone array model: geometry, propagation (steering vectors) and the
// spherically isotropic diffuse-noise coherence.
//
// Frame convention (array-centered): +x forward, +y left, +z up. Azimuth is
// measured from +x toward +y, so 0 deg is straight ahead and 90 deg is the
// wearer's left. Elevation is measured from the horizontal plane.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "glasswave/core.hpp"

namespace glasswave {

struct Direction {
  double azimuth_rad = 0.0;
  double elevation_rad = 0.0;

  static Direction degrees(double azimuth_deg, double elevation_deg = 0.0) {
    return {azimuth_deg * kPi / 180.0, elevation_deg * kPi / 180.0};
  }

  Eigen::Vector3d unit() const {
    const double ce = std::cos(elevation_rad);
    return {ce * std::cos(azimuth_rad), ce * std::sin(azimuth_rad), std::sin(elevation_rad)};
  }
};

struct Point {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

using SourceDescriptor = std::variant<Direction, Point>;

enum class PropagationModel { far_field, near_field };

inline PropagationModel default_model(const SourceDescriptor& source) {
  return std::holds_alternative<Point>(source) ? PropagationModel::near_field : PropagationModel::far_field;
}

class ArrayGeometry {
 public:
  static constexpr double kMaxPairDistance = 0.5;

  ArrayGeometry(std::vector<Eigen::Vector3d> mics, std::size_t reference_index, std::string name = "array")
      : mics_(std::move(mics)), reference_index_(reference_index), name_(std::move(name)) {
    if (mics_.empty()) throw Error(ErrorKind::invalid_input, "array-geometry", "array needs at least one microphone");
    if (reference_index_ >= mics_.size()) {
      throw Error(ErrorKind::invalid_input, "array-geometry",
                  "reference_index " + std::to_string(reference_index_) + " out of range for " +
                      std::to_string(mics_.size()) + " microphones");
    }
    for (std::size_t i = 0; i < mics_.size(); ++i) {
      if (!mics_[i].allFinite()) {
        throw Error(ErrorKind::invalid_input, "array-geometry", "microphone " + std::to_string(i) + " is not finite");
      }
      for (std::size_t j = i + 1; j < mics_.size(); ++j) {
        const double d = (mics_[i] - mics_[j]).norm();
        if (d >= kMaxPairDistance) {
          throw Error(ErrorKind::invalid_input, "array-geometry",
                      "microphones " + std::to_string(i) + " and " + std::to_string(j) + " are " + std::to_string(d) +
                          " m apart (wearable arrays must stay below 0.5 m)");
        }
      }
    }
  }

  std::size_t size() const noexcept { return mics_.size(); }
  const Eigen::Vector3d& mic(std::size_t i) const { return mics_.at(i); }
  const std::vector<Eigen::Vector3d>& mics() const noexcept { return mics_; }
  std::size_t reference_index() const noexcept { return reference_index_; }
  const std::string& name() const noexcept { return name_; }
  double distance(std::size_t i, std::size_t j) const { return (mics_.at(i) - mics_.at(j)).norm(); }

 private:
  std::vector<Eigen::Vector3d> mics_;
  std::size_t reference_index_;
  std::string name_;
};

/// Seven-microphone glasses-like layout. The coordinates are a plausible
/// stand-in (front rim, nose bridge, temples), not measured hardware values.
inline ArrayGeometry glasses_preset() {
  return ArrayGeometry(
      {
          {0.010, 0.000, 0.018},    // nose bridge (reference)
          {0.005, 0.065, 0.020},    // left front rim, upper
          {0.005, -0.065, 0.020},   // right front rim, upper
          {-0.060, 0.072, 0.005},   // left temple
          {-0.060, -0.072, 0.005},  // right temple
          {0.008, 0.030, -0.020},   // left front rim, lower
          {0.008, -0.035, -0.020},  // right front rim, lower
      },
      0, "glasses-7 (non-authoritative stand-in)");
}

/// Wearer mouth position in the array frame: 7 cm below and 4 cm in front
/// of the array origin.
inline Eigen::Vector3d default_mouth_offset() { return {0.04, 0.0, -0.07}; }

class FrequencyGrid {
 public:
  FrequencyGrid(double sample_rate_hz, std::size_t fft_size, std::size_t retained_bins)
      : sample_rate_hz_(sample_rate_hz), fft_size_(fft_size), retained_bins_(retained_bins) {
    if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_)) {
      throw Error(ErrorKind::invalid_input, "array-geometry", "sample rate must be positive");
    }
    if (fft_size_ < 2 || fft_size_ % 2 != 0) {
      throw Error(ErrorKind::invalid_input, "array-geometry", "fft_size must be a positive even integer");
    }
    if (retained_bins_ < 1 || retained_bins_ > fft_size_ / 2 + 1) {
      throw Error(ErrorKind::invalid_input, "array-geometry", "retained bin count must be in [1, fft_size/2 + 1]");
    }
  }

  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  std::size_t fft_size() const noexcept { return fft_size_; }
  std::size_t bins() const noexcept { return retained_bins_; }
  double spacing_hz() const noexcept { return sample_rate_hz_ / static_cast<double>(fft_size_); }
  double frequency_hz(std::size_t k) const noexcept { return static_cast<double>(k) * spacing_hz(); }
  double omega(std::size_t k) const noexcept { return 2.0 * kPi * frequency_hz(k); }

  std::vector<double> frequencies_hz() const {
    std::vector<double> f(retained_bins_);
    for (std::size_t k = 0; k < retained_bins_; ++k) f[k] = frequency_hz(k);
    return f;
  }

  bool operator==(const FrequencyGrid&) const = default;

 private:
  double sample_rate_hz_;
  std::size_t fft_size_;
  std::size_t retained_bins_;
};

/// g(jw) for every retained bin: column k holds the M-vector at bin k.
struct ChannelResponse {
  Eigen::MatrixXcd g;
  SourceDescriptor source;
  PropagationModel model = PropagationModel::far_field;

  std::size_t mics() const noexcept { return static_cast<std::size_t>(g.rows()); }
  std::size_t bins() const noexcept { return static_cast<std::size_t>(g.cols()); }
  Eigen::VectorXcd at(std::size_t k) const { return g.col(static_cast<Eigen::Index>(k)); }
};

/// One Hermitian M x M matrix per retained bin.
struct CovarianceMatrix {
  std::vector<Eigen::MatrixXcd> per_bin;

  std::size_t bins() const noexcept { return per_bin.size(); }
  const Eigen::MatrixXcd& at(std::size_t k) const { return per_bin.at(k); }
};

/// Response vector at a single frequency. Entries are relative to the
/// reference microphone, so the reference entry is always 1.
inline Eigen::VectorXcd steering_vector_at(const ArrayGeometry& geometry, const SourceDescriptor& source,
                                           double frequency_hz, PropagationModel model,
                                           double speed_of_sound = kSpeedOfSound) {
  const auto m_count = static_cast<Eigen::Index>(geometry.size());
  const std::size_t ref = geometry.reference_index();
  const double omega = 2.0 * kPi * frequency_hz;
  Eigen::VectorXcd g(m_count);

  if (model == PropagationModel::far_field) {
    const auto* dir = std::get_if<Direction>(&source);
    if (dir == nullptr) throw Error(ErrorKind::invalid_input, "array-geometry", "far-field model needs a direction");
    const Eigen::Vector3d u = dir->unit();
    for (Eigen::Index m = 0; m < m_count; ++m) {
      // A plane wave from direction u reaches mic m earlier than the
      // reference by (p_m - p_ref).u / c.
      const double tau = -(geometry.mic(static_cast<std::size_t>(m)) - geometry.mic(ref)).dot(u) / speed_of_sound;
      g(m) = std::polar(1.0, -omega * tau);
    }
    return g;
  }

  const auto* pt = std::get_if<Point>(&source);
  if (pt == nullptr) throw Error(ErrorKind::invalid_input, "array-geometry", "near-field model needs a 3-D point");
  std::vector<double> d(geometry.size());
  for (std::size_t m = 0; m < geometry.size(); ++m) {
    d[m] = (pt->position - geometry.mic(m)).norm();
    if (!(d[m] > 1e-9)) {
      throw Error(ErrorKind::degenerate_geometry, "array-geometry",
                  "source point coincides with microphone " + std::to_string(m));
    }
  }
  for (Eigen::Index m = 0; m < m_count; ++m) {
    const auto mi = static_cast<std::size_t>(m);
    g(m) = std::polar(d[ref] / d[mi], -omega * (d[mi] - d[ref]) / speed_of_sound);
  }
  return g;
}

inline ChannelResponse steering_vector(const ArrayGeometry& geometry, const SourceDescriptor& source,
                                       const FrequencyGrid& grid, PropagationModel model,
                                       double speed_of_sound = kSpeedOfSound) {
  ChannelResponse response{Eigen::MatrixXcd(static_cast<Eigen::Index>(geometry.size()),
                                            static_cast<Eigen::Index>(grid.bins())),
                           source, model};
  for (std::size_t k = 0; k < grid.bins(); ++k) {
    response.g.col(static_cast<Eigen::Index>(k)) =
        steering_vector_at(geometry, source, grid.frequency_hz(k), model, speed_of_sound);
  }
  return response;
}

inline ChannelResponse steering_vector(const ArrayGeometry& geometry, const SourceDescriptor& source,
                                       const FrequencyGrid& grid) {
  return steering_vector(geometry, source, grid, default_model(source));
}

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

/// Spherically isotropic diffuse field: coherence sinc(w d_ij / c).
inline Eigen::MatrixXcd diffuse_coherence_at(const ArrayGeometry& geometry, double frequency_hz,
                                             double speed_of_sound = kSpeedOfSound) {
  const auto m_count = static_cast<Eigen::Index>(geometry.size());
  const double omega = 2.0 * kPi * frequency_hz;
  Eigen::MatrixXcd phi(m_count, m_count);
  for (Eigen::Index i = 0; i < m_count; ++i) {
    phi(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < m_count; ++j) {
      const double v = sinc(omega * geometry.distance(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) /
                            speed_of_sound);
      phi(i, j) = v;
      phi(j, i) = v;
    }
  }
  return phi;
}

inline CovarianceMatrix diffuse_covariance(const ArrayGeometry& geometry, const FrequencyGrid& grid,
                                           double speed_of_sound = kSpeedOfSound) {
  CovarianceMatrix cov;
  cov.per_bin.reserve(grid.bins());
  for (std::size_t k = 0; k < grid.bins(); ++k) {
    cov.per_bin.push_back(diffuse_coherence_at(geometry, grid.frequency_hz(k), speed_of_sound));
  }
  return cov;
}

// Geometry config file: {"name": ..., "reference_index": i, "mics": [[x,y,z], ...]}

inline ArrayGeometry geometry_from_json(const nlohmann::json& j) {
  try {
    std::vector<Eigen::Vector3d> mics;
    for (const auto& p : j.at("mics")) {
      if (!p.is_array() || p.size() != 3) {
        throw Error(ErrorKind::invalid_input, "array-geometry", "each microphone must be an [x, y, z] triple");
      }
      mics.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    }
    const auto ref = j.value("reference_index", std::size_t{0});
    return ArrayGeometry(std::move(mics), ref, j.value("name", std::string("array")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, "array-geometry", std::string("malformed geometry: ") + e.what());
  }
}

inline nlohmann::json to_json(const ArrayGeometry& geometry) {
  nlohmann::json mics = nlohmann::json::array();
  for (const auto& m : geometry.mics()) mics.push_back({m.x(), m.y(), m.z()});
  return {{"name", geometry.name()}, {"reference_index", geometry.reference_index()}, {"mics", mics}};
}

inline ArrayGeometry load_geometry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "array-geometry", "cannot open geometry file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, "array-geometry", "malformed geometry file " + path.string() + ": " + e.what());
  }
  return geometry_from_json(j);
}

inline void save_geometry(const ArrayGeometry& geometry, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "array-geometry", "cannot write " + path.string());
  out << to_json(geometry).dump(2) << '\n';
}

inline nlohmann::json to_json(const SourceDescriptor& source) {
  if (const auto* d = std::get_if<Direction>(&source)) {
    return {{"type", "direction"},
            {"azimuth_deg", d->azimuth_rad * 180.0 / kPi},
            {"elevation_deg", d->elevation_rad * 180.0 / kPi}};
  }
  const auto& p = std::get<Point>(source).position;
  return {{"type", "point"}, {"position", {p.x(), p.y(), p.z()}}};
}

inline SourceDescriptor source_from_json(const nlohmann::json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "direction") {
      return Direction::degrees(j.at("azimuth_deg").get<double>(), j.value("elevation_deg", 0.0));
    }
    if (type == "point") {
      const auto& p = j.at("position");
      return Point{{p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()}};
    }
    throw Error(ErrorKind::invalid_input, "array-geometry", "unknown source type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, "array-geometry", std::string("malformed source descriptor: ") + e.what());
  }
}

}  // namespace glasswave
