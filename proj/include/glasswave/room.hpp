// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shoebox image-source room simulation with fractional-delay taps, FFT
// convolution, and randomized room/placement sampling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "glasswave/core.hpp"
#include "glasswave/fft.hpp"
#include "glasswave/geometry.hpp"

namespace glasswave {

inline constexpr int kFractionalDelayTaps = 81;

/// Wall order for reflection coefficients: x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
struct RoomSpec {
  Eigen::Vector3d dimensions{6.0, 5.0, 3.0};
  std::array<double, 6> reflection{0.8, 0.8, 0.8, 0.8, 0.8, 0.8};
  int max_order = 17;
  double energy_cutoff_db = 60.0;  // images weaker than this below the direct path are skipped
  double sample_rate_hz = 16000.0;
  double speed_of_sound = kSpeedOfSound;

  void validate() const {
    if (!(dimensions.minCoeff() > 0.0) || !dimensions.allFinite()) {
      throw Error(ErrorKind::invalid_input, "room-sim", "room dimensions must be positive");
    }
    for (double b : reflection) {
      if (!(b >= 0.0 && b < 1.0)) throw Error(ErrorKind::invalid_input, "room-sim", "reflection coefficients must be in [0, 1)");
    }
    if (max_order < 0) throw Error(ErrorKind::invalid_input, "room-sim", "max_order must be >= 0");
    if (!(sample_rate_hz > 0.0)) throw Error(ErrorKind::invalid_input, "room-sim", "sample rate must be positive");
    if (!(energy_cutoff_db > 0.0)) throw Error(ErrorKind::invalid_input, "room-sim", "energy cutoff must be positive");
  }

  bool contains(const Eigen::Vector3d& p, double margin = 0.0) const {
    return (p.array() > margin).all() && (p.array() < dimensions.array() - margin).all();
  }
};

/// Uniform amplitude reflection coefficient reaching `rt60_s` by Eyring's
/// formula.
inline double eyring_reflection(const Eigen::Vector3d& dims, double rt60_s) {
  if (!(rt60_s > 0.0)) throw Error(ErrorKind::invalid_input, "room-sim", "RT60 must be positive");
  const double volume = dims.prod();
  const double surface = 2.0 * (dims.x() * dims.y() + dims.x() * dims.z() + dims.y() * dims.z());
  const double alpha = 1.0 - std::exp(-0.161 * volume / (surface * rt60_s));
  return std::sqrt(std::clamp(1.0 - alpha, 0.0, 1.0 - 1e-12));
}

/// Array placement in the room: position plus yaw about +z.
struct ArrayPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw_rad = 0.0;

  Eigen::Matrix3d rotation() const { return Eigen::AngleAxisd(yaw_rad, Eigen::Vector3d::UnitZ()).toRotationMatrix(); }
  Eigen::Vector3d to_world(const Eigen::Vector3d& local) const { return position + rotation() * local; }
};

struct Arrival {
  double delay_samples = 0.0;
  double amplitude = 0.0;
  int order = 0;
};

/// Every image source up to max_order (and above the energy cutoff) for one
/// source/microphone pair, in enumeration order.
inline std::vector<Arrival> image_arrivals(const RoomSpec& room, const Eigen::Vector3d& source,
                                           const Eigen::Vector3d& mic) {
  room.validate();
  const double direct = (source - mic).norm();
  if (!(direct > 1e-9)) throw Error(ErrorKind::degenerate_geometry, "room-sim", "source coincides with a microphone");
  const double direct_amp = 1.0 / (4.0 * kPi * direct);
  const double floor_amp = direct_amp * std::pow(10.0, -room.energy_cutoff_db / 20.0);
  const double to_samples = room.sample_rate_hz / room.speed_of_sound;

  // Image index i along one axis: even i -> s + i L, odd i -> (i + 1) L - s.
  // |i| reflections in total, split between the near (0) and far (L) walls.
  auto axis = [](int i, double s, double len, double beta_near, double beta_far, double& pos, double& gain) {
    const int a = std::abs(i);
    const int first = (a + 1) / 2;  // wall hit first gets the extra reflection when |i| is odd
    const int second = a / 2;
    pos = (i % 2 == 0) ? s + i * len : (i + 1) * len - s;
    if (i >= 0) {
      gain = std::pow(beta_far, first) * std::pow(beta_near, second);
    } else {
      gain = std::pow(beta_near, first) * std::pow(beta_far, second);
    }
  };

  std::vector<Arrival> out;
  const int n = room.max_order;
  const auto& L = room.dimensions;
  const auto& b = room.reflection;
  for (int ix = -n; ix <= n; ++ix) {
    double x, gx;
    axis(ix, source.x(), L.x(), b[0], b[1], x, gx);
    if (gx == 0.0) continue;
    const int ry = n - std::abs(ix);
    for (int iy = -ry; iy <= ry; ++iy) {
      double y, gy;
      axis(iy, source.y(), L.y(), b[2], b[3], y, gy);
      if (gy == 0.0) continue;
      const int rz = ry - std::abs(iy);
      for (int iz = -rz; iz <= rz; ++iz) {
        double z, gz;
        axis(iz, source.z(), L.z(), b[4], b[5], z, gz);
        const double dist = (Eigen::Vector3d(x, y, z) - mic).norm();
        const double amp = gx * gy * gz / (4.0 * kPi * dist);
        if (amp == 0.0 || amp < floor_amp) continue;
        out.push_back({dist * to_samples, amp, std::abs(ix) + std::abs(iy) + std::abs(iz)});
      }
    }
  }
  return out;
}

/// Adds an 81-tap Hann-windowed sinc centred on `delay` into `rir`. Taps
/// before index 0 or past the end are dropped.
inline void add_fractional_impulse(Eigen::VectorXd& rir, double delay, double amplitude) {
  constexpr double half = kFractionalDelayTaps / 2.0;  // 40.5
  const auto first = static_cast<long>(std::ceil(delay - half));
  const auto last = static_cast<long>(std::floor(delay + half));
  for (long i = std::max(first, 0L); i <= last && i < rir.size(); ++i) {
    const double x = static_cast<double>(i) - delay;
    if (std::abs(x) >= half) continue;
    const double window = 0.5 * (1.0 + std::cos(2.0 * kPi * x / kFractionalDelayTaps));
    const double s = x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
    rir(i) += amplitude * window * s;
  }
}

struct RirSet {
  std::vector<Eigen::Vector3d> sources;
  std::vector<Eigen::Vector3d> mic_positions;  // world frame
  std::vector<std::vector<Eigen::VectorXd>> rirs;  // [source][mic]
  double sample_rate_hz = 16000.0;
  RoomSpec room;
};

inline std::vector<Eigen::Vector3d> mic_world_positions(const ArrayGeometry& geometry, const ArrayPose& pose) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(geometry.size());
  for (const auto& m : geometry.mics()) out.push_back(pose.to_world(m));
  return out;
}

/// RIRs from each source to every microphone of the posed array. With
/// `length` = 0 the RIR is just long enough to hold the latest image tap.
inline RirSet simulate_rir(const RoomSpec& room, const std::vector<Eigen::Vector3d>& sources,
                           const ArrayGeometry& geometry, const ArrayPose& pose, std::size_t length = 0) {
  room.validate();
  RirSet set{sources, mic_world_positions(geometry, pose), {}, room.sample_rate_hz, room};
  for (std::size_t m = 0; m < set.mic_positions.size(); ++m) {
    if (!room.contains(set.mic_positions[m])) {
      throw Error(ErrorKind::invalid_input, "room-sim", "microphone " + std::to_string(m) + " is outside the room");
    }
  }
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (!room.contains(sources[s])) {
      throw Error(ErrorKind::invalid_input, "room-sim", "source " + std::to_string(s) + " is outside the room");
    }
    std::vector<Eigen::VectorXd> per_mic;
    for (const auto& mic : set.mic_positions) {
      const auto arrivals = image_arrivals(room, sources[s], mic);
      std::size_t n = length;
      if (n == 0) {
        double latest = 0.0;
        for (const auto& a : arrivals) latest = std::max(latest, a.delay_samples);
        n = static_cast<std::size_t>(std::ceil(latest + kFractionalDelayTaps / 2.0)) + 1;
      }
      Eigen::VectorXd rir = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      for (const auto& a : arrivals) add_fractional_impulse(rir, a.delay_samples, a.amplitude);
      per_mic.push_back(std::move(rir));
    }
    set.rirs.push_back(std::move(per_mic));
  }
  return set;
}

inline RirSet simulate_rir(const RoomSpec& room, const Eigen::Vector3d& source, const ArrayGeometry& geometry,
                           const ArrayPose& pose, std::size_t length = 0) {
  return simulate_rir(room, std::vector<Eigen::Vector3d>{source}, geometry, pose, length);
}

/// Full linear convolution via zero-padded FFTs.
inline Eigen::VectorXd fft_convolve(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() == 0 || b.size() == 0) return Eigen::VectorXd();
  const auto n = static_cast<std::size_t>(a.size() + b.size() - 1);
  const std::size_t nfft = fft::next_pow2(n);
  const Eigen::VectorXcd fa = fft::rfft(a, nfft);
  const Eigen::VectorXcd fb = fft::rfft(b, nfft);
  return fft::irfft(fa.cwiseProduct(fb), nfft).head(static_cast<Eigen::Index>(n));
}

/// Convolves a mono signal with the RIRs of one source; returns mics x
/// (len(signal) + len(rir) - 1), or mics x `truncate_to` when given.
inline Eigen::MatrixXd convolve_multichannel(const Eigen::VectorXd& signal, double signal_rate_hz, const RirSet& rirs,
                                             std::size_t source = 0, std::size_t truncate_to = 0) {
  if (signal_rate_hz != rirs.sample_rate_hz) {
    throw Error(ErrorKind::invalid_input, "room-sim", "signal and RIR sample rates differ");
  }
  if (source >= rirs.rirs.size()) throw Error(ErrorKind::invalid_input, "room-sim", "source index out of range");
  const auto& per_mic = rirs.rirs[source];
  Eigen::Index rir_len = 0;
  for (const auto& r : per_mic) rir_len = std::max(rir_len, r.size());
  const auto full = static_cast<std::size_t>(signal.size() + rir_len - 1);
  const std::size_t out_len = truncate_to == 0 ? full : truncate_to;
  const std::size_t nfft = fft::next_pow2(full);
  const Eigen::VectorXcd fs = fft::rfft(signal, nfft);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(per_mic.size()), static_cast<Eigen::Index>(out_len));
  const auto keep = static_cast<Eigen::Index>(std::min(out_len, full));
  for (std::size_t m = 0; m < per_mic.size(); ++m) {
    const Eigen::VectorXd y = fft::irfft(fs.cwiseProduct(fft::rfft(per_mic[m], nfft)), nfft);
    out.row(static_cast<Eigen::Index>(m)).head(keep) = y.head(keep).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Room and placement sampling

struct RoomRanges {
  Eigen::Vector3d min_dimensions{5.0, 5.0, 2.0};
  Eigen::Vector3d max_dimensions{10.0, 10.0, 6.0};
  double rt60_min_s = 0.2;
  double rt60_max_s = 0.6;
  double wall_margin = 0.3;
  double array_height_min = 1.2;
  double array_height_max = 1.8;
  double partner_max_azimuth_deg = 45.0;
  double partner_distance_min = 1.0;
  double partner_distance_max = 2.5;
  double bystander_distance_min = 1.5;
  double bystander_distance_max = 4.0;
  double noise_min_distance = 0.5;
  Eigen::Vector3d mouth_offset = default_mouth_offset();
  int max_order = 17;
  double sample_rate_hz = 16000.0;
  int max_tries = 1000;
};

struct ScenePlacements {
  ArrayPose array;
  Eigen::Vector3d wearer_mouth = Eigen::Vector3d::Zero();
  Eigen::Vector3d partner = Eigen::Vector3d::Zero();
  std::vector<Eigen::Vector3d> bystanders;
  Eigen::Vector3d noise = Eigen::Vector3d::Zero();
};

struct SampledRoom {
  RoomSpec room;
  ScenePlacements placements;
};

/// Draws a room from the configured size range and places wearer, partner,
/// `bystanders` distractors and one noise source. Deterministic for a given
/// generator state.
inline SampledRoom sample_room(std::mt19937_64& rng, const RoomRanges& ranges, std::size_t bystanders) {
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  SampledRoom out;
  RoomSpec& room = out.room;
  for (int i = 0; i < 3; ++i) room.dimensions(i) = uniform(ranges.min_dimensions(i), ranges.max_dimensions(i));
  room.reflection.fill(eyring_reflection(room.dimensions, uniform(ranges.rt60_min_s, ranges.rt60_max_s)));
  room.max_order = ranges.max_order;
  room.sample_rate_hz = ranges.sample_rate_hz;
  const double margin = ranges.wall_margin;

  auto place = [&](auto&& draw, const char* what) -> Eigen::Vector3d {
    for (int t = 0; t < ranges.max_tries; ++t) {
      const Eigen::Vector3d p = draw();
      if (room.contains(p, margin)) return p;
    }
    throw Error(ErrorKind::placement, "room-sim",
                std::string("could not place ") + what + " after " + std::to_string(ranges.max_tries) + " tries");
  };

  ScenePlacements& pl = out.placements;
  const double z_hi = std::min(ranges.array_height_max, room.dimensions.z() - margin - 0.05);
  const double z_lo = std::min(ranges.array_height_min, z_hi);
  auto around_array = [&](double az_lo, double az_hi, double d_lo, double d_hi, double dz_lo, double dz_hi) {
    const double az = pl.array.yaw_rad + uniform(az_lo, az_hi);
    const double d = uniform(d_lo, d_hi);
    return Eigen::Vector3d(pl.array.position.x() + d * std::cos(az), pl.array.position.y() + d * std::sin(az),
                           pl.array.position.z() + uniform(dz_lo, dz_hi));
  };
  const double sector = ranges.partner_max_azimuth_deg * kPi / 180.0;
  // The partner sector is tied to the wearer's heading; a wearer facing a
  // nearby wall gets a new pose.
  bool placed = false;
  for (int t = 0; t < ranges.max_tries && !placed; ++t) {
    pl.array.yaw_rad = uniform(0.0, 2.0 * kPi);
    pl.array.position = Eigen::Vector3d(uniform(margin, room.dimensions.x() - margin),
                                        uniform(margin, room.dimensions.y() - margin), uniform(z_lo, z_hi));
    pl.wearer_mouth = pl.array.to_world(ranges.mouth_offset);
    if (!room.contains(pl.array.position, margin) || !room.contains(pl.wearer_mouth, margin)) continue;
    for (int u = 0; u < 50 && !placed; ++u) {
      pl.partner = around_array(-sector, sector, ranges.partner_distance_min, ranges.partner_distance_max, -0.3, 0.1);
      placed = room.contains(pl.partner, margin);
    }
  }
  if (!placed) {
    throw Error(ErrorKind::placement, "room-sim",
                "could not place wearer and partner after " + std::to_string(ranges.max_tries) + " tries");
  }
  for (std::size_t b = 0; b < bystanders; ++b) {
    pl.bystanders.push_back(place([&] { return around_array(-kPi, kPi, ranges.bystander_distance_min,
                                                            ranges.bystander_distance_max, -0.3, 0.2); },
                                  "bystander"));
  }
  pl.noise = place(
      [&]() -> Eigen::Vector3d {
        const Eigen::Vector3d p(uniform(margin, room.dimensions.x() - margin),
                                uniform(margin, room.dimensions.y() - margin),
                                uniform(margin, room.dimensions.z() - margin));
        if ((p - pl.array.position).norm() < ranges.noise_min_distance) return Eigen::Vector3d::Constant(-1.0);
        return p;
      },
      "noise source");
  return out;
}

inline nlohmann::json vec_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

inline Eigen::Vector3d vec_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline nlohmann::json to_json(const RoomSpec& room) {
  return {{"dimensions", vec_json(room.dimensions)},
          {"reflection", room.reflection},
          {"max_order", room.max_order},
          {"energy_cutoff_db", room.energy_cutoff_db},
          {"sample_rate_hz", room.sample_rate_hz},
          {"speed_of_sound", room.speed_of_sound}};
}

inline RoomSpec room_from_json(const nlohmann::json& j) {
  RoomSpec room;
  room.dimensions = vec_from_json(j.at("dimensions"));
  room.reflection = j.at("reflection").get<std::array<double, 6>>();
  room.max_order = j.at("max_order").get<int>();
  room.energy_cutoff_db = j.value("energy_cutoff_db", 60.0);
  room.sample_rate_hz = j.at("sample_rate_hz").get<double>();
  room.speed_of_sound = j.value("speed_of_sound", kSpeedOfSound);
  return room;
}

inline nlohmann::json to_json(const ScenePlacements& p) {
  nlohmann::json bys = nlohmann::json::array();
  for (const auto& b : p.bystanders) bys.push_back(vec_json(b));
  return {{"array_position", vec_json(p.array.position)},
          {"array_yaw_rad", p.array.yaw_rad},
          {"wearer_mouth", vec_json(p.wearer_mouth)},
          {"partner", vec_json(p.partner)},
          {"bystanders", bys},
          {"noise", vec_json(p.noise)}};
}

inline ScenePlacements placements_from_json(const nlohmann::json& j) {
  ScenePlacements p;
  p.array.position = vec_from_json(j.at("array_position"));
  p.array.yaw_rad = j.at("array_yaw_rad").get<double>();
  p.wearer_mouth = vec_from_json(j.at("wearer_mouth"));
  p.partner = vec_from_json(j.at("partner"));
  for (const auto& b : j.at("bystanders")) p.bystanders.push_back(vec_from_json(b));
  p.noise = vec_from_json(j.at("noise"));
  return p;
}

}  // namespace glasswave
