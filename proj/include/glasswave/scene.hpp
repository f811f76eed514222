// SPDX-License-Identifier: Apache-2.0
#pragma once

// Conversational scene rendering: wearer, partner, bystanders and ambient
// noise in a simulated room, with exact SNR and overlap-ratio control, plus
// reproducible batch dataset generation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "glasswave/core.hpp"
#include "glasswave/fft.hpp"
#include "glasswave/geometry.hpp"
#include "glasswave/room.hpp"
#include "glasswave/wav.hpp"

namespace glasswave {

/// Half-open sample interval [begin, end).
struct Interval {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end > begin ? end - begin : 0; }
  bool operator==(const Interval&) const = default;
};

struct AudioAsset {
  std::string id;
  Eigen::VectorXd samples;
  double sample_rate_hz = 16000.0;
  std::vector<Interval> active;  // empty means active throughout
  std::string path;

  std::vector<Interval> activity() const {
    if (active.empty()) return {{0, static_cast<std::size_t>(samples.size())}};
    return active;
  }
};

inline Eigen::VectorXd pink_noise(std::size_t length, std::uint64_t seed);

class AssetLibrary {
 public:
  void add_speech(AudioAsset a) { speech_.push_back(std::move(a)); }
  void add_noise(AudioAsset a) { noise_.push_back(std::move(a)); }

  const std::vector<AudioAsset>& speech() const noexcept { return speech_; }
  const std::vector<AudioAsset>& noise() const noexcept { return noise_; }

  const AudioAsset& find(const std::string& id) const {
    for (const auto* list : {&speech_, &noise_}) {
      for (const auto& a : *list) {
        if (a.id == id) return a;
      }
    }
    throw Error(ErrorKind::invalid_input, "scene-synth", "missing audio asset '" + id + "'");
  }

  /// Index file: {"speech": [{"id", "path", "active": [[start_s, end_s], ...]}], "noise": [...]}.
  /// Paths are relative to the index file. Assets must be mono.
  static AssetLibrary load(const std::filesystem::path& index_path) {
    std::ifstream in(index_path);
    if (!in) throw Error(ErrorKind::io, "scene-synth", "cannot open asset index " + index_path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::invalid_input, "scene-synth", std::string("malformed asset index: ") + e.what());
    }
    AssetLibrary lib;
    const auto base = index_path.parent_path();
    auto load_list = [&](const char* key, bool speech) {
      if (!j.contains(key)) return;
      for (const auto& entry : j.at(key)) {
        AudioAsset a;
        a.id = entry.at("id").get<std::string>();
        a.path = entry.at("path").get<std::string>();
        const auto wav = read_wav(base / a.path);
        if (wav.samples.rows() != 1) {
          throw Error(ErrorKind::invalid_input, "scene-synth", "asset '" + a.id + "' is not mono");
        }
        a.samples = wav.samples.row(0).transpose();
        a.sample_rate_hz = wav.sample_rate_hz;
        if (entry.contains("active")) {
          for (const auto& iv : entry.at("active")) {
            a.active.push_back({static_cast<std::size_t>(std::lround(iv.at(0).get<double>() * a.sample_rate_hz)),
                                static_cast<std::size_t>(std::lround(iv.at(1).get<double>() * a.sample_rate_hz))});
          }
        }
        speech ? lib.add_speech(std::move(a)) : lib.add_noise(std::move(a));
      }
    };
    load_list("speech", true);
    load_list("noise", false);
    if (lib.speech_.empty()) throw Error(ErrorKind::invalid_input, "scene-synth", "asset index lists no speech");
    if (lib.noise_.empty()) {
      const double fs = lib.speech_.front().sample_rate_hz;
      lib.add_noise({"pink_fallback", pink_noise(static_cast<std::size_t>(10.0 * fs), 0x9171C) * 0.1, fs, {}, ""});
    }
    return lib;
  }

  /// Writes every asset as float-32 WAV next to an index file.
  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json j{{"speech", nlohmann::json::array()}, {"noise", nlohmann::json::array()}};
    auto dump = [&](const std::vector<AudioAsset>& list, const char* key) {
      for (const auto& a : list) {
        const std::string file = a.id + ".wav";
        write_wav(dir / file, a.samples, a.sample_rate_hz);
        j[key].push_back({{"id", a.id}, {"path", file}});
      }
    };
    dump(speech_, "speech");
    dump(noise_, "noise");
    std::ofstream out(dir / "index.json");
    out << j.dump(2) << '\n';
  }

 private:
  std::vector<AudioAsset> speech_;
  std::vector<AudioAsset> noise_;
};

inline double rms(const Eigen::VectorXd& x) {
  return x.size() == 0 ? 0.0 : std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
}

/// Pink (1/f power) noise, unit RMS.
inline Eigen::VectorXd pink_noise(std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t nfft = fft::next_pow2(std::max<std::size_t>(length, 2));
  Eigen::VectorXcd spec(static_cast<Eigen::Index>(nfft / 2 + 1));
  spec(0) = 0.0;
  for (std::size_t k = 1; k <= nfft / 2; ++k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(k));
    spec(static_cast<Eigen::Index>(k)) = cdouble(normal(rng), normal(rng)) * scale;
  }
  Eigen::VectorXd x = fft::irfft(spec, nfft).head(static_cast<Eigen::Index>(length));
  return x / rms(x);
}

/// Voiced, syllable-modulated harmonic complex that stands in for a speech
/// utterance in tests and demos. RMS 0.1.
inline Eigen::VectorXd speech_like(double duration_s, double f0_hz, std::uint64_t seed, double sample_rate_hz) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const auto n = static_cast<std::size_t>(std::lround(duration_s * sample_rate_hz));
  const double formant1 = uniform(400.0, 900.0);
  const double formant2 = uniform(1100.0, 2400.0);
  const double syllable_rate = uniform(3.0, 5.5);
  const double vibrato_rate = uniform(3.5, 6.0);
  const double syllable_phase = uniform(0.0, 2.0 * kPi);
  const int harmonics = static_cast<int>(std::floor(4000.0 / (f0_hz * 1.1)));
  std::vector<double> phases(static_cast<std::size_t>(harmonics));
  for (auto& p : phases) p = uniform(0.0, 2.0 * kPi);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate_hz;
    const double f0 = f0_hz * (1.0 + 0.06 * std::sin(2.0 * kPi * vibrato_rate * t));
    phase += 2.0 * kPi * f0 / sample_rate_hz;
    double v = 0.0;
    for (int h = 1; h <= harmonics; ++h) {
      const double fh = f0 * h;
      const double env = std::exp(-0.5 * std::pow((fh - formant1) / 250.0, 2)) +
                         0.6 * std::exp(-0.5 * std::pow((fh - formant2) / 350.0, 2)) + 0.05;
      v += env / h * std::sin(h * phase + phases[static_cast<std::size_t>(h - 1)]);
    }
    const double syllable = 0.5 - 0.5 * std::cos(2.0 * kPi * syllable_rate * t + syllable_phase);
    const double fade = std::min({1.0, t / 0.02, (duration_s - t) / 0.02});
    x(static_cast<Eigen::Index>(i)) = v * (0.15 + 0.85 * syllable) * std::max(fade, 0.0);
  }
  return x * (0.1 / rms(x));
}

/// The built-in 20-clip fixture set: 16 speech-like clips and 4 noise clips
/// (pink noise and noise bursts).
inline AssetLibrary fixture_library(double sample_rate_hz = 16000.0) {
  AssetLibrary lib;
  for (int i = 0; i < 16; ++i) {
    const auto seed = derive_seed(0xF1C7u, 1, static_cast<std::uint64_t>(i));
    const double duration = 1.0 + 0.04 * static_cast<double>(i % 16);
    const double f0 = 95.0 + 11.0 * static_cast<double>((i * 7) % 16);
    char id[32];
    std::snprintf(id, sizeof id, "speech_%02d", i);
    lib.add_speech({id, speech_like(duration, f0, seed, sample_rate_hz), sample_rate_hz, {}, ""});
  }
  for (int i = 0; i < 4; ++i) {
    const auto seed = derive_seed(0xF1C7u, 2, static_cast<std::uint64_t>(i));
    const auto n = static_cast<std::size_t>(3.0 * sample_rate_hz);
    Eigen::VectorXd x = pink_noise(n, seed);
    if (i >= 2) {
      // Noise bursts: 250 ms on / off gating with short ramps.
      for (std::size_t t = 0; t < n; ++t) {
        const double s = std::fmod(static_cast<double>(t) / sample_rate_hz, 0.5);
        x(static_cast<Eigen::Index>(t)) *= s < 0.25 ? std::min({1.0, s / 0.01, (0.25 - s) / 0.01}) : 0.05;
      }
      x /= rms(x);
    }
    char id[32];
    std::snprintf(id, sizeof id, "noise_%02d", i);
    lib.add_noise({id, x * 0.1, sample_rate_hz, {}, ""});
  }
  return lib;
}

// ---------------------------------------------------------------------------
// SNR and overlap control

/// Gain applied to the noise so that 10 log10(P_speech / (g^2 P_noise))
/// equals the target, with P the full-signal mean square.
inline double snr_gain(const Eigen::VectorXd& speech_ref, const Eigen::VectorXd& noise, double target_snr_db) {
  const double p_noise = noise.size() == 0 ? 0.0 : noise.squaredNorm() / static_cast<double>(noise.size());
  if (!(p_noise > 0.0)) throw Error(ErrorKind::invalid_input, "scene-synth", "noise input is silent");
  const double p_speech = speech_ref.squaredNorm() / static_cast<double>(speech_ref.size());
  return std::sqrt(p_speech / (p_noise * std::pow(10.0, target_snr_db / 10.0)));
}

inline double measured_snr_db(const Eigen::VectorXd& speech_ref, const Eigen::VectorXd& noise) {
  return 10.0 * std::log10((speech_ref.squaredNorm() / static_cast<double>(speech_ref.size())) /
                           (noise.squaredNorm() / static_cast<double>(noise.size())));
}

inline std::size_t interval_overlap(const std::vector<Interval>& active, Interval probe) {
  std::size_t total = 0;
  for (const auto& iv : active) {
    const std::size_t b = std::max(iv.begin, probe.begin);
    const std::size_t e = std::min(iv.end, probe.end);
    if (e > b) total += e - b;
  }
  return total;
}

/// Start offset in [0, scene_length - bystander_length] whose overlap with
/// `main_active` is `ratio` of the bystander length (within 1 %; exactly
/// zero when ratio is 0), drawn uniformly from all qualifying offsets.
inline std::size_t place_overlap(const std::vector<Interval>& main_active, std::size_t bystander_length,
                                 std::size_t scene_length, double ratio, std::mt19937_64& rng) {
  if (bystander_length == 0 || bystander_length > scene_length) {
    throw Error(ErrorKind::placement, "scene-synth", "bystander segment does not fit the scene");
  }
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(ErrorKind::invalid_input, "scene-synth", "overlap ratio must be in [0, 1]");
  std::vector<std::size_t> prefix(scene_length + 1, 0);
  std::vector<char> active(scene_length, 0);
  for (const auto& iv : main_active) {
    for (std::size_t i = iv.begin; i < std::min(iv.end, scene_length); ++i) active[i] = 1;
  }
  for (std::size_t i = 0; i < scene_length; ++i) prefix[i + 1] = prefix[i] + static_cast<std::size_t>(active[i]);

  constexpr double kSelectionTolerance = 0.01;
  std::vector<std::size_t> candidates;
  for (std::size_t o = 0; o + bystander_length <= scene_length; ++o) {
    const std::size_t ov = prefix[o + bystander_length] - prefix[o];
    const double frac = static_cast<double>(ov) / static_cast<double>(bystander_length);
    if (ratio == 0.0 ? ov == 0 : std::abs(frac - ratio) <= kSelectionTolerance) candidates.push_back(o);
  }
  if (candidates.empty()) {
    throw Error(ErrorKind::placement, "scene-synth",
                "no bystander offset achieves overlap ratio " + std::to_string(ratio) + " in this timeline");
  }
  return candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
}

// ---------------------------------------------------------------------------
// Scenes

struct SceneManifest {
  std::string scene_id;
  std::uint64_t seed = 0;
  SampledRoom room;
  std::string wearer;
  std::string partner;
  std::vector<std::string> bystanders;
  std::string noise;
  double target_snr_db = 10.0;
  double overlap_ratio = 0.25;
  double lead_s = 0.1;
  double gap_s = 0.2;
  bool mute_noise = false;

  std::size_t bystander_count() const noexcept { return bystanders.size(); }
};

struct Stem {
  std::string role;  // wearer | partner | bystander_<i> | noise
  std::string asset;
  Interval placement;
  Eigen::MatrixXd audio;  // mics x samples, reverberant
};

struct SceneAudio {
  std::string scene_id;
  Eigen::MatrixXd mixture;
  std::vector<Stem> stems;
  double sample_rate_hz = 16000.0;
  std::size_t reference_index = 0;
  double noise_gain = 0.0;
  double realized_snr_db = 0.0;
  std::vector<double> realized_overlap;  // per bystander
  std::vector<Interval> main_active;

  const Stem& stem(const std::string& role) const {
    for (const auto& s : stems) {
      if (s.role == role) return s;
    }
    throw Error(ErrorKind::invalid_input, "scene-synth", "scene has no stem '" + role + "'");
  }

  Eigen::VectorXd reference(const std::string& role) const {
    return stem(role).audio.row(static_cast<Eigen::Index>(reference_index)).transpose();
  }

  Eigen::VectorXd mixture_reference() const {
    return mixture.row(static_cast<Eigen::Index>(reference_index)).transpose();
  }
};

struct SceneSampling {
  RoomRanges ranges;
  int snr_min_db = -8;
  int snr_max_db = 40;
  double overlap_min = 0.05;
  double overlap_max = 0.5;
};

/// Draws a complete manifest from a seed: room, placements, assets, SNR on
/// the integer ladder and the bystander overlap ratio.
inline SceneManifest sample_manifest(std::uint64_t seed, std::size_t bystanders, const SceneSampling& sampling,
                                     const AssetLibrary& assets, std::string scene_id) {
  if (assets.speech().size() < 2 + bystanders || assets.noise().empty()) {
    throw Error(ErrorKind::invalid_input, "scene-synth", "asset library too small for the requested scene");
  }
  std::mt19937_64 rng(seed);
  SceneManifest m;
  m.scene_id = std::move(scene_id);
  m.seed = seed;
  m.room = sample_room(rng, sampling.ranges, bystanders);
  std::vector<std::size_t> order(assets.speech().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {  // partial Fisher-Yates, portable
    const std::size_t j = i + std::uniform_int_distribution<std::size_t>(0, order.size() - 1 - i)(rng);
    std::swap(order[i], order[j]);
  }
  m.wearer = assets.speech()[order[0]].id;
  m.partner = assets.speech()[order[1]].id;
  for (std::size_t b = 0; b < bystanders; ++b) m.bystanders.push_back(assets.speech()[order[2 + b]].id);
  m.noise = assets.noise()[std::uniform_int_distribution<std::size_t>(0, assets.noise().size() - 1)(rng)].id;
  m.target_snr_db = std::uniform_int_distribution<int>(sampling.snr_min_db, sampling.snr_max_db)(rng);
  m.overlap_ratio = std::uniform_real_distribution<double>(sampling.overlap_min, sampling.overlap_max)(rng);
  return m;
}

/// Renders a manifest. Wearer and partner take turns (wearer first), each
/// bystander is trimmed to at most the main-speaker block and placed by
/// `place_overlap`, and a silent tail as long as the longest bystander keeps
/// every ratio in [0, 1) feasible. Noise is looped over the whole scene and
/// scaled to the target SNR. mixture is the sum of the stems in order.
inline SceneAudio synthesize_scene(const SceneManifest& manifest, const AssetLibrary& assets,
                                   const ArrayGeometry& geometry) {
  const double fs = manifest.room.room.sample_rate_hz;
  auto get = [&](const std::string& id) -> const AudioAsset& {
    const auto& a = assets.find(id);
    if (a.sample_rate_hz != fs) {
      throw Error(ErrorKind::invalid_input, "scene-synth", "asset '" + id + "' sample rate differs from the room");
    }
    if (a.samples.size() == 0) throw Error(ErrorKind::invalid_input, "scene-synth", "asset '" + id + "' is empty");
    return a;
  };
  const auto& wearer = get(manifest.wearer);
  const auto& partner = get(manifest.partner);
  const auto& noise = get(manifest.noise);

  const auto lead = static_cast<std::size_t>(std::lround(manifest.lead_s * fs));
  const auto gap = static_cast<std::size_t>(std::lround(manifest.gap_s * fs));
  const auto wearer_len = static_cast<std::size_t>(wearer.samples.size());
  const auto partner_len = static_cast<std::size_t>(partner.samples.size());
  const Interval wearer_iv{lead, lead + wearer_len};
  const Interval partner_iv{wearer_iv.end + gap, wearer_iv.end + gap + partner_len};
  const std::size_t main_block = partner_iv.end - lead;

  std::vector<std::size_t> bystander_len;
  std::size_t tail = 0;
  for (const auto& id : manifest.bystanders) {
    bystander_len.push_back(std::min(static_cast<std::size_t>(get(id).samples.size()), main_block));
    tail = std::max(tail, bystander_len.back());
  }
  const std::size_t scene_len = partner_iv.end + tail + lead;

  SceneAudio scene;
  scene.scene_id = manifest.scene_id;
  scene.sample_rate_hz = fs;
  scene.reference_index = geometry.reference_index();
  for (const auto& iv : wearer.activity()) scene.main_active.push_back({iv.begin + wearer_iv.begin, iv.end + wearer_iv.begin});
  for (const auto& iv : partner.activity()) scene.main_active.push_back({iv.begin + partner_iv.begin, iv.end + partner_iv.begin});

  std::mt19937_64 rng(derive_seed(manifest.seed, 0x5CE7E));
  struct Dry {
    std::string role, asset;
    Interval placement;
    Eigen::VectorXd signal;
    Eigen::Vector3d position;
  };
  std::vector<Dry> dry;
  auto place_signal = [&](const Eigen::VectorXd& src, Interval iv) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(scene_len));
    x.segment(static_cast<Eigen::Index>(iv.begin), static_cast<Eigen::Index>(iv.length())) =
        src.head(static_cast<Eigen::Index>(iv.length()));
    return x;
  };
  const auto& pl = manifest.room.placements;
  dry.push_back({"wearer", wearer.id, wearer_iv, place_signal(wearer.samples, wearer_iv), pl.wearer_mouth});
  dry.push_back({"partner", partner.id, partner_iv, place_signal(partner.samples, partner_iv), pl.partner});
  if (pl.bystanders.size() != manifest.bystanders.size()) {
    throw Error(ErrorKind::invalid_input, "scene-synth", "bystander placements and assets differ in count");
  }
  for (std::size_t b = 0; b < manifest.bystanders.size(); ++b) {
    const auto& asset = get(manifest.bystanders[b]);
    const std::size_t offset = place_overlap(scene.main_active, bystander_len[b], scene_len, manifest.overlap_ratio, rng);
    const Interval iv{offset, offset + bystander_len[b]};
    scene.realized_overlap.push_back(static_cast<double>(interval_overlap(scene.main_active, iv)) /
                                     static_cast<double>(iv.length()));
    dry.push_back({"bystander_" + std::to_string(b + 1), asset.id, iv, place_signal(asset.samples, iv), pl.bystanders[b]});
  }
  {
    Eigen::VectorXd x(static_cast<Eigen::Index>(scene_len));
    const auto n = static_cast<std::size_t>(noise.samples.size());
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (std::size_t i = 0; i < scene_len; ++i) x(static_cast<Eigen::Index>(i)) = noise.samples(static_cast<Eigen::Index>((start + i) % n));
    dry.push_back({"noise", noise.id, {0, scene_len}, std::move(x), pl.noise});
  }

  std::vector<Eigen::Vector3d> positions;
  for (const auto& d : dry) positions.push_back(d.position);
  RirSet rirs;
  try {
    rirs = simulate_rir(manifest.room.room, positions, geometry, pl.array);
  } catch (const Error& e) {
    throw Error(e.kind(), e.module(), "scene " + manifest.scene_id + ": " + e.detail());
  }
  for (std::size_t s = 0; s < dry.size(); ++s) {
    scene.stems.push_back({dry[s].role, dry[s].asset, dry[s].placement,
                           convolve_multichannel(dry[s].signal, fs, rirs, s, scene_len)});
  }

  const auto ref = static_cast<Eigen::Index>(scene.reference_index);
  Eigen::VectorXd speech_ref = scene.stems[0].audio.row(ref).transpose() + scene.stems[1].audio.row(ref).transpose();
  Stem& noise_stem = scene.stems.back();
  scene.noise_gain = manifest.mute_noise ? 0.0
                                         : snr_gain(speech_ref, noise_stem.audio.row(ref).transpose(), manifest.target_snr_db);
  noise_stem.audio *= scene.noise_gain;
  scene.realized_snr_db = scene.noise_gain > 0.0 ? measured_snr_db(speech_ref, noise_stem.audio.row(ref).transpose())
                                                 : std::numeric_limits<double>::infinity();

  scene.mixture = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(geometry.size()), static_cast<Eigen::Index>(scene_len));
  for (const auto& s : scene.stems) scene.mixture += s.audio;
  return scene;
}

inline nlohmann::json to_json(const SceneManifest& m) {
  return {{"scene_id", m.scene_id},
          {"seed", m.seed},
          {"room", to_json(m.room.room)},
          {"placements", to_json(m.room.placements)},
          {"wearer", m.wearer},
          {"partner", m.partner},
          {"bystanders", m.bystanders},
          {"noise", m.noise},
          {"target_snr_db", m.target_snr_db},
          {"overlap_ratio", m.overlap_ratio},
          {"lead_s", m.lead_s},
          {"gap_s", m.gap_s},
          {"mute_noise", m.mute_noise}};
}

inline SceneManifest manifest_from_json(const nlohmann::json& j) {
  try {
    SceneManifest m;
    m.scene_id = j.at("scene_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.room.room = room_from_json(j.at("room"));
    m.room.placements = placements_from_json(j.at("placements"));
    m.wearer = j.at("wearer").get<std::string>();
    m.partner = j.at("partner").get<std::string>();
    m.bystanders = j.at("bystanders").get<std::vector<std::string>>();
    m.noise = j.at("noise").get<std::string>();
    m.target_snr_db = j.at("target_snr_db").get<double>();
    m.overlap_ratio = j.at("overlap_ratio").get<double>();
    m.lead_s = j.value("lead_s", 0.1);
    m.gap_s = j.value("gap_s", 0.2);
    m.mute_noise = j.value("mute_noise", false);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, "scene-synth", std::string("malformed scene manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Datasets

struct DatasetConfig {
  std::size_t scenes_per_scenario = 200;
  std::vector<std::size_t> bystander_counts{1, 2, 3};
  std::uint64_t root_seed = 0;
  SceneSampling sampling;
  std::size_t workers = 1;
};

inline std::string scenario_name(std::size_t bystanders) { return "B" + std::to_string(bystanders); }

inline std::string scene_name(std::size_t bystanders, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "B%zu_%05zu", bystanders, index);
  return buf;
}

/// Seed of scene `index` in the scenario with `bystanders` distractors.
inline std::uint64_t scene_seed(std::uint64_t root, std::size_t bystanders, std::size_t index) {
  return derive_seed(root, 0xB0 + bystanders, index);
}

inline void write_scene(const std::filesystem::path& dir, const SceneManifest& manifest, const SceneAudio& scene) {
  std::filesystem::create_directories(dir / "stems");
  write_wav(dir / "mixture.wav", scene.mixture, scene.sample_rate_hz);
  nlohmann::json stems = nlohmann::json::array();
  for (const auto& s : scene.stems) {
    write_wav(dir / "stems" / (s.role + ".wav"), s.audio, scene.sample_rate_hz);
    stems.push_back({{"role", s.role},
                     {"asset", s.asset},
                     {"path", "stems/" + s.role + ".wav"},
                     {"active", {s.placement.begin, s.placement.end}}});
  }
  nlohmann::json j = to_json(manifest);
  j["realized"] = {{"snr_db", scene.realized_snr_db},
                   {"noise_gain", scene.noise_gain},
                   {"overlap_ratios", scene.realized_overlap},
                   {"samples", scene.mixture.cols()},
                   {"sample_rate_hz", scene.sample_rate_hz},
                   {"reference_index", scene.reference_index},
                   {"stems", stems}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorKind::io, "scene-synth", "cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

/// Generates every scenario in `config` under `out_dir` and writes the root
/// `dataset.json`. Scene seeds are derived from the root seed, so output is
/// independent of the worker count.
inline nlohmann::json generate_dataset(const DatasetConfig& config, const AssetLibrary& assets,
                                       const ArrayGeometry& geometry, const std::filesystem::path& out_dir) {
  if (config.scenes_per_scenario == 0 || config.bystander_counts.empty()) {
    throw Error(ErrorKind::invalid_input, "scene-synth", "dataset needs at least one scene and one scenario");
  }
  struct Job {
    std::size_t bystanders, index;
  };
  std::vector<Job> jobs;
  for (std::size_t b : config.bystander_counts) {
    for (std::size_t i = 0; i < config.scenes_per_scenario; ++i) jobs.push_back({b, i});
  }
  std::vector<nlohmann::json> entries(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto [b, i] = jobs[j];
      const std::string id = scene_name(b, i);
      try {
        const SceneManifest m = sample_manifest(scene_seed(config.root_seed, b, i), b, config.sampling, assets, id);
        const SceneAudio scene = synthesize_scene(m, assets, geometry);
        const std::string rel = scenario_name(b) + "/" + id;
        write_scene(out_dir / rel, m, scene);
        entries[j] = {{"id", id},
                      {"scenario", scenario_name(b)},
                      {"bystanders", b},
                      {"dir", rel},
                      {"target_snr_db", m.target_snr_db},
                      {"overlap_ratio", m.overlap_ratio},
                      {"seed", m.seed}};
      } catch (const Error& e) {
        failures[j] = "scene " + id + ": " + e.detail();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (!f.empty()) throw Error(ErrorKind::placement, "scene-synth", f);
  }

  nlohmann::json scenarios = nlohmann::json::array();
  for (std::size_t b : config.bystander_counts) scenarios.push_back({{"name", scenario_name(b)}, {"bystanders", b}});
  nlohmann::json root{{"format", "glasswave-dataset/1"},
                      {"root_seed", config.root_seed},
                      {"scenes_per_scenario", config.scenes_per_scenario},
                      {"sample_rate_hz", config.sampling.ranges.sample_rate_hz},
                      {"snr_range_db", {config.sampling.snr_min_db, config.sampling.snr_max_db}},
                      {"overlap_range", {config.sampling.overlap_min, config.sampling.overlap_max}},
                      {"geometry", to_json(geometry)},
                      {"scenarios", scenarios},
                      {"scenes", entries}};
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir / "dataset.json");
  if (!out) throw Error(ErrorKind::io, "scene-synth", "cannot write dataset manifest");
  out << root.dump(2) << '\n';
  return root;
}

/// Reads a scene written by `write_scene` back into memory.
inline std::pair<SceneManifest, SceneAudio> load_scene(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorKind::io, "scene-synth", "missing manifest in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, "scene-synth", "malformed manifest in " + dir.string() + ": " + e.what());
  }
  SceneManifest m = manifest_from_json(j);
  SceneAudio scene;
  scene.scene_id = m.scene_id;
  const auto mix = read_wav(dir / "mixture.wav");
  scene.mixture = mix.samples;
  scene.sample_rate_hz = mix.sample_rate_hz;
  const auto& realized = j.at("realized");
  scene.reference_index = realized.at("reference_index").get<std::size_t>();
  scene.realized_snr_db = realized.value("snr_db", 0.0);
  scene.noise_gain = realized.value("noise_gain", 0.0);
  for (const auto& s : realized.at("stems")) {
    const auto active = s.at("active");
    scene.stems.push_back({s.at("role").get<std::string>(), s.at("asset").get<std::string>(),
                           {active.at(0).get<std::size_t>(), active.at(1).get<std::size_t>()},
                           read_wav(dir / s.at("path").get<std::string>()).samples});
  }
  return {std::move(m), std::move(scene)};
}

}  // namespace glasswave
