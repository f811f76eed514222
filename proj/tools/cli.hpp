// SPDX-License-Identifier: Apache-2.0
#pragma once

// The glasswave command line: one binary, one subcommand per pipeline stage.
// Every subcommand writes only below its --out directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "glasswave/glasswave.hpp"

namespace glasswave::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;

inline Eigen::Vector3d parse_vec3(const std::string& text, const std::string& what) {
  std::stringstream ss(text);
  std::string part;
  std::vector<double> v;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_input, "cli", what + " must be three comma-separated numbers, got '" + text + "'");
    }
  }
  if (v.size() != 3) throw Error(ErrorKind::invalid_input, "cli", what + " must have three components");
  return {v[0], v[1], v[2]};
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cli", "cannot write " + path.string());
  out << text;
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cli", "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, "cli", "malformed JSON in " + path.string() + ": " + e.what());
  }
}

struct Common {
  std::string out;
  std::string geometry;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());

  ArrayGeometry load_geometry_or_preset() const {
    return geometry.empty() ? glasses_preset() : load_geometry(geometry);
  }

  std::uint64_t resolve_seed() {
    if (!seed_given) {
      seed = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
      seed_given = true;
    }
    return seed;
  }

  fs::path out_dir() const {
    if (out.empty()) throw Error(ErrorKind::invalid_input, "cli", "--out is required");
    fs::create_directories(out);
    return out;
  }
};

inline void add_common(CLI::App* sub, Common& c, bool needs_geometry = true) {
  sub->add_option("-o,--out", c.out, "Output directory (created if missing)")->required();
  if (needs_geometry) {
    sub->add_option("--geometry", c.geometry, "Array geometry JSON (default: built-in glasses preset)")
        ->check(CLI::ExistingFile);
  }
  sub->add_option("--seed", c.seed, "Root seed; generated and logged when absent")
      ->each([&c](const std::string&) { c.seed_given = true; });
  sub->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
}

inline void log_config(const std::string& command, nlohmann::json config, Common& c) {
  config["command"] = command;
  config["seed"] = c.resolve_seed();
  log(LogLevel::info, "config " + config.dump());
}

// ---------------------------------------------------------------------------

struct DesignArgs {
  Common common;
  std::size_t k = 12;
  std::string designer = "nlcmv";
  double sample_rate = 16000.0;
  std::size_t fft_size = 512;
  std::size_t bins = 0;
  double loading = kDefaultLoading;
  double point_psd = 1.0;
  std::vector<std::string> nulls;
  std::string mouth;
};

inline int run_design(DesignArgs& a) {
  const ArrayGeometry geometry = a.common.load_geometry_or_preset();
  const std::size_t bins = a.bins == 0 ? a.fft_size / 2 : a.bins;
  StftConfig{a.fft_size, a.fft_size / 2, bins}.validate();
  const FrequencyGrid grid(a.sample_rate, a.fft_size, bins);
  DesignerSpec spec;
  spec.designer = designer_from_string(a.designer);
  spec.loading = a.loading;
  spec.point_psd = a.point_psd;
  for (const auto& n : a.nulls) {
    const auto colon = n.find(':');
    try {
      const double az = std::stod(n.substr(0, colon));
      const double w = colon == std::string::npos ? 1.0 : std::stod(n.substr(colon + 1));
      spec.nulls.push_back({Direction::degrees(az, 0.0), w});
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_input, "cli", "--null expects AZIMUTH_DEG[:WEIGHT], got '" + n + "'");
    }
  }
  const Eigen::Vector3d mouth = a.mouth.empty() ? default_mouth_offset() : parse_vec3(a.mouth, "--mouth");
  nlohmann::json nulls = nlohmann::json::array();
  for (const auto& n : spec.nulls) nulls.push_back({n.direction.azimuth_rad * 180.0 / kPi, n.weight});
  log_config("design",
             {{"K", a.k}, {"designer", a.designer}, {"sample_rate_hz", a.sample_rate}, {"fft_size", a.fft_size},
              {"bins", bins}, {"loading", a.loading}, {"point_psd", a.point_psd}, {"nulls", nulls},
              {"mouth", vec_json(mouth)}, {"geometry", geometry.name()}},
             a.common);

  BeamformerBank bank = design_bank(geometry, grid, a.k, Point{mouth}, spec);
  bank.provenance["geometry_spec"] = to_json(geometry);
  bank.provenance["nulls"] = nulls;
  bank.provenance["point_psd"] = a.point_psd;
  const fs::path out = a.common.out_dir() / "bank.json";
  save_bank(bank, out);
  std::cout << "wrote " << bank.size() << "-channel bank to " << out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BeampatternArgs {
  Common common;
  std::string bank;
  std::string compare;
  double frequency = 250.0;
  double step = 1.0;
};

inline ArrayGeometry bank_geometry(const BeamformerBank& bank, const Common& c) {
  if (!c.geometry.empty()) return load_geometry(c.geometry);
  const nlohmann::json* p = &bank.provenance;
  while (p->is_object()) {
    if (p->contains("geometry_spec")) return geometry_from_json(p->at("geometry_spec"));
    if (!p->contains("refined_from")) break;
    p = &p->at("refined_from");
  }
  return glasses_preset();
}

inline int run_beampattern(BeampatternArgs& a) {
  const BeamformerBank bank = load_bank(a.bank);
  const ArrayGeometry geometry = bank_geometry(bank, a.common);
  log_config("beampattern",
             {{"bank", a.bank}, {"compare", a.compare}, {"frequency_hz", a.frequency}, {"step_deg", a.step},
              {"geometry", geometry.name()}},
             a.common);
  const fs::path out = a.common.out_dir();
  for (std::size_t c = 0; c < bank.size(); ++c) {
    const auto pattern = beam_pattern(bank.channels[c], geometry, bank.grid, a.frequency, a.step);
    write_text(out / ("pattern_ch" + std::to_string(c) + ".tsv"), beam_pattern_table(pattern));
  }
  std::cout << "wrote " << bank.size() << " beam-pattern tables at " << a.frequency << " Hz to " << out.string()
            << '\n';
  if (!a.compare.empty()) {
    const BeamformerBank other = load_bank(a.compare);
    if (other.size() != bank.size() || other.mics() != bank.mics()) {
      throw Error(ErrorKind::shape_mismatch, "cli", "--compare bank differs in channel or mic count");
    }
    // Lateral gains: left (90 deg) and right (270 deg) of the wearer.
    std::ostringstream os;
    os << "# frequency_hz " << a.frequency << "\nchannel\tgain90_db\tgain270_db\tcompare_gain90_db\tcompare_gain270_db"
       << "\tdelta90_db\tdelta270_db\n"
       << std::fixed << std::setprecision(3);
    for (std::size_t c = 0; c < bank.size(); ++c) {
      const double g90 = pattern_gain_at(bank.channels[c], geometry, bank.grid, a.frequency, 90.0);
      const double g270 = pattern_gain_at(bank.channels[c], geometry, bank.grid, a.frequency, 270.0);
      const double o90 = pattern_gain_at(other.channels[c], geometry, other.grid, a.frequency, 90.0);
      const double o270 = pattern_gain_at(other.channels[c], geometry, other.grid, a.frequency, 270.0);
      os << c << '\t' << g90 << '\t' << g270 << '\t' << o90 << '\t' << o270 << '\t' << o90 - g90 << '\t'
         << o270 - g270 << '\n';
    }
    write_text(out / "lateral_gain.tsv", os.str());
    std::cout << os.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string room;
  std::string dims = "6,5,3";
  double rt60 = 0.4;
  double reflection = -1.0;
  std::vector<std::string> sources;
  std::string array_position = "3,2.5,1.5";
  double yaw_deg = 0.0;
  double sample_rate = 16000.0;
  int max_order = 17;
  std::size_t length = 0;
};

inline int run_simulate(SimulateArgs& a) {
  const ArrayGeometry geometry = a.common.load_geometry_or_preset();
  RoomSpec room;
  if (!a.room.empty()) {
    room = room_from_json(read_json(a.room));
  } else {
    room.dimensions = parse_vec3(a.dims, "--dims");
    const double beta = a.reflection >= 0.0 ? a.reflection : eyring_reflection(room.dimensions, a.rt60);
    room.reflection.fill(beta);
    room.max_order = a.max_order;
    room.sample_rate_hz = a.sample_rate;
  }
  std::vector<Eigen::Vector3d> sources;
  for (const auto& s : a.sources) sources.push_back(parse_vec3(s, "--source"));
  const ArrayPose pose{parse_vec3(a.array_position, "--array"), a.yaw_deg * kPi / 180.0};
  nlohmann::json srcs = nlohmann::json::array();
  for (const auto& s : sources) srcs.push_back(vec_json(s));
  log_config("simulate-rir",
             {{"room", to_json(room)}, {"sources", srcs}, {"array", vec_json(pose.position)}, {"yaw_deg", a.yaw_deg},
              {"length", a.length}, {"geometry", geometry.name()}},
             a.common);

  const RirSet set = simulate_rir(room, sources, geometry, pose, a.length);
  const fs::path out = a.common.out_dir();
  nlohmann::json meta{{"room", to_json(room)}, {"sources", srcs}, {"files", nlohmann::json::array()}};
  for (std::size_t s = 0; s < set.rirs.size(); ++s) {
    Eigen::Index n = 0;
    for (const auto& r : set.rirs[s]) n = std::max(n, r.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(set.rirs[s].size()), n);
    for (std::size_t mic = 0; mic < set.rirs[s].size(); ++mic) {
      m.row(static_cast<Eigen::Index>(mic)).head(set.rirs[s][mic].size()) = set.rirs[s][mic].transpose();
    }
    const std::string file = "rir_s" + std::to_string(s) + ".wav";
    write_wav(out / file, m, room.sample_rate_hz);
    meta["files"].push_back(file);
  }
  nlohmann::json mics = nlohmann::json::array();
  for (const auto& p : set.mic_positions) mics.push_back(vec_json(p));
  meta["mic_positions"] = mics;
  write_text(out / "rir.json", meta.dump(2) + "\n");
  std::cout << "wrote " << set.rirs.size() << " multichannel RIRs to " << out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::string assets;
  std::size_t scenes = 200;
  std::vector<std::size_t> bystanders{1, 2, 3};
  int snr_min = -8;
  int snr_max = 40;
  double overlap_min = 0.05;
  double overlap_max = 0.5;
};

inline int run_synth(SynthArgs& a) {
  const ArrayGeometry geometry = a.common.load_geometry_or_preset();
  if (a.snr_min > a.snr_max) throw Error(ErrorKind::invalid_input, "cli", "--snr-min exceeds --snr-max");
  if (!(a.overlap_min >= 0.0 && a.overlap_min <= a.overlap_max && a.overlap_max < 1.0)) {
    throw Error(ErrorKind::invalid_input, "cli", "overlap range must satisfy 0 <= min <= max < 1");
  }
  const AssetLibrary assets = a.assets.empty() ? fixture_library() : AssetLibrary::load(a.assets);
  DatasetConfig config;
  config.scenes_per_scenario = a.scenes;
  config.bystander_counts = a.bystanders;
  config.root_seed = a.common.resolve_seed();
  config.sampling.snr_min_db = a.snr_min;
  config.sampling.snr_max_db = a.snr_max;
  config.sampling.overlap_min = a.overlap_min;
  config.sampling.overlap_max = a.overlap_max;
  config.workers = a.common.workers;
  log_config("synth",
             {{"assets", a.assets.empty() ? "built-in fixtures" : a.assets}, {"scenes_per_scenario", a.scenes},
              {"bystanders", a.bystanders}, {"snr_db", {a.snr_min, a.snr_max}},
              {"overlap", {a.overlap_min, a.overlap_max}}, {"workers", a.common.workers}, {"geometry", geometry.name()}},
             a.common);
  const auto root = generate_dataset(config, assets, geometry, a.common.out_dir());
  std::cout << "wrote " << root.at("scenes").size() << " scenes to " << a.common.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SeparateArgs {
  Common common;
  std::string bank;
  std::string dataset;
  std::string scene;
};

inline std::vector<fs::path> scene_dirs(const std::string& dataset, const std::string& scene) {
  if (!scene.empty()) return {fs::path(scene)};
  const auto root = read_json(fs::path(dataset) / "dataset.json");
  std::vector<fs::path> dirs;
  for (const auto& e : root.at("scenes")) dirs.push_back(fs::path(dataset) / e.at("dir").get<std::string>());
  return dirs;
}

inline int run_separate(SeparateArgs& a) {
  if (a.dataset.empty() == a.scene.empty()) {
    throw Error(ErrorKind::invalid_input, "cli", "give exactly one of --dataset or --scene");
  }
  const BeamformerBank bank = load_bank(a.bank);
  log_config("separate", {{"bank", a.bank}, {"dataset", a.dataset}, {"scene", a.scene}, {"masks", "oracle"}}, a.common);
  const fs::path out = a.common.out_dir();
  std::size_t count = 0;
  for (const auto& dir : scene_dirs(a.dataset, a.scene)) {
    const auto [manifest, scene] = load_scene(dir);
    const SeparationResult r = separate(bank, scene);
    fs::create_directories(out / manifest.scene_id);
    write_wav(out / manifest.scene_id / "wearer.wav", r.wearer_estimate, scene.sample_rate_hz);
    write_wav(out / manifest.scene_id / "partner.wav", r.partner_estimate, scene.sample_rate_hz);
    ++count;
  }
  std::cout << "separated " << count << " scenes into " << out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct RefineArgs {
  Common common;
  std::string bank;
  std::string dataset;
  std::size_t limit = 0;
  std::size_t iterations = 50;
  double step = 1e-3;
  std::string gradient = "analytic";
};

inline int run_refine(RefineArgs& a) {
  const BeamformerBank bank = load_bank(a.bank);
  RefinementConfig config;
  config.iterations = a.iterations;
  config.step_size = a.step;
  if (a.gradient == "analytic") {
    config.gradient_mode = GradientMode::analytic;
  } else if (a.gradient == "finite-difference") {
    config.gradient_mode = GradientMode::finite_difference;
  } else {
    throw Error(ErrorKind::invalid_input, "cli", "--gradient must be analytic or finite-difference");
  }
  config.validate();
  log_config("refine",
             {{"bank", a.bank}, {"dataset", a.dataset}, {"limit", a.limit}, {"iterations", a.iterations},
              {"step_size", a.step}, {"gradient", a.gradient}},
             a.common);
  std::vector<SceneAudio> scenes;
  for (const auto& dir : scene_dirs(a.dataset, "")) {
    if (a.limit != 0 && scenes.size() == a.limit) break;
    scenes.push_back(load_scene(dir).second);
  }
  const RefinementResult r = refine_beamformer(bank, scenes, config);
  const fs::path out = a.common.out_dir();
  save_bank(r.bank, out / "bank.json");
  std::ostringstream trace;
  trace << "iteration\tloss\n" << std::setprecision(12);
  for (std::size_t i = 0; i < r.loss_trace.size(); ++i) trace << i << '\t' << r.loss_trace[i] << '\n';
  write_text(out / "loss_trace.tsv", trace.str());
  std::cout << "refined bank over " << scenes.size() << " scenes: loss " << r.loss_trace.front() << " -> "
            << r.loss_trace.back() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::string dataset;
  std::string estimates;
};

inline int run_evaluate(EvaluateArgs& a) {
  log_config("evaluate", {{"dataset", a.dataset}, {"estimates", a.estimates}}, a.common);
  const EvaluationReport report = evaluate_run(a.dataset, a.estimates);
  const fs::path out = a.common.out_dir();
  write_text(out / "report.json", report.to_json().dump(2) + "\n");
  write_text(out / "report.tsv", report.to_table());
  std::cout << report.to_table();
  if (!report.complete()) {
    std::cerr << "glasswave: " << report.missing.size() << " estimate files missing\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input:
    case ErrorKind::shape_mismatch:
    case ErrorKind::degenerate_geometry: return kExitValidation;
    default: return kExitRuntime;
  }
}

inline int run(int argc, const char* const* argv) {
  CLI::App app{"glasswave: directional speech separation toolkit for smart-glasses arrays", "glasswave"};
  app.require_subcommand(1);

  DesignArgs design;
  auto* d = app.add_subcommand("design", "Design a K+1 channel beamformer bank");
  add_common(d, design.common);
  d->add_option("--K", design.k, "Number of horizontal beams")->check(CLI::PositiveNumber);
  d->add_option("--designer", design.designer, "das | mvdr | nlcmv")->check(CLI::IsMember({"das", "mvdr", "nlcmv"}));
  d->add_option("--sample-rate", design.sample_rate, "Sample rate in Hz")->check(CLI::PositiveNumber);
  d->add_option("--fft", design.fft_size, "FFT size");
  d->add_option("--bins", design.bins, "Retained frequency bins (default fft/2)");
  d->add_option("--loading", design.loading, "Relative diagonal loading")->check(CLI::NonNegativeNumber);
  d->add_option("--point-psd", design.point_psd, "Point-noise power spectral density")->check(CLI::NonNegativeNumber);
  d->add_option("--null", design.nulls, "Point-noise direction AZIMUTH_DEG[:WEIGHT] (repeatable)");
  d->add_option("--mouth", design.mouth, "Mouth position x,y,z in metres, array frame");

  BeampatternArgs pattern;
  auto* b = app.add_subcommand("beampattern", "Tabulate azimuth gain of every bank channel");
  add_common(b, pattern.common);
  b->add_option("--bank", pattern.bank, "Bank file")->required()->check(CLI::ExistingFile);
  b->add_option("--freq", pattern.frequency, "Analysis frequency in Hz")->check(CLI::NonNegativeNumber);
  b->add_option("--step", pattern.step, "Azimuth step in degrees")->check(CLI::PositiveNumber);
  b->add_option("--compare", pattern.compare, "Second bank for a lateral-gain comparison")->check(CLI::ExistingFile);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate-rir", "Simulate shoebox room impulse responses");
  add_common(s, sim.common);
  s->add_option("--room", sim.room, "Room JSON (overrides --dims/--rt60)")->check(CLI::ExistingFile);
  s->add_option("--dims", sim.dims, "Room dimensions x,y,z in metres");
  s->add_option("--rt60", sim.rt60, "Reverberation time for a uniform Eyring reflection coefficient")
      ->check(CLI::PositiveNumber);
  s->add_option("--reflection", sim.reflection, "Uniform wall reflection coefficient")->check(CLI::Range(0.0, 1.0));
  s->add_option("--source", sim.sources, "Source position x,y,z (repeatable)")->required();
  s->add_option("--array", sim.array_position, "Array centre x,y,z");
  s->add_option("--yaw", sim.yaw_deg, "Array yaw in degrees");
  s->add_option("--sample-rate", sim.sample_rate, "Sample rate in Hz")->check(CLI::PositiveNumber);
  s->add_option("--max-order", sim.max_order, "Maximum image order")->check(CLI::NonNegativeNumber);
  s->add_option("--length", sim.length, "RIR length in samples (0: automatic)");

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "Generate a conversational scene dataset");
  add_common(y, synth.common);
  y->add_option("--assets", synth.assets, "Asset index JSON (default: built-in fixture clips)")->check(CLI::ExistingFile);
  y->add_option("--scenes", synth.scenes, "Scenes per scenario")->check(CLI::PositiveNumber);
  y->add_option("--bystanders", synth.bystanders, "Bystander counts, one scenario each")->delimiter(',');
  y->add_option("--snr-min", synth.snr_min, "Lowest SNR in dB");
  y->add_option("--snr-max", synth.snr_max, "Highest SNR in dB");
  y->add_option("--overlap-min", synth.overlap_min, "Lowest bystander overlap ratio");
  y->add_option("--overlap-max", synth.overlap_max, "Highest bystander overlap ratio");

  SeparateArgs sep;
  auto* p = app.add_subcommand("separate", "Oracle-mask separation through a bank");
  add_common(p, sep.common, false);
  p->add_option("--bank", sep.bank, "Bank file")->required()->check(CLI::ExistingFile);
  p->add_option("--dataset", sep.dataset, "Dataset directory")->check(CLI::ExistingDirectory);
  p->add_option("--scene", sep.scene, "Single scene directory")->check(CLI::ExistingDirectory);

  RefineArgs refine;
  auto* r = app.add_subcommand("refine", "Refine bank weights by gradient descent on the separation loss");
  add_common(r, refine.common, false);
  r->add_option("--bank", refine.bank, "Initial bank file")->required()->check(CLI::ExistingFile);
  r->add_option("--dataset", refine.dataset, "Training dataset directory")->required()->check(CLI::ExistingDirectory);
  r->add_option("--limit", refine.limit, "Use only the first N scenes (0: all)");
  r->add_option("--iterations", refine.iterations, "Gradient steps");
  r->add_option("--step", refine.step, "Step size")->check(CLI::PositiveNumber);
  r->add_option("--gradient", refine.gradient, "analytic | finite-difference");

  EvaluateArgs eval;
  auto* e = app.add_subcommand("evaluate", "Score separated estimates against a dataset");
  add_common(e, eval.common, false);
  e->add_option("--dataset", eval.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--estimates", eval.estimates, "Estimates directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*d) return run_design(design);
    if (*b) return run_beampattern(pattern);
    if (*s) return run_simulate(sim);
    if (*y) return run_synth(synth);
    if (*p) return run_separate(sep);
    if (*r) return run_refine(refine);
    if (*e) return run_evaluate(eval);
  } catch (const Error& err) {
    std::cerr << "glasswave: " << err.what() << '\n';
    return exit_code_for(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "glasswave: [cli] " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace glasswave::cli
