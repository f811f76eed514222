// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "glasswave");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return glasswave::cli::run(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("glasswave_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("design and beampattern", "[cli]") {
  const auto dir = fresh("design");
  REQUIRE(cli({"design", "--K", "12", "--out", dir.string(), "--seed", "1"}) == 0);
  const auto bank = glasswave::load_bank(dir / "bank.json");
  REQUIRE(bank.size() == 13);
  REQUIRE(bank.provenance.contains("geometry_spec"));

  const auto patterns = dir / "patterns";
  REQUIRE(cli({"beampattern", "--bank", (dir / "bank.json").string(), "--freq", "250", "--out", patterns.string()}) == 0);
  for (int c = 0; c < 13; ++c) REQUIRE(fs::exists(patterns / ("pattern_ch" + std::to_string(c) + ".tsv")));
  REQUIRE_FALSE(fs::exists(patterns / "pattern_ch13.tsv"));

  REQUIRE(cli({"design", "--K", "12", "--designer", "das", "--out", (dir / "das").string()}) == 0);
  REQUIRE(cli({"beampattern", "--bank", (dir / "bank.json").string(), "--compare", (dir / "das" / "bank.json").string(),
               "--freq", "250", "--out", (dir / "cmp").string()}) == 0);
  REQUIRE(fs::exists(dir / "cmp" / "lateral_gain.tsv"));
  fs::remove_all(dir);
}

TEST_CASE("synth is reproducible from a seed", "[cli]") {
  const auto a = fresh("synth_a");
  const auto b = fresh("synth_b");
  const std::vector<std::string> common{"--scenes", "1", "--bystanders", "1", "--seed", "7"};
  auto args_for = [&](const fs::path& out) {
    std::vector<std::string> v{"synth", "--out", out.string()};
    v.insert(v.end(), common.begin(), common.end());
    return v;
  };
  REQUIRE(cli(args_for(a)) == 0);
  REQUIRE(cli(args_for(b)) == 0);
  REQUIRE(slurp(a / "dataset.json") == slurp(b / "dataset.json"));
  REQUIRE(slurp(a / "B1" / "B1_00000" / "mixture.wav") == slurp(b / "B1" / "B1_00000" / "mixture.wav"));
  REQUIRE(slurp(a / "B1" / "B1_00000" / "manifest.json") == slurp(b / "B1" / "B1_00000" / "manifest.json"));

  // separate then evaluate on the same dataset
  const auto bank = fresh("synth_bank");
  REQUIRE(cli({"design", "--K", "4", "--designer", "mvdr", "--out", bank.string()}) == 0);
  const auto est = fresh("synth_est");
  REQUIRE(cli({"separate", "--bank", (bank / "bank.json").string(), "--dataset", a.string(), "--out", est.string()}) == 0);
  REQUIRE(fs::exists(est / "B1_00000" / "wearer.wav"));
  const auto report = fresh("synth_report");
  REQUIRE(cli({"evaluate", "--dataset", a.string(), "--estimates", est.string(), "--out", report.string()}) == 0);
  REQUIRE(fs::exists(report / "report.json"));

  // a missing estimate is a runtime failure
  fs::remove(est / "B1_00000" / "partner.wav");
  REQUIRE(cli({"evaluate", "--dataset", a.string(), "--estimates", est.string(), "--out", report.string()}) == 1);

  for (const auto& d : {a, b, bank, est, report}) fs::remove_all(d);
}

TEST_CASE("exit codes", "[cli]") {
  const auto dir = fresh("codes");
  // usage
  REQUIRE(cli({}) == 2);
  REQUIRE(cli({"design"}) == 2);
  REQUIRE(cli({"design", "--out", dir.string(), "--K", "0"}) == 2);
  REQUIRE(cli({"design", "--out", dir.string(), "--designer", "magic"}) == 2);
  REQUIRE(cli({"frobnicate"}) == 2);
  // validation
  REQUIRE(cli({"design", "--out", dir.string(), "--bins", "300"}) == 3);
  REQUIRE(cli({"design", "--out", dir.string(), "--null", "north"}) == 3);
  REQUIRE(cli({"simulate-rir", "--out", dir.string(), "--dims", "4,4,3", "--source", "9,1,1", "--array", "2,2,1.5"}) == 3);
  fs::create_directories(dir);
  std::ofstream(dir / "broken.json") << "{\"K\": 1}";
  REQUIRE(cli({"beampattern", "--bank", (dir / "broken.json").string(), "--out", dir.string()}) == 3);
  // runtime: the output path is an existing file
  std::ofstream(dir / "occupied") << "x";
  REQUIRE(cli({"design", "--out", (dir / "occupied").string()}) == 1);
  fs::remove_all(dir);
}

TEST_CASE("simulate-rir writes one file per source", "[cli]") {
  const auto dir = fresh("rir");
  REQUIRE(cli({"simulate-rir", "--out", dir.string(), "--dims", "5,4,3", "--rt60", "0.3", "--source", "1,1,1.5",
               "--source", "4,3,1.2", "--array", "2.5,2,1.5", "--max-order", "4"}) == 0);
  REQUIRE(fs::exists(dir / "rir_s0.wav"));
  REQUIRE(fs::exists(dir / "rir_s1.wav"));
  REQUIRE(fs::exists(dir / "rir.json"));
  REQUIRE(glasswave::read_wav(dir / "rir_s0.wav").samples.rows() == 7);
  fs::remove_all(dir);
}
