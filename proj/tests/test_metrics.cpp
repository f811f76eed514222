// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "glasswave/evaluation.hpp"
#include "glasswave/metrics.hpp"

using namespace glasswave;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace fs = std::filesystem;

namespace {

Eigen::VectorXd gaussian(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  for (auto& v : x) v = g(rng);
  return x;
}

// Textbook definition, written out independently.
double si_sdr_reference(const Eigen::VectorXd& e, const Eigen::VectorXd& r) {
  long double er = 0, rr = 0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    er += static_cast<long double>(e(i)) * r(i);
    rr += static_cast<long double>(r(i)) * r(i);
  }
  const long double a = er / rr;
  long double s = 0, d = 0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const long double t = a * r(i);
    s += t * t;
    d += (t - e(i)) * (t - e(i));
  }
  return static_cast<double>(10.0L * std::log10(s / d));
}

}  // namespace

TEST_CASE("SI-SDR hand-computed cases", "[metrics]") {
  Eigen::VectorXd r(2), e(2);
  r << 1.0, 0.0;
  e << 1.0, 1.0;
  REQUIRE_THAT(si_sdr(e, r), WithinAbs(0.0, 1e-12));

  Eigen::VectorXd a(4), b(4);
  a << 1, 0, 0, 0;
  b << 0, 1, 0, 0;
  REQUIRE(si_sdr(b, a) == -60.0);
  REQUIRE(si_sdr(3.0 * a, a) == 60.0);
  REQUIRE(si_sdr(-2.0 * a, a) == 60.0);
  REQUIRE(si_sdr(Eigen::VectorXd::Zero(4), a) == -60.0);

  REQUIRE_THROWS_AS(si_sdr(a, Eigen::VectorXd::Zero(4)), Error);
  REQUIRE_THROWS_AS(si_sdr(a.head(3), a), Error);
}

TEST_CASE("SI-SDR matches the textbook formula and is scale invariant", "[metrics]") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Eigen::VectorXd r = gaussian(2000, seed);
    const Eigen::VectorXd e = r + 0.5 * gaussian(2000, seed + 1000);
    const double v = si_sdr(e, r);
    REQUIRE_THAT(v, WithinAbs(si_sdr_reference(e, r), 1e-9));
    for (double c : {1e-3, 0.5, 7.0, 1e4}) REQUIRE_THAT(si_sdr(c * e, r), WithinAbs(v, 1e-9));
    for (double c : {1e-3, 7.0}) REQUIRE_THAT(si_sdr(e, c * r), WithinAbs(v, 1e-9));
  }
}

TEST_CASE("SI-SDR improvement", "[metrics]") {
  const Eigen::VectorXd r = gaussian(1000, 3);
  const Eigen::VectorXd mix = r + gaussian(1000, 4);
  REQUIRE(si_sdr_improvement(mix, mix, r) == 0.0);
  REQUIRE_THAT(si_sdr_improvement(r, mix, r), WithinAbs(60.0 - si_sdr(mix, r), 1e-12));
  const Eigen::VectorXd better = r + 0.1 * gaussian(1000, 4);
  REQUIRE(si_sdr_improvement(better, mix, r) > 0.0);
}

TEST_CASE("SI-SDR gradient matches central differences", "[metrics]") {
  const Eigen::VectorXd r = gaussian(50, 8);
  Eigen::VectorXd e = r + gaussian(50, 9);
  const Eigen::VectorXd g = si_sdr_gradient(e, r);
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double h = 1e-6;
    Eigen::VectorXd up = e, down = e;
    up(i) += h;
    down(i) -= h;
    REQUIRE_THAT(g(i), WithinAbs((si_sdr_raw(up, r) - si_sdr_raw(down, r)) / (2 * h), 1e-5));
  }
}

TEST_CASE("summaries use linear-interpolated percentiles", "[metrics]") {
  const std::vector<double> v{4, 1, 3, 2, 5};
  const auto s = summarize(v);
  REQUIRE(s.mean == 3.0);
  REQUIRE(s.median == 3.0);
  REQUIRE_THAT(s.p10, WithinAbs(1.4, 1e-12));
  REQUIRE_THAT(s.p90, WithinAbs(4.6, 1e-12));
  REQUIRE(std::isnan(summarize({}).mean));
  REQUIRE(snr_bucket(-8.0) == "[-8,0)");
  REQUIRE(snr_bucket(3.0) == "[0,8)");
  REQUIRE(snr_bucket(40.0) == "[40,48)");
}

TEST_CASE("evaluation over a generated dataset", "[metrics]") {
  const auto root = fs::temp_directory_path() / "glasswave_eval";
  fs::remove_all(root);
  DatasetConfig cfg;
  cfg.scenes_per_scenario = 2;
  cfg.bystander_counts = {1, 2};
  cfg.root_seed = 11;
  cfg.sampling.ranges.max_order = 3;
  const auto dataset = generate_dataset(cfg, fixture_library(), glasses_preset(), root / "data");

  // Ground truth and unprocessed mixture as estimates.
  const auto truth = root / "truth";
  const auto raw = root / "raw";
  for (const auto& entry : dataset.at("scenes")) {
    const auto id = entry.at("id").get<std::string>();
    const auto [m, scene] = load_scene(root / "data" / entry.at("dir").get<std::string>());
    fs::create_directories(truth / id);
    fs::create_directories(raw / id);
    for (const char* role : {"wearer", "partner"}) {
      write_wav(truth / id / (std::string(role) + ".wav"), scene.reference(role), 16000.0);
      write_wav(raw / id / (std::string(role) + ".wav"), scene.mixture_reference(), 16000.0);
    }
  }

  const auto perfect = evaluate_run(root / "data", truth);
  REQUIRE(perfect.complete());
  REQUIRE(perfect.records.size() == 4);
  for (const auto& r : perfect.records) {
    REQUIRE(r.wearer_si_sdr == 60.0);
    REQUIRE(r.partner_si_sdr == 60.0);
    REQUIRE(r.wearer_improvement > 0.0);
  }

  const auto unprocessed = evaluate_run(root / "data", raw);
  for (const auto& r : unprocessed.records) {
    REQUIRE(r.wearer_improvement == 0.0);
    REQUIRE(r.partner_improvement == 0.0);
  }

  // Aggregates agree with a recomputation from the records.
  for (const auto& [scenario, fields] : perfect.aggregates) {
    for (const char* field : kScoreFields) {
      std::vector<double> v;
      for (const auto& r : perfect.records) {
        if (r.scenario == scenario) v.push_back(score_field(r, field));
      }
      REQUIRE(v.size() == 2);
      REQUIRE(fields.at(field).mean == Catch::Approx((v[0] + v[1]) / 2.0));
      REQUIRE(fields.at(field).median == Catch::Approx((v[0] + v[1]) / 2.0));
    }
  }
  REQUIRE(perfect.aggregates.size() == 2);
  const auto json = perfect.to_json();
  REQUIRE(json.at("records").size() == 4);
  REQUIRE(perfect.to_table().find("B2\twearer_improvement") != std::string::npos);

  // Missing estimates are listed, not fatal.
  const auto first = dataset.at("scenes").at(0).at("id").get<std::string>();
  fs::remove(truth / first / "partner.wav");
  const auto partial = evaluate_run(root / "data", truth);
  REQUIRE_FALSE(partial.complete());
  REQUIRE(partial.missing.size() == 1);
  REQUIRE(partial.records.size() == 3);

  REQUIRE_THROWS_AS(evaluate_run(root / "nowhere", truth), Error);
  fs::remove_all(root);
}
