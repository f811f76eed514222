// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "glasswave/geometry.hpp"
#include "oracles.hpp"

using namespace glasswave;
using Catch::Matchers::WithinAbs;

namespace {

ArrayGeometry pair_on_x(double d) { return ArrayGeometry({{0, 0, 0}, {d, 0, 0}}, 0, "pair"); }

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("glasswave_geom_" + name);
}

}  // namespace

TEST_CASE("single microphone has unit response everywhere", "[geometry]") {
  const ArrayGeometry one({{0, 0, 0}}, 0);
  const FrequencyGrid grid(16000, 512, 256);
  for (double az : {0.0, 73.0, 200.0}) {
    const auto r = steering_vector(one, Direction::degrees(az, 10.0), grid);
    REQUIRE(r.g.rows() == 1);
    for (Eigen::Index k = 0; k < r.g.cols(); ++k) REQUIRE(std::abs(r.g(0, k) - cdouble(1.0, 0.0)) < 1e-15);
  }
}

TEST_CASE("broadside plane wave reaches a pair in phase", "[geometry]") {
  const auto pair = pair_on_x(0.1);
  const FrequencyGrid grid(16000, 512, 256);
  const auto r = steering_vector(pair, Direction::degrees(90.0), grid);
  for (Eigen::Index k = 0; k < r.g.cols(); ++k) {
    REQUIRE(std::abs(r.g(0, k) - 1.0) < 1e-12);
    REQUIRE(std::abs(r.g(1, k) - 1.0) < 1e-12);
  }
}

TEST_CASE("endfire phase across a 0.343 m pair at 500 Hz is pi", "[geometry]") {
  const auto pair = pair_on_x(0.343);
  const auto g = steering_vector_at(pair, Direction::degrees(0.0), 500.0, PropagationModel::far_field);
  const double phase = std::arg(g(1) * std::conj(g(0)));
  REQUIRE_THAT(std::abs(phase), WithinAbs(kPi, 1e-9));
  // mic 1 sits toward the source, so it leads the reference
  const auto g400 = steering_vector_at(pair, Direction::degrees(0.0), 400.0, PropagationModel::far_field);
  REQUIRE_THAT(std::arg(g400(1)), WithinAbs(2.0 * kPi * 400.0 * 0.343 / 343.0, 1e-9));
}

TEST_CASE("steering vectors match direct propagation formulas", "[geometry]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mics = oracle::random_mics(rng, 5);
    const ArrayGeometry geo(mics, 2);
    const double f = 100.0 + 7000.0 * u(rng);
    const double az = 2.0 * kPi * u(rng);
    const double el = (u(rng) - 0.5) * kPi * 0.9;
    const Direction dir{az, el};
    const auto got = steering_vector_at(geo, dir, f, PropagationModel::far_field);
    const auto want = oracle::far_field_response(mics, 2, dir.unit(), f, 343.0);
    REQUIRE((got - want).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::Vector3d src(0.3 * u(rng) + 0.1, u(rng) - 0.5, u(rng) - 0.5);
    const auto near = steering_vector_at(geo, Point{src}, f, PropagationModel::near_field);
    REQUIRE((near - oracle::near_field_response(mics, 2, src, f, 343.0)).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(std::abs(near(2) - 1.0) < 1e-15);
  }
}

TEST_CASE("far-field entries are unit modulus", "[geometry]") {
  const auto geo = glasses_preset();
  const FrequencyGrid grid(16000, 512, 256);
  for (double az = 0.0; az < 360.0; az += 37.0) {
    const auto r = steering_vector(geo, Direction::degrees(az, 15.0), grid);
    REQUIRE((r.g.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("steering vector is continuous in direction", "[geometry]") {
  const auto geo = glasses_preset();
  const Direction a{0.7, 0.1};
  const Direction b{0.7 + 1e-6, 0.1};
  const auto ga = steering_vector_at(geo, a, 8000.0, PropagationModel::far_field);
  const auto gb = steering_vector_at(geo, b, 8000.0, PropagationModel::far_field);
  REQUIRE((ga - gb).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("near-field point on a microphone is degenerate", "[geometry]") {
  const auto geo = pair_on_x(0.05);
  try {
    steering_vector_at(geo, Point{{0.05, 0, 0}}, 1000.0, PropagationModel::near_field);
    FAIL("expected degenerate geometry");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::degenerate_geometry);
  }
}

TEST_CASE("diffuse coherence follows sinc of distance", "[geometry]") {
  const auto pair = pair_on_x(0.343);
  const auto phi = diffuse_coherence_at(pair, 500.0);
  REQUIRE_THAT(phi(0, 1).real(), WithinAbs(0.0, 1e-15));
  REQUIRE(phi(0, 0) == cdouble(1.0, 0.0));

  const auto at_dc = diffuse_coherence_at(glasses_preset(), 0.0);
  REQUIRE((at_dc.array() - cdouble(1.0, 0.0)).abs().maxCoeff() == 0.0);

  const ArrayGeometry coincident({{0, 0, 0}, {0, 0, 0}}, 0);
  REQUIRE(diffuse_coherence_at(coincident, 3000.0)(0, 1) == cdouble(1.0, 0.0));
}

TEST_CASE("diffuse covariance is Hermitian PSD with unit diagonal", "[geometry]") {
  const auto geo = glasses_preset();
  const FrequencyGrid grid(16000, 512, 256);
  const auto cov = diffuse_covariance(geo, grid);
  REQUIRE(cov.bins() == 256);
  for (const auto& phi : cov.per_bin) {
    REQUIRE((phi - phi.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE((phi.diagonal().array() - cdouble(1.0, 0.0)).abs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(phi);
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("sinc coherence agrees with a plane-wave superposition", "[geometry]") {
  std::mt19937_64 rng(5);
  const auto mics = oracle::random_mics(rng, 4);
  const ArrayGeometry geo(mics, 0);
  for (double f : {125.0, 1000.0, 4000.0, 7900.0}) {
    const auto want = oracle::plane_wave_diffuse_covariance(mics, f, 343.0);
    REQUIRE((diffuse_coherence_at(geo, f) - want).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("frequency grid bins are increasing and below Nyquist", "[geometry]") {
  const FrequencyGrid grid(16000, 512, 256);
  const auto f = grid.frequencies_hz();
  REQUIRE(f.size() == 256);
  for (std::size_t k = 1; k < f.size(); ++k) REQUIRE(f[k] > f[k - 1]);
  REQUIRE(f.back() <= 8000.0);
  REQUIRE_THROWS_AS(FrequencyGrid(16000, 511, 10), Error);
  REQUIRE_THROWS_AS(FrequencyGrid(16000, 512, 258), Error);
}

TEST_CASE("geometry invariants are enforced", "[geometry]") {
  REQUIRE_THROWS_AS(ArrayGeometry({}, 0), Error);
  REQUIRE_THROWS_AS(ArrayGeometry({{0, 0, 0}}, 1), Error);
  REQUIRE_THROWS_AS(ArrayGeometry({{0, 0, 0}, {1.0, 0, 0}}, 0), Error);
  REQUIRE_THROWS_AS(ArrayGeometry({{0, 0, std::nan("")}}, 0), Error);
  REQUIRE(glasses_preset().size() == 7);
  REQUIRE(glasses_preset().reference_index() == 0);
}

TEST_CASE("geometry files round-trip and are validated", "[geometry]") {
  const auto path = temp_file("preset.json");
  save_geometry(glasses_preset(), path);
  const auto loaded = load_geometry(path);
  REQUIRE(loaded.size() == 7);
  for (std::size_t m = 0; m < 7; ++m) REQUIRE(loaded.mic(m) == glasses_preset().mic(m));

  const auto single = temp_file("single.json");
  std::ofstream(single) << R"({"name": "one", "reference_index": 0, "mics": [[0, 0, 0]]})";
  REQUIRE(load_geometry(single).size() == 1);

  const auto wide = temp_file("wide.json");
  std::ofstream(wide) << R"({"name": "wide", "reference_index": 0, "mics": [[0, 0, 0], [1, 0, 0]]})";
  REQUIRE_THROWS_AS(load_geometry(wide), Error);

  const auto broken = temp_file("broken.json");
  std::ofstream(broken) << R"({"name": "x", "mics": [[0, 0]]})";
  REQUIRE_THROWS_AS(load_geometry(broken), Error);
  REQUIRE_THROWS_AS(load_geometry(temp_file("does_not_exist.json")), Error);
}
