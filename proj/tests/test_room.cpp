// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "glasswave/room.hpp"
#include "oracles.hpp"

using namespace glasswave;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RoomSpec shoebox(double beta, int order) {
  RoomSpec r;
  r.dimensions = {6.0, 5.0, 3.0};
  r.reflection.fill(beta);
  r.max_order = order;
  return r;
}

const ArrayGeometry& single_mic() {
  static const ArrayGeometry g({{0, 0, 0}}, 0, "one");
  return g;
}

long peak_index(const Eigen::VectorXd& x) {
  Eigen::Index i = 0;
  x.cwiseAbs().maxCoeff(&i);
  return static_cast<long>(i);
}

}  // namespace

TEST_CASE("direct path only at order zero", "[room]") {
  const auto room = shoebox(0.9, 0);
  const Eigen::Vector3d src(1.0, 2.0, 1.5), mic(4.0, 3.0, 1.2);
  const auto arrivals = image_arrivals(room, src, mic);
  REQUIRE(arrivals.size() == 1);
  const double d = (src - mic).norm();
  REQUIRE_THAT(arrivals[0].delay_samples, WithinRel(d / 343.0 * 16000.0, 1e-14));
  REQUIRE_THAT(arrivals[0].amplitude, WithinRel(1.0 / (4.0 * kPi * d), 1e-14));
}

TEST_CASE("first order yields the direct path and six wall images", "[room]") {
  auto room = shoebox(0.0, 1);
  room.reflection = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4};
  // mic chosen so no two images are equidistant
  const Eigen::Vector3d s(1.0, 2.0, 1.5), m(4.0, 3.3, 1.1);
  const auto arrivals = image_arrivals(room, s, m);
  REQUIRE(arrivals.size() == 7);

  // Mirror images across x=0, x=Lx, y=0, y=Ly, z=0, z=Lz with their wall coefficients.
  struct Expected {
    Eigen::Vector3d pos;
    double beta;
  };
  const std::vector<Expected> expected{
      {s, 1.0},
      {{-s.x(), s.y(), s.z()}, 0.9},         {{2 * 6.0 - s.x(), s.y(), s.z()}, 0.8},
      {{s.x(), -s.y(), s.z()}, 0.7},         {{s.x(), 2 * 5.0 - s.y(), s.z()}, 0.6},
      {{s.x(), s.y(), -s.z()}, 0.5},         {{s.x(), s.y(), 2 * 3.0 - s.z()}, 0.4},
  };
  for (const auto& e : expected) {
    const double d = (e.pos - m).norm();
    const auto hit = std::find_if(arrivals.begin(), arrivals.end(), [&](const Arrival& a) {
      return std::abs(a.delay_samples - d / 343.0 * 16000.0) < 1e-9;
    });
    REQUIRE(hit != arrivals.end());
    REQUIRE_THAT(hit->amplitude, WithinRel(e.beta / (4.0 * kPi * d), 1e-12));
  }
}

TEST_CASE("second-order images carry products of wall coefficients", "[room]") {
  auto room = shoebox(0.0, 2);
  room.reflection = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4};
  const Eigen::Vector3d s(1.0, 2.0, 1.5), m(4.0, 3.0, 1.2);
  const auto arrivals = image_arrivals(room, s, m);
  // Image through x=Lx then x=0: position s + 2 Lx, one hit on each x wall.
  const double d = (Eigen::Vector3d(s.x() + 12.0, s.y(), s.z()) - m).norm();
  const auto hit = std::find_if(arrivals.begin(), arrivals.end(), [&](const Arrival& a) {
    return std::abs(a.delay_samples - d / 343.0 * 16000.0) < 1e-9;
  });
  REQUIRE(hit != arrivals.end());
  REQUIRE(hit->order == 2);
  REQUIRE_THAT(hit->amplitude, WithinRel(0.9 * 0.8 / (4.0 * kPi * d), 1e-12));
  // 1 + 6 + 18 images up to order 2 in three dimensions
  REQUIRE(arrivals.size() == 25);
}

TEST_CASE("zero reflection equals the direct-path response", "[room]") {
  const Eigen::Vector3d src(2.0, 1.0, 1.0);
  const ArrayPose pose{{4.0, 3.0, 1.5}, 0.3};
  const auto anechoic = simulate_rir(shoebox(0.0, 5), src, glasses_preset(), pose);
  const auto direct = simulate_rir(shoebox(0.7, 0), src, glasses_preset(), pose);
  for (std::size_t m = 0; m < 7; ++m) REQUIRE(anechoic.rirs[0][m] == direct.rirs[0][m]);
}

TEST_CASE("fractional impulse is exact at integer delays", "[room]") {
  Eigen::VectorXd rir = Eigen::VectorXd::Zero(200);
  add_fractional_impulse(rir, 100.0, 0.5);
  REQUIRE_THAT(rir(100), WithinAbs(0.5, 1e-15));
  rir(100) = 0.0;
  REQUIRE(rir.cwiseAbs().maxCoeff() < 1e-15);

  Eigen::VectorXd frac = Eigen::VectorXd::Zero(200);
  add_fractional_impulse(frac, 50.3, 1.0);
  REQUIRE(peak_index(frac) == 50);
  for (Eigen::Index i = 0; i < 200; ++i) {
    if (i < 10 || i > 90) REQUIRE(frac(i) == 0.0);  // outside the 81-tap support
  }
}

TEST_CASE("direct-path peaks land within one sample of d/c fs", "[room]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    RoomSpec room = shoebox(0.8, 0);
    room.dimensions = {5.0 + 5.0 * u(rng), 5.0 + 5.0 * u(rng), 2.0 + 4.0 * u(rng)};
    auto inside = [&] {
      return Eigen::Vector3d(0.3 + (room.dimensions.x() - 0.6) * u(rng), 0.3 + (room.dimensions.y() - 0.6) * u(rng),
                             0.3 + (room.dimensions.z() - 0.6) * u(rng));
    };
    const Eigen::Vector3d src = inside();
    const Eigen::Vector3d mic = inside();
    const auto set = simulate_rir(room, src, single_mic(), ArrayPose{mic, 0.0});
    const double expected = (src - mic).norm() / 343.0 * 16000.0;
    REQUIRE(std::abs(static_cast<double>(peak_index(set.rirs[0][0])) - expected) <= 1.0);
    // Nothing precedes the arrival by more than the interpolator's half support.
    Eigen::Index first = 0;
    while (set.rirs[0][0](first) == 0.0) ++first;
    REQUIRE(static_cast<double>(first) >= std::floor(expected) - 40.0);
  }
}

TEST_CASE("RIR energy does not grow when a wall absorbs more", "[room]") {
  const Eigen::Vector3d src(2.0, 1.5, 1.2);
  const ArrayPose pose{{4.0, 3.0, 1.5}, 0.0};
  double previous = std::numeric_limits<double>::infinity();
  for (double beta : {0.95, 0.8, 0.5, 0.2, 0.0}) {
    auto room = shoebox(0.7, 6);
    room.reflection[3] = beta;
    const auto set = simulate_rir(room, src, single_mic(), pose, 4000);
    const double energy = set.rirs[0][0].squaredNorm();
    REQUIRE(energy <= previous + 1e-15);
    previous = energy;
  }
}

TEST_CASE("simulate_rir is deterministic and validates positions", "[room]") {
  const auto room = shoebox(0.8, 4);
  const ArrayPose pose{{3.0, 2.0, 1.5}, 1.0};
  const auto a = simulate_rir(room, Eigen::Vector3d(1.0, 1.0, 1.0), glasses_preset(), pose);
  const auto b = simulate_rir(room, Eigen::Vector3d(1.0, 1.0, 1.0), glasses_preset(), pose);
  for (std::size_t m = 0; m < 7; ++m) REQUIRE(a.rirs[0][m] == b.rirs[0][m]);

  REQUIRE_THROWS_AS(simulate_rir(room, Eigen::Vector3d(7.0, 1.0, 1.0), glasses_preset(), pose), Error);
  REQUIRE_THROWS_AS(simulate_rir(room, Eigen::Vector3d(1.0, 1.0, 1.0), glasses_preset(), ArrayPose{{5.995, 2.0, 1.5}, 0.0}),
                    Error);
  try {
    simulate_rir(room, Eigen::Vector3d(3.0, 2.0, 1.5), single_mic(), ArrayPose{{3.0, 2.0, 1.5}, 0.0});
    FAIL("expected degenerate geometry");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::degenerate_geometry);
  }
  RoomSpec bad = room;
  bad.reflection[0] = 1.0;
  REQUIRE_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("FFT convolution matches direct convolution", "[room]") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd signal(16000), rir(4096);
  for (auto& v : signal) v = n(rng);
  for (Eigen::Index i = 0; i < rir.size(); ++i) rir(i) = n(rng) * std::exp(-static_cast<double>(i) / 800.0);
  const Eigen::VectorXd fast = fft_convolve(signal, rir);
  const Eigen::VectorXd slow = oracle::direct_convolve(signal, rir);
  REQUIRE(fast.size() == 16000 + 4096 - 1);
  REQUIRE((fast - slow).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("multichannel convolution with impulses", "[room]") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd x(500);
  for (auto& v : x) v = n(rng);
  RirSet set;
  set.sample_rate_hz = 16000.0;
  Eigen::VectorXd at0 = Eigen::VectorXd::Zero(1), at100 = Eigen::VectorXd::Zero(101);
  at0(0) = 1.0;
  at100(100) = 1.0;
  set.rirs = {{at0, at100}};
  const auto y = convolve_multichannel(x, 16000.0, set);
  REQUIRE(y.rows() == 2);
  REQUIRE(y.cols() == 600);
  REQUIRE((y.row(0).head(500).transpose() - x).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE(y.row(0).tail(100).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE(y.row(1).head(100).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((y.row(1).tail(500).transpose() - x).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE_THROWS_AS(convolve_multichannel(x, 44100.0, set), Error);
}

TEST_CASE("sampled rooms stay in range and are reproducible", "[room]") {
  const RoomRanges ranges;
  std::mt19937_64 a(5), b(5);
  const auto ra = sample_room(a, ranges, 2);
  const auto rb = sample_room(b, ranges, 2);
  REQUIRE(ra.room.dimensions == rb.room.dimensions);
  REQUIRE(ra.placements.partner == rb.placements.partner);
  REQUIRE(ra.placements.noise == rb.placements.noise);

  std::mt19937_64 rng(123);
  for (int i = 0; i < 10000; ++i) {
    const auto r = sample_room(rng, ranges, static_cast<std::size_t>(i % 4));
    const auto& d = r.room.dimensions;
    REQUIRE((d.x() >= 5.0 && d.x() <= 10.0 && d.y() >= 5.0 && d.y() <= 10.0 && d.z() >= 2.0 && d.z() <= 6.0));
    const auto& p = r.placements;
    REQUIRE(p.bystanders.size() == static_cast<std::size_t>(i % 4));
    for (const auto& q : {p.array.position, p.wearer_mouth, p.partner, p.noise}) REQUIRE(r.room.contains(q, 0.3));
    for (const auto& q : p.bystanders) REQUIRE(r.room.contains(q, 0.3));
    const Eigen::Vector3d rel = p.array.rotation().transpose() * (p.partner - p.array.position);
    const double az = std::atan2(rel.y(), rel.x());
    const double horizontal = rel.head<2>().norm();
    REQUIRE(std::abs(az) <= kPi / 4.0 + 1e-12);
    REQUIRE((horizontal >= 1.0 - 1e-12 && horizontal <= 2.5 + 1e-12));
    REQUIRE((p.wearer_mouth - p.array.position).norm() == Catch::Approx(default_mouth_offset().norm()));
  }
}

TEST_CASE("Eyring mapping is monotone in RT60", "[room]") {
  const Eigen::Vector3d dims(6.0, 5.0, 3.0);
  double previous = 0.0;
  for (double rt : {0.1, 0.2, 0.4, 0.8, 1.6}) {
    const double beta = eyring_reflection(dims, rt);
    REQUIRE((beta > previous && beta < 1.0));
    previous = beta;
  }
}

TEST_CASE("room JSON round trip", "[room]") {
  auto room = shoebox(0.5, 9);
  room.reflection[2] = 0.25;
  const auto back = room_from_json(to_json(room));
  REQUIRE(back.dimensions == room.dimensions);
  REQUIRE(back.reflection == room.reflection);
  REQUIRE(back.max_order == 9);
}
