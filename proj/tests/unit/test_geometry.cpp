#include <doctest.h>

#include <numbers>

#include "h2r/error.hpp"
#include "h2r/geometry.hpp"
#include "support/oracles.hpp"

using namespace h2r;
using h2r::test::Rng;

namespace {
constexpr double kPi = std::numbers::pi;
using h2r::test::throws_code;
}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("vector basics") {
    CHECK(cross({1, 0, 0}, {0, 1, 0}) == Vec3{0, 0, 1});
    CHECK(dot({1, 2, 3}, {4, 5, 6}) == 32.0);
    CHECK(norm({3, 4, 0}) == 5.0);

    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
      const Vec3 a = test::random_vec(rng, -10, 10), b = test::random_vec(rng, -10, 10);
      const Vec3 c = cross(a, b);
      const double scale = norm(a) * norm(b) * (norm(a) + norm(b));
      CHECK(std::abs(dot(c, a)) <= 1e-12 * scale);
      CHECK(std::abs(dot(c, b)) <= 1e-12 * scale);
    }
  }

  TEST_CASE("orthonormalize fixed points") {
    CHECK(orthonormalize(Mat3::identity()).matrix() == Mat3::identity());
    const Rot3 rz = Rot3::about_z(kPi / 6);
    CHECK(test::max_abs_diff(orthonormalize(rz.matrix()).matrix(), rz.matrix()) < 1e-12);
  }

  TEST_CASE("orthonormalize matches the SVD polar factor") {
    Rng rng(11);
    const Mat3 rz = Rot3::about_z(kPi / 6).matrix();
    for (int i = 0; i < 200; ++i) {
      Mat3 noisy = rz;
      for (double& v : noisy.m) v += test::uniform(rng, -1e-4, 1e-4);
      const Rot3 r = orthonormalize(noisy);
      CHECK(orthonormality_residual(r.matrix()) < 1e-12);
      CHECK(r.matrix().determinant() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(test::max_abs_diff(r.matrix(), test::polar_oracle(noisy)) < 1e-12);
    }
    // Large perturbations of random rotations, still positive determinant.
    for (int i = 0; i < 200; ++i) {
      Mat3 m = test::random_rotation(rng).matrix();
      for (double& v : m.m) v += test::uniform(rng, -0.2, 0.2);
      if (m.determinant() <= 0.1) continue;
      CHECK(test::max_abs_diff(orthonormalize(m).matrix(), test::polar_oracle(m)) < 1e-10);
    }
  }

  TEST_CASE("orthonormalize is idempotent") {
    Rng rng(12);
    for (int i = 0; i < 500; ++i) {
      Mat3 m = test::random_rotation(rng).matrix();
      for (double& v : m.m) v += test::uniform(rng, -0.05, 0.05);
      const Rot3 once = orthonormalize(m);
      CHECK(test::max_abs_diff(orthonormalize(once.matrix()).matrix(), once.matrix()) < 1e-12);
    }
  }

  TEST_CASE("orthonormalize rejects degenerate input") {
    CHECK(throws_code([] { orthonormalize(Mat3{}); }, ErrorCode::SingularMatrix));
    CHECK(throws_code([] { orthonormalize(Mat3{{1, 0, 0, 0, 1, 0, 0, 0, -1}}); }, ErrorCode::SingularMatrix));
    CHECK(throws_code([] { orthonormalize(Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 0}}); }, ErrorCode::SingularMatrix));
    CHECK(throws_code([] { orthonormalize(Mat3{{NAN, 0, 0, 0, 1, 0, 0, 0, 1}}); }, ErrorCode::SingularMatrix));
  }

  TEST_CASE("from_matrix validates") {
    CHECK_NOTHROW(Rot3::from_matrix(Rot3::about_x(0.3).matrix()));
    CHECK(throws_code([] { Rot3::from_matrix(Mat3{{1, 0, 0, 0, 1, 0, 0, 0, -1}}); }, ErrorCode::InvalidRotation));
    CHECK(throws_code([] { Rot3::from_matrix(Mat3{{1.001, 0, 0, 0, 1, 0, 0, 0, 1}}); }, ErrorCode::InvalidRotation));
  }

  TEST_CASE("rotation_angle") {
    CHECK(rotation_angle(Rot3{}) == 0.0);
    CHECK(rotation_angle(Rot3::about_z(kPi / 2)) == doctest::Approx(kPi / 2).epsilon(1e-15));
    Rng rng(13);
    for (int i = 0; i < 1000; ++i) {
      const Vec3 axis = test::random_unit(rng);
      CHECK(std::abs(rotation_angle(Rot3::from_axis_angle(axis, 1.234)) - 1.234) < 1e-12);
      const Rot3 r = test::random_rotation(rng);
      CHECK(std::abs(rotation_angle(r) - test::angle_oracle(r)) < 1e-12);
    }
    CHECK(std::abs(rotation_angle(Rot3::about_y(kPi)) - kPi) < 1e-12);
  }

  TEST_CASE("rotation angle is conjugation invariant") {
    Rng rng(14);
    for (int i = 0; i < 2000; ++i) {
      const Rot3 r = test::random_rotation(rng), q = test::random_rotation(rng);
      CHECK(std::abs(rotation_angle(q * r * q.inverse()) - rotation_angle(r)) < 1e-9);
    }
  }

  TEST_CASE("log and exp are inverse") {
    Rng rng(15);
    for (int i = 0; i < 1000; ++i) {
      const Rot3 r = test::random_rotation(rng);
      CHECK(test::max_abs_diff(Rot3::exp(r.log()).matrix(), r.matrix()) < 1e-12);
    }
    // Near pi the skew part vanishes; the axis must still be recovered.
    const Vec3 axis = Vec3{1, 2, 3} / norm({1, 2, 3});
    for (double a : {kPi, kPi - 1e-9, kPi - 1e-6}) {
      const Rot3 r = Rot3::from_axis_angle(axis, a);
      CHECK(test::max_abs_diff(Rot3::exp(r.log()).matrix(), r.matrix()) < 1e-9);
    }
  }

  TEST_CASE("quaternion round trip") {
    Rng rng(16);
    for (int i = 0; i < 1000; ++i) {
      const Rot3 r = test::random_rotation(rng);
      CHECK(test::max_abs_diff(Rot3::from_quaternion(r.to_quaternion()).matrix(), r.matrix()) < 1e-12);
    }
    const auto q = Rot3::about_z(kPi / 2).to_quaternion();
    CHECK(q[0] == doctest::Approx(std::sqrt(0.5)));
    CHECK(q[3] == doctest::Approx(std::sqrt(0.5)));
  }

  TEST_CASE("rpy") {
    const Rot3 r = Rot3::about_z(0.3) * Rot3::about_y(-0.2) * Rot3::about_x(0.1);
    const Vec3 rpy = r.to_rpy();
    CHECK(rpy.x == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(rpy.y == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK(rpy.z == doctest::Approx(0.3).epsilon(1e-12));
  }

  TEST_CASE("geodesic interpolation") {
    const Rot3 a = Rot3::about_z(0.2), b = Rot3::about_z(1.0);
    CHECK(interpolate_geodesic(a, b, 0.0) == a);
    CHECK(interpolate_geodesic(a, b, 1.0) == b);
    CHECK(test::max_abs_diff(interpolate_geodesic(a, b, 0.25).matrix(), Rot3::about_z(0.4).matrix()) < 1e-12);
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
      const Rot3 p = test::random_rotation(rng), q = test::random_rotation(rng);
      const double f = test::uniform(rng, 0.0, 1.0);
      const Rot3 mid = interpolate_geodesic(p, q, f);
      CHECK(orthonormality_residual(mid.matrix()) < 1e-12);
      CHECK(std::abs(rotation_angle(p.inverse() * mid) - f * rotation_angle(p.inverse() * q)) < 1e-9);
    }
  }

  TEST_CASE("general inverse") {
    const Mat3 m{{2, 1, 0, 0, 3, 1, 1, 0, 4}};
    const Mat3 id = m * inverse(m);
    CHECK(test::max_abs_diff(id, Mat3::identity()) < 1e-14);
    CHECK(throws_code([] { inverse(Mat3{{1, 2, 3, 2, 4, 6, 0, 0, 1}}); }, ErrorCode::SingularMatrix));
  }
}
