#include "h2r/geometry.hpp"

#include <algorithm>
#include <numbers>

#include "h2r/error.hpp"

namespace h2r {

double Mat3::frobenius_norm() const {
  double s = 0.0;
  for (double v : m) s += v * v;
  return std::sqrt(s);
}

bool Mat3::finite() const {
  return std::all_of(m.begin(), m.end(), [](double v) { return std::isfinite(v); });
}

Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 out;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      out(r, c) = a(r, 0) * b(0, c) + a(r, 1) * b(1, c) + a(r, 2) * b(2, c);
    }
  }
  return out;
}

Vec3 operator*(const Mat3& a, Vec3 v) {
  return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
          a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
          a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

Mat3 operator+(const Mat3& a, const Mat3& b) {
  Mat3 out;
  for (std::size_t i = 0; i < 9; ++i) out.m[i] = a.m[i] + b.m[i];
  return out;
}

Mat3 operator-(const Mat3& a, const Mat3& b) {
  Mat3 out;
  for (std::size_t i = 0; i < 9; ++i) out.m[i] = a.m[i] - b.m[i];
  return out;
}

Mat3 operator*(double s, const Mat3& a) {
  Mat3 out;
  for (std::size_t i = 0; i < 9; ++i) out.m[i] = s * a.m[i];
  return out;
}

Mat3 inverse(const Mat3& a) {
  const double det = a.determinant();
  const double scale = a.frobenius_norm();
  if (!std::isfinite(det) || std::abs(det) <= 1e-14 * scale * scale * scale) {
    throw Error(ErrorCode::SingularMatrix, "matrix is not invertible");
  }
  // adjugate / det
  Mat3 adj;
  adj(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
  adj(0, 1) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
  adj(0, 2) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
  adj(1, 0) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
  adj(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
  adj(1, 2) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
  adj(2, 0) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
  adj(2, 1) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
  adj(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  return (1.0 / det) * adj;
}

double orthonormality_residual(const Mat3& m) {
  const Mat3 gram = m.transpose() * m;
  double worst = 0.0;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      worst = std::max(worst, std::abs(gram(r, c) - (r == c ? 1.0 : 0.0)));
    }
  }
  return worst;
}

bool is_rotation(const Mat3& m, double tol) {
  return m.finite() && orthonormality_residual(m) <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

Rot3 Rot3::from_matrix(const Mat3& m, double tol) {
  if (!is_rotation(m, tol)) {
    throw Error(ErrorCode::InvalidRotation,
                "matrix is not a proper rotation (residual " +
                    std::to_string(m.finite() ? orthonormality_residual(m) : INFINITY) + ")");
  }
  return Rot3(m);
}

Rot3 Rot3::about_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Rot3(Mat3{{1, 0, 0, 0, c, -s, 0, s, c}});
}

Rot3 Rot3::about_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Rot3(Mat3{{c, 0, s, 0, 1, 0, -s, 0, c}});
}

Rot3 Rot3::about_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Rot3(Mat3{{c, -s, 0, s, c, 0, 0, 0, 1}});
}

Rot3 Rot3::from_axis_angle(Vec3 axis, double angle) {
  const double n = norm(axis);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::InvalidRotation, "axis must be finite and non-zero");
  }
  const Vec3 k = axis / n;
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return Rot3(Mat3{{t * k.x * k.x + c, t * k.x * k.y - s * k.z, t * k.x * k.z + s * k.y,
                    t * k.x * k.y + s * k.z, t * k.y * k.y + c, t * k.y * k.z - s * k.x,
                    t * k.x * k.z - s * k.y, t * k.y * k.z + s * k.x, t * k.z * k.z + c}});
}

Rot3 Rot3::exp(Vec3 w) {
  const double angle = norm(w);
  if (angle < 1e-300) return Rot3::identity();
  return from_axis_angle(w, angle);
}

Rot3 Rot3::from_quaternion(const std::array<double, 4>& q) {
  const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::InvalidRotation, "quaternion must be finite and non-zero");
  }
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  return orthonormalize(Mat3{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                              2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                              2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}});
}

Vec3 Rot3::log() const {
  const Mat3& r = m_;
  const Vec3 skew{(r(2, 1) - r(1, 2)) * 0.5, (r(0, 2) - r(2, 0)) * 0.5, (r(1, 0) - r(0, 1)) * 0.5};
  const double sin_a = norm(skew);
  const double cos_a = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double angle = std::atan2(sin_a, cos_a);
  if (angle < 1e-12) return skew;
  if (cos_a > -0.9) return (angle / sin_a) * skew;

  // Near pi the skew part vanishes; recover the axis from the symmetric part.
  // R + R^T = 2 cos(a) I + 2 (1 - cos(a)) k k^T
  const double t = 1.0 - cos_a;
  Vec3 k{std::sqrt(std::max(0.0, (r(0, 0) - cos_a) / t)),
         std::sqrt(std::max(0.0, (r(1, 1) - cos_a) / t)),
         std::sqrt(std::max(0.0, (r(2, 2) - cos_a) / t))};
  std::size_t pivot = 0;
  if (k.y > k[pivot]) pivot = 1;
  if (k.z > k[pivot]) pivot = 2;
  const double kp = k[pivot];
  for (std::size_t i = 0; i < 3; ++i) {
    if (i == pivot) continue;
    k[i] = (r(i, pivot) + r(pivot, i)) * 0.5 / (t * kp);
  }
  k = k / norm(k);
  // Resolve the sign with the skew part when it carries information.
  if (dot(k, skew) < 0.0) k = -k;
  return angle * k;
}

std::array<double, 4> Rot3::to_quaternion() const {
  const Mat3& r = m_;
  const double tr = r.trace();
  std::array<double, 4> q{};
  if (tr > 0.0) {
    const double s = std::sqrt(tr + 1.0) * 2.0;
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) > r(2, 2)) {
    const double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
  } else {
    const double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  if (q[0] < 0.0) {
    for (double& v : q) v = -v;
  }
  return q;
}

Vec3 Rot3::to_rpy() const {
  const Mat3& r = m_;
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double roll = 0.0;
  double yaw = 0.0;
  if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    // gimbal lock: fold everything into yaw
    yaw = std::atan2(-r(0, 1), r(1, 1));
  }
  return {roll, pitch, yaw};
}

Rot3 orthonormalize(const Mat3& m) {
  if (!m.finite()) throw Error(ErrorCode::SingularMatrix, "matrix has non-finite entries");
  const double scale = m.frobenius_norm();
  const double det = m.determinant();
  if (!(scale > 0.0) || std::abs(det) <= 1e-12 * scale * scale * scale) {
    throw Error(ErrorCode::SingularMatrix, "matrix is rank deficient");
  }
  if (det <= 0.0) {
    throw Error(ErrorCode::SingularMatrix, "polar factor is a reflection (det <= 0)");
  }

  // Scaled Newton iteration for the orthogonal polar factor:
  // X <- (g X + (g X)^{-T}) / 2 with g = |det X|^{-1/3}.
  Mat3 x = m;
  for (int iter = 0; iter < 100; ++iter) {
    const double g = std::cbrt(1.0 / std::abs(x.determinant()));
    const Mat3 next = 0.5 * (g * x + (1.0 / g) * inverse(x).transpose());
    const double step = (next - x).frobenius_norm();
    x = next;
    if (step < 1e-15) break;
  }
  // Two unscaled polishing steps pin the result to the orthogonal manifold.
  for (int iter = 0; iter < 2; ++iter) x = 0.5 * (x + inverse(x).transpose());
  if (x.determinant() <= 0.0) {
    throw Error(ErrorCode::SingularMatrix, "projection produced an improper rotation");
  }
  return Rot3(x);
}

double rotation_angle(const Rot3& r) {
  // Same value as arccos((tr - 1) / 2) clamped, evaluated through atan2 so the
  // result stays accurate near 0 and pi.
  const Mat3& m = r.matrix();
  const Vec3 skew{(m(2, 1) - m(1, 2)) * 0.5, (m(0, 2) - m(2, 0)) * 0.5, (m(1, 0) - m(0, 1)) * 0.5};
  const double cos_a = std::clamp((m.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::atan2(norm(skew), cos_a);
}

Rot3 interpolate_geodesic(const Rot3& from, const Rot3& to, double fraction) {
  if (fraction <= 0.0) return from;
  if (fraction >= 1.0) return to;
  const Vec3 delta = (from.inverse() * to).log();
  return orthonormalize((from * Rot3::exp(fraction * delta)).matrix());
}

}  // namespace h2r
