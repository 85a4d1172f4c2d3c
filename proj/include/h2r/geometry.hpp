#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace h2r {

inline constexpr double kOrthonormalTol = 1e-9;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return s * a; }
  friend constexpr Vec3 operator/(Vec3 a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  Vec3& operator+=(Vec3 b) { return *this = *this + b; }
  Vec3& operator-=(Vec3 b) { return *this = *this - b; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline double distance(Vec3 a, Vec3 b) { return norm(a - b); }

// General 3x3 matrix, row-major. No invariants.
struct Mat3 {
  std::array<double, 9> m{};

  static constexpr Mat3 identity() { return Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }
  static constexpr Mat3 from_columns(Vec3 c0, Vec3 c1, Vec3 c2) {
    return Mat3{{c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z}};
  }

  constexpr double operator()(std::size_t r, std::size_t c) const { return m[r * 3 + c]; }
  constexpr double& operator()(std::size_t r, std::size_t c) { return m[r * 3 + c]; }

  constexpr Vec3 column(std::size_t c) const { return {m[c], m[3 + c], m[6 + c]}; }
  constexpr Mat3 transpose() const {
    return Mat3{{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
  }
  constexpr double trace() const { return m[0] + m[4] + m[8]; }
  constexpr double determinant() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
  double frobenius_norm() const;
  bool finite() const;

  friend Mat3 operator*(const Mat3& a, const Mat3& b);
  friend Vec3 operator*(const Mat3& a, Vec3 v);
  friend Mat3 operator+(const Mat3& a, const Mat3& b);
  friend Mat3 operator-(const Mat3& a, const Mat3& b);
  friend Mat3 operator*(double s, const Mat3& a);
  friend constexpr bool operator==(const Mat3&, const Mat3&) = default;
};

// Inverse of a general matrix; throws SingularMatrix when det is ~0.
Mat3 inverse(const Mat3& a);

// Proper rotation. Construction either validates (from_matrix) or projects
// (orthonormalize); products of valid rotations are kept without re-checking.
class Rot3 {
 public:
  Rot3() : m_(Mat3::identity()) {}

  static Rot3 identity() { return Rot3{}; }
  // Throws InvalidRotation unless columns are orthonormal and det = +1 within tol.
  static Rot3 from_matrix(const Mat3& m, double tol = kOrthonormalTol);
  static Rot3 from_row_major(const std::array<double, 9>& rows, double tol = kOrthonormalTol) {
    return from_matrix(Mat3{rows}, tol);
  }
  static Rot3 about_x(double angle);
  static Rot3 about_y(double angle);
  static Rot3 about_z(double angle);
  // Rodrigues; `axis` need not be unit but must be non-zero.
  static Rot3 from_axis_angle(Vec3 axis, double angle);
  // exp map of a rotation vector (axis * angle).
  static Rot3 exp(Vec3 rotation_vector);
  // (w, x, y, z); normalized internally.
  static Rot3 from_quaternion(const std::array<double, 4>& wxyz);

  const Mat3& matrix() const { return m_; }
  double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  const std::array<double, 9>& row_major() const { return m_.m; }

  Rot3 inverse() const { return Rot3(m_.transpose()); }
  // log map: rotation vector with norm in [0, pi].
  Vec3 log() const;
  std::array<double, 4> to_quaternion() const;
  // ZYX intrinsic (roll about x, pitch about y, yaw about z), R = Rz(yaw) Ry(pitch) Rx(roll).
  Vec3 to_rpy() const;

  friend Rot3 operator*(const Rot3& a, const Rot3& b) { return Rot3(a.m_ * b.m_); }
  friend Vec3 operator*(const Rot3& a, Vec3 v) { return a.m_ * v; }
  friend bool operator==(const Rot3&, const Rot3&) = default;

 private:
  explicit Rot3(const Mat3& m) : m_(m) {}
  friend Rot3 orthonormalize(const Mat3& m);

  Mat3 m_;
};

struct Pose {
  Vec3 position;
  Rot3 rotation;
  friend bool operator==(const Pose&, const Pose&) = default;
};

// Largest absolute entry of R^T R - I.
double orthonormality_residual(const Mat3& m);
bool is_rotation(const Mat3& m, double tol = kOrthonormalTol);

// Nearest proper rotation in Frobenius norm (orthogonal polar factor).
// Throws SingularMatrix if rank < 3 or det(m) <= 0.
Rot3 orthonormalize(const Mat3& m);

// Angle of r in [0, pi].
double rotation_angle(const Rot3& r);

// Geodesic interpolation from `from` toward `to`; fraction 0 returns `from`.
Rot3 interpolate_geodesic(const Rot3& from, const Rot3& to, double fraction);

}  // namespace h2r
