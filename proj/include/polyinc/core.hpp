#pragma once

// Small value types shared by every module: points, 2x2 matrices and the
// library error type.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace polyinc {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr const char* kVersion = "0.3.0";

enum class ErrorCode {
  InvalidInput,
  NonSimplePolygon,
  VertexOnInterface,
  DistanceTooLarge,
  CrossingMismatch,
  StripCollision,
  StripBoundViolation,
  SingularJacobian,
  RefinementStall,
  InvalidPolygon,
  NonConformingMesh,
  SolverBreakdown,
  DimensionMismatch,
  GramMismatch,
  SourceOnInterface,
  SourceTooCloseToVertex,
  OffsetOutOfRange,
  InfeasibleProjection,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NonSimplePolygon: return "NonSimplePolygon";
    case ErrorCode::VertexOnInterface: return "VertexOnInterface";
    case ErrorCode::DistanceTooLarge: return "DistanceTooLarge";
    case ErrorCode::CrossingMismatch: return "CrossingMismatch";
    case ErrorCode::StripCollision: return "StripCollision";
    case ErrorCode::StripBoundViolation: return "StripBoundViolation";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::RefinementStall: return "RefinementStall";
    case ErrorCode::InvalidPolygon: return "InvalidPolygon";
    case ErrorCode::NonConformingMesh: return "NonConformingMesh";
    case ErrorCode::SolverBreakdown: return "SolverBreakdown";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::GramMismatch: return "GramMismatch";
    case ErrorCode::SourceOnInterface: return "SourceOnInterface";
    case ErrorCode::SourceTooCloseToVertex: return "SourceTooCloseToVertex";
    case ErrorCode::OffsetOutOfRange: return "OffsetOutOfRange";
    case ErrorCode::InfeasibleProjection: return "InfeasibleProjection";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
constexpr double norm2(Vec2 a) { return dot(a, a); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
/// Counter-clockwise rotation by 90 degrees.
constexpr Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

/// Row-major 2x2 matrix.
struct Mat2 {
  double a = 0, b = 0, c = 0, d = 0;  // [[a, b], [c, d]]

  static constexpr Mat2 identity() { return {1, 0, 0, 1}; }
  static constexpr Mat2 zero() { return {0, 0, 0, 0}; }

  constexpr Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
  constexpr Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
  constexpr Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
  constexpr Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  constexpr Vec2 operator*(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
  constexpr Mat2 transpose() const { return {a, c, b, d}; }
  constexpr double det() const { return a * d - b * c; }
  constexpr double trace() const { return a + d; }
  /// Adjugate: adj(M) * M = det(M) I.
  constexpr Mat2 adjugate() const { return {d, -b, -c, a}; }
  Mat2 inverse() const { return adjugate() * (1.0 / det()); }
  /// Spectral norm (largest singular value).
  double norm2() const {
    const double s = a * a + b * b + c * c + d * d;
    const double dt = det();
    const double disc = std::sqrt(std::max(0.0, s * s - 4.0 * dt * dt));
    return std::sqrt(0.5 * (s + disc));
  }
  double max_abs() const {
    return std::max(std::max(std::abs(a), std::abs(b)), std::max(std::abs(c), std::abs(d)));
  }
  constexpr bool operator==(const Mat2&) const = default;
};

constexpr Mat2 operator*(double s, const Mat2& m) { return m * s; }

/// Outer product u v^T.
constexpr Mat2 outer(Vec2 u, Vec2 v) { return {u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y}; }

}  // namespace polyinc
