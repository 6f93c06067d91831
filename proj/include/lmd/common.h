#ifndef LMD_COMMON_H_
#define LMD_COMMON_H_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lmd {

using Point2 = Eigen::Vector2d;
using PointList = std::vector<Point2, Eigen::aligned_allocator<Point2>>;

// Robot pose in the world frame: position (m) and heading (rad).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Point2 position() const { return {x, y}; }
  bool operator==(const Pose2&) const = default;
};

// Identifies a local map within a collection of datasets.
struct MapId {
  std::string dataset;
  std::uint32_t index = 0;

  std::string str() const { return dataset + ":" + std::to_string(index); }
  auto operator<=>(const MapId&) const = default;
  bool operator==(const MapId&) const = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Rotates a point counterclockwise by angle (rad) about the origin.
inline Point2 rotate(const Point2& p, double angle) {
  if (angle == 0.0) return p;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p.x() - s * p.y(), s * p.x() + c * p.y()};
}

// Exact rotation by quarter_turns * 90 degrees counterclockwise.
inline Point2 rotate_quarter_turns(const Point2& p, int quarter_turns) {
  switch (((quarter_turns % 4) + 4) % 4) {
    case 1: return {-p.y(), p.x()};
    case 2: return {-p.x(), -p.y()};
    case 3: return {p.y(), -p.x()};
    default: return p;
  }
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace lmd

#endif  // LMD_COMMON_H_
