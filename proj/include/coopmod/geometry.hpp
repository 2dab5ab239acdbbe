#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace coopmod {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// 2-D point or vector. Used for image pixels and for road-frame positions.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double k, Vec2 v) { return {k * v.x, k * v.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;

  [[nodiscard]] constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
  [[nodiscard]] double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Object classes shared by perception, CPM payloads and fusion.
enum class ObjectClass : std::uint8_t { car = 1, truck_bus = 2, cyclist = 3 };

inline constexpr bool is_valid_object_class(std::uint8_t raw) { return raw >= 1 && raw <= 3; }

inline std::string_view to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::car: return "car";
    case ObjectClass::truck_bus: return "truck_bus";
    case ObjectClass::cyclist: return "cyclist";
  }
  return "unknown";
}

}  // namespace coopmod
