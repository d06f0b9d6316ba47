#pragma once

// Standard palette of basic shapes.

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "shapedl/geometry.hpp"

namespace shapedl::shapes {

inline Contour circle(double radius = 20.0, int vertices = 96) {
  std::vector<Vec2> pts;
  for (int i = 0; i < vertices; ++i) {
    const double a = 2.0 * std::numbers::pi * i / vertices;
    pts.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return Contour(std::move(pts));
}

inline Contour ellipse(double rx, double ry, int vertices = 96) {
  std::vector<Vec2> pts;
  for (int i = 0; i < vertices; ++i) {
    const double a = 2.0 * std::numbers::pi * i / vertices;
    pts.push_back({rx * std::cos(a), ry * std::sin(a)});
  }
  return Contour(std::move(pts));
}

inline Contour rectangle(double w, double h) {
  return Contour({{-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}});
}

inline Contour square(double side = 30.0) { return rectangle(side, side); }

inline Contour regular_polygon(int sides, double radius) {
  std::vector<Vec2> pts;
  for (int i = 0; i < sides; ++i) {
    const double a = std::numbers::pi / 2 + 2.0 * std::numbers::pi * i / sides;
    pts.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return Contour(std::move(pts));
}

inline Contour triangle(double radius = 22.0) { return regular_polygon(3, radius); }

inline Contour star(int points = 5, double outer = 24.0, double inner = 10.0) {
  std::vector<Vec2> pts;
  for (int i = 0; i < 2 * points; ++i) {
    const double r = i % 2 == 0 ? outer : inner;
    const double a = std::numbers::pi / 2 + std::numbers::pi * i / points;
    pts.push_back({r * std::cos(a), r * std::sin(a)});
  }
  return Contour(std::move(pts));
}

inline Contour cross(double arm = 10.0, double half = 25.0) {
  const double a = arm / 2;
  return Contour({{-a, -half}, {a, -half}, {a, -a}, {half, -a}, {half, a}, {a, a},
                  {a, half}, {-a, half}, {-a, a}, {-half, a}, {-half, -a}, {-a, -a}});
}

inline Contour l_shape(double w = 36.0, double h = 44.0, double t = 12.0) {
  return Contour({{0, 0}, {w, 0}, {w, t}, {t, t}, {t, h}, {0, h}});
}

inline Contour semicircle(double radius = 24.0, int vertices = 64) {
  std::vector<Vec2> pts;
  for (int i = 0; i <= vertices; ++i) {
    const double a = std::numbers::pi * i / vertices;
    pts.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return Contour(std::move(pts));
}

/// An irregular blob without rotational symmetry.
inline Contour blob(double radius = 22.0, int vertices = 96) {
  std::vector<Vec2> pts;
  for (int i = 0; i < vertices; ++i) {
    const double a = 2.0 * std::numbers::pi * i / vertices;
    const double r = radius * (1.0 + 0.25 * std::cos(a) + 0.15 * std::sin(2 * a + 0.7) +
                               0.08 * std::cos(3 * a + 1.9));
    pts.push_back({r * std::cos(a), r * std::sin(a)});
  }
  return Contour(std::move(pts));
}

struct NamedContour {
  std::string id;
  Contour contour;
};

/// The eight shapes seeded into a fresh store and used by the synthetic suite.
inline std::vector<NamedContour> standard_palette() {
  return {{"circle", circle()},        {"square", square()},        {"bar", rectangle(54, 16)},
          {"triangle", triangle()},    {"star", star()},            {"cross", cross()},
          {"l-shape", l_shape()},      {"semicircle", semicircle()}};
}

}  // namespace shapedl::shapes
