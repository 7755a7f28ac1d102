#pragma once

// Minimal SVG output: meshes colored by a nodal field, polygons, arrows
// and point paths, in a square viewport mapped from model coordinates.

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "polyinc/mesh.hpp"

namespace polyinc {

class SvgCanvas {
 public:
  SvgCanvas(double xmin, double ymin, double xmax, double ymax, int pixels = 600)
      : x0_(xmin), y0_(ymin), s_(pixels / std::max(xmax - xmin, ymax - ymin)), w_(pixels), h_(pixels) {}

  static SvgCanvas around(const Mesh& m, int pixels = 600) {
    double a = 1e300, b = 1e300, c = -1e300, d = -1e300;
    for (const auto& p : m.nodes) {
      a = std::min(a, p.x);
      b = std::min(b, p.y);
      c = std::max(c, p.x);
      d = std::max(d, p.y);
    }
    return SvgCanvas(a, b, c, d, pixels);
  }

  /// Triangles filled by the mean nodal value on a blue-white-red ramp.
  void field(const Mesh& m, const Eigen::VectorXd& u) {
    const double lo = u.minCoeff(), hi = u.maxCoeff();
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      const auto& tr = m.triangles[t];
      const double v = (u[tr[0]] + u[tr[1]] + u[tr[2]]) / 3;
      const double s = hi > lo ? (v - lo) / (hi - lo) : 0.5;
      body_ << "<polygon points=\"" << pt(m.nodes[tr[0]]) << ' ' << pt(m.nodes[tr[1]]) << ' ' << pt(m.nodes[tr[2]])
            << "\" fill=\"" << ramp(s) << "\" stroke=\"none\"/>\n";
    }
  }

  void wireframe(const Mesh& m, const std::string& color = "#999", double width = 0.3) {
    for (const auto& tr : m.triangles)
      body_ << "<polygon points=\"" << pt(m.nodes[tr[0]]) << ' ' << pt(m.nodes[tr[1]]) << ' ' << pt(m.nodes[tr[2]])
            << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\"/>\n";
  }

  void polygon(const std::vector<Vec2>& v, const std::string& stroke, const std::string& fill = "none",
               double width = 1.5) {
    body_ << "<polygon points=\"";
    for (const auto& p : v) body_ << pt(p) << ' ';
    body_ << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\"/>\n";
  }

  void polyline(const std::vector<Vec2>& v, const std::string& stroke, double width = 1.0) {
    body_ << "<polyline points=\"";
    for (const auto& p : v) body_ << pt(p) << ' ';
    body_ << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\"/>\n";
  }

  void arrow(Vec2 from, Vec2 to, const std::string& color = "#222") {
    body_ << "<line x1=\"" << X(from) << "\" y1=\"" << Y(from) << "\" x2=\"" << X(to) << "\" y2=\"" << Y(to)
          << "\" stroke=\"" << color << "\" stroke-width=\"0.8\" marker-end=\"url(#head)\"/>\n";
  }

  void dot(Vec2 p, const std::string& color, double r = 2.5) {
    body_ << "<circle cx=\"" << X(p) << "\" cy=\"" << Y(p) << "\" r=\"" << r << "\" fill=\"" << color << "\"/>\n";
  }

  void text(Vec2 p, const std::string& s) {
    body_ << "<text x=\"" << X(p) << "\" y=\"" << Y(p) << "\" font-size=\"12\" font-family=\"sans-serif\">" << s
          << "</text>\n";
  }

  std::string str() const {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_ << "\">\n"
      << "<defs><marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" orient=\"auto\">"
      << "<path d=\"M0,0 L6,3 L0,6 z\"/></marker></defs>\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << body_.str() << "</svg>\n";
    return o.str();
  }

 private:
  double X(Vec2 p) const { return (p.x - x0_) * s_; }
  double Y(Vec2 p) const { return h_ - (p.y - y0_) * s_; }
  std::string pt(Vec2 p) const {
    std::ostringstream o;
    o << X(p) << ',' << Y(p);
    return o.str();
  }
  static std::string ramp(double s) {
    s = std::clamp(s, 0.0, 1.0);
    int r, g, b;
    if (s < 0.5) {
      const double q = s / 0.5;
      r = static_cast<int>(59 + q * (255 - 59));
      g = static_cast<int>(76 + q * (255 - 76));
      b = static_cast<int>(192 + q * (255 - 192));
    } else {
      const double q = (s - 0.5) / 0.5;
      r = static_cast<int>(255 - q * (255 - 180));
      g = static_cast<int>(255 - q * (255 - 4));
      b = static_cast<int>(255 - q * (255 - 38));
    }
    std::ostringstream o;
    o << "rgb(" << r << ',' << g << ',' << b << ')';
    return o.str();
  }

  double x0_, y0_, s_;
  int w_, h_;
  std::ostringstream body_;
};

}  // namespace polyinc
