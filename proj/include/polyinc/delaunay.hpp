#pragma once

// Incremental Bowyer-Watson Delaunay triangulation with Ruppert-style
// conforming refinement. Constraint segments are recovered by splitting
// (no edge flips), so every final subsegment is a Delaunay edge.

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "polyinc/core.hpp"
#include "polyinc/predicates.hpp"

namespace polyinc::detail {

struct RefineOptions {
  std::function<double(Vec2)> size;          // target longest edge at a point
  std::function<bool(Vec2)> inside;          // domain membership of triangle centroids
  double min_angle_deg = 20.0;
  std::size_t max_points = 4'000'000;
};

struct InputSegment {
  int a, b;   // indices into the input point list
  int tag;    // caller-defined label carried to the subsegments
};

class ConformingDelaunay {
 public:
  struct Tri {
    std::array<int, 3> v;
    std::array<int, 3> nb;  // nb[i] is across the edge opposite v[i]
    bool alive = true;
  };

  std::vector<Vec2> pts;
  std::vector<Tri> tris;
  std::vector<char> is_input;
  std::map<std::pair<int, int>, int> subsegments;  // sorted endpoint pair -> tag
  double achieved_min_angle = 0;

  ConformingDelaunay(const std::vector<Vec2>& input, const std::vector<InputSegment>& segs, RefineOptions opt)
      : opt_(std::move(opt)) {
    init_super(input);
    // Pre-split input segments down to the local size, then insert every
    // point in lexicographic order so the result is reproducible.
    std::vector<Vec2> all(input);
    std::vector<std::tuple<int, int, int>> pieces;
    for (const auto& s : segs) {
      std::vector<int> chain{s.a};
      split_recursive(input[s.a], input[s.b], all, chain);
      chain.push_back(s.b);
      for (std::size_t i = 0; i + 1 < chain.size(); ++i) pieces.emplace_back(chain[i], chain[i + 1], s.tag);
    }
    std::vector<int> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
      return all[i].x < all[j].x || (all[i].x == all[j].x && all[i].y < all[j].y);
    });
    std::vector<int> id(all.size(), -1);
    for (int i : order) {
      id[i] = insert_point(all[i]);
      if (i < static_cast<int>(input.size())) is_input[id[i]] = 1;
    }
    for (auto [a, b, tag] : pieces) {
      if (id[a] == id[b]) continue;
      subsegments[key(id[a], id[b])] = tag;
    }
    for (const auto& [k, tag] : subsegments) seg_queue_.push_back(k);
    for (std::size_t t = 0; t < tris.size(); ++t) tri_queue_.push_back(static_cast<int>(t));
    refine();
  }

  static std::pair<int, int> key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }
  bool is_super(int v) const { return v < 3; }

  Vec2 centroid(const Tri& t) const { return (pts[t.v[0]] + pts[t.v[1]] + pts[t.v[2]]) / 3.0; }

  bool tri_in_domain(const Tri& t) const {
    if (is_super(t.v[0]) || is_super(t.v[1]) || is_super(t.v[2])) return false;
    return opt_.inside(centroid(t));
  }

  /// Returns the triangle ids that contain edge (a, b), or empty if absent.
  std::vector<int> edge_triangles(int a, int b) const {
    std::vector<int> out;
    const int start = vtri_[a];
    if (start < 0 || !tris[start].alive) return out;
    for (int dir = 0; dir < 2; ++dir) {
      int t = start;
      for (;;) {
        const auto& tr = tris[t];
        if (local(tr, b) >= 0) out.push_back(t);
        const int i = local(tr, a);
        const int nxt = tr.nb[dir == 0 ? (i + 2) % 3 : (i + 1) % 3];
        if (nxt < 0) break;
        if (nxt == start) {
          dir = 2;
          break;
        }
        t = nxt;
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  RefineOptions opt_;
  std::vector<int> vtri_;
  std::deque<std::pair<int, int>> seg_queue_;
  std::deque<int> tri_queue_;
  int last_tri_ = 0;

  static int local(const Tri& t, int v) {
    for (int i = 0; i < 3; ++i)
      if (t.v[i] == v) return i;
    return -1;
  }

  void split_recursive(Vec2 a, Vec2 b, std::vector<Vec2>& all, std::vector<int>& chain) {
    const Vec2 m = 0.5 * (a + b);
    const double len = distance(a, b);
    const double target = std::min({opt_.size(a), opt_.size(b), opt_.size(m)});
    if (len <= target) return;
    split_recursive(a, m, all, chain);
    all.push_back(m);
    chain.push_back(static_cast<int>(all.size()) - 1);
    split_recursive(m, b, all, chain);
  }

  void init_super(const std::vector<Vec2>& input) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& p : input) {
      xmin = std::min(xmin, p.x); xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y); ymax = std::max(ymax, p.y);
    }
    const Vec2 c{0.5 * (xmin + xmax), 0.5 * (ymin + ymax)};
    const double r = 50.0 * std::max({xmax - xmin, ymax - ymin, 1.0});
    pts = {c + Vec2{-r * std::sqrt(3.0), -r}, c + Vec2{r * std::sqrt(3.0), -r}, c + Vec2{0, 2 * r}};
    tris.push_back({{0, 1, 2}, {-1, -1, -1}, true});
    vtri_ = {0, 0, 0};
    is_input = {0, 0, 0};
  }

  int locate(Vec2 p, int hint) const {
    int t = (hint >= 0 && hint < static_cast<int>(tris.size()) && tris[hint].alive) ? hint : -1;
    if (t < 0)
      for (int i = static_cast<int>(tris.size()) - 1; i >= 0; --i)
        if (tris[i].alive) {
          t = i;
          break;
        }
    for (std::size_t guard = 0; guard < 4 * tris.size() + 16; ++guard) {
      const auto& tr = tris[t];
      int next = -1;
      for (int k = 0; k < 3; ++k) {
        const int i = static_cast<int>((k + guard) % 3);
        const Vec2 a = pts[tr.v[(i + 1) % 3]], b = pts[tr.v[(i + 2) % 3]];
        if (predicates::orient(a, b, p) < 0) {
          next = tr.nb[i];
          break;
        }
      }
      if (next < 0) return t;
      t = next;
    }
    for (int i = 0; i < static_cast<int>(tris.size()); ++i) {
      const auto& tr = tris[i];
      if (!tr.alive) continue;
      if (predicates::orient(pts[tr.v[0]], pts[tr.v[1]], p) >= 0 && predicates::orient(pts[tr.v[1]], pts[tr.v[2]], p) >= 0 &&
          predicates::orient(pts[tr.v[2]], pts[tr.v[0]], p) >= 0)
        return i;
    }
    throw Error(ErrorCode::NonConformingMesh, "point location failed");
  }

  struct Cavity {
    std::vector<int> tris;
    std::vector<std::pair<int, int>> interior_edges;   // edges removed by the insertion
    std::vector<std::array<int, 3>> boundary;          // (a, b, outside neighbour), CCW
    int duplicate = -1;
  };

  Cavity cavity(Vec2 p, int start) const {
    Cavity cav;
    const auto& t0 = tris[start];
    for (int i = 0; i < 3; ++i)
      if (pts[t0.v[i]] == p) {
        cav.duplicate = t0.v[i];
        return cav;
      }
    std::vector<int> stack{start};
    std::unordered_map<int, char> in;
    in[start] = 1;
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      cav.tris.push_back(t);
      const auto& tr = tris[t];
      for (int i = 0; i < 3; ++i) {
        const int n = tr.nb[i];
        if (n < 0 || in.count(n)) continue;
        const auto& tn = tris[n];
        if (predicates::incircle(pts[tn.v[0]], pts[tn.v[1]], pts[tn.v[2]], p) > 0) {
          in[n] = 1;
          stack.push_back(n);
        } else {
          in[n] = 0;
        }
      }
    }
    for (int t : cav.tris) {
      const auto& tr = tris[t];
      for (int i = 0; i < 3; ++i) {
        const int a = tr.v[(i + 1) % 3], b = tr.v[(i + 2) % 3];
        const int n = tr.nb[i];
        auto it = n >= 0 ? in.find(n) : in.end();
        if (it != in.end() && it->second == 1) {
          if (a < b) cav.interior_edges.emplace_back(a, b);
        } else {
          cav.boundary.push_back({a, b, n});
        }
      }
    }
    return cav;
  }

  int commit(Vec2 p, const Cavity& cav) {
    const int pid = static_cast<int>(pts.size());
    pts.push_back(p);
    vtri_.push_back(-1);
    is_input.push_back(0);
    for (int t : cav.tris) tris[t].alive = false;
    std::unordered_map<int, int> starts, ends;
    std::vector<int> created;
    for (const auto& e : cav.boundary) {
      const int a = e[0], b = e[1], n = e[2];
      const int id = static_cast<int>(tris.size());
      tris.push_back({{a, b, pid}, {-1, -1, n}, true});
      if (n >= 0) {
        auto& tn = tris[n];
        for (int i = 0; i < 3; ++i) {
          const int x = tn.v[(i + 1) % 3], y = tn.v[(i + 2) % 3];
          if (x == b && y == a) tn.nb[i] = id;
        }
      }
      starts[a] = id;
      ends[b] = id;
      vtri_[a] = id;
      vtri_[b] = id;
      created.push_back(id);
    }
    for (int id : created) {
      auto& t = tris[id];
      // Edge (b, p) is opposite a: shared with the triangle starting at b.
      t.nb[0] = starts.at(t.v[1]);
      // Edge (p, a) is opposite b: shared with the triangle ending at a.
      t.nb[1] = ends.at(t.v[0]);
    }
    vtri_[pid] = created.front();
    last_tri_ = created.front();
    for (const auto& e : cav.interior_edges) {
      auto it = subsegments.find(e);
      if (it != subsegments.end()) seg_queue_.push_back(e);
    }
    for (int id : created) {
      tri_queue_.push_back(id);
      const auto& t = tris[id];
      const auto k = key(t.v[0], t.v[1]);
      if (subsegments.count(k) && encroaches(p, pts[t.v[0]], pts[t.v[1]])) seg_queue_.push_back(k);
    }
    if (pts.size() > opt_.max_points)
      throw Error(ErrorCode::RefinementStall, "point budget exhausted; achieved min angle " + std::to_string(current_min_angle()));
    return pid;
  }

  int insert_point(Vec2 p) {
    const int t = locate(p, last_tri_);
    const Cavity cav = cavity(p, t);
    if (cav.duplicate >= 0) return cav.duplicate;
    return commit(p, cav);
  }

  static bool encroaches(Vec2 c, Vec2 a, Vec2 b) { return dot(a - c, b - c) < 0; }

  bool segment_needs_split(int a, int b) const {
    const auto ts = edge_triangles(a, b);
    if (ts.empty()) return true;
    for (int t : ts) {
      const auto& tr = tris[t];
      for (int i = 0; i < 3; ++i) {
        const int c = tr.v[i];
        if (c == a || c == b || is_super(c)) continue;
        if (encroaches(pts[c], pts[a], pts[b])) return true;
      }
    }
    return false;
  }

  Vec2 split_point(int a, int b) const {
    const bool ia = is_input[a], ib = is_input[b];
    const Vec2 pa = pts[a], pb = pts[b];
    if (ia == ib) return 0.5 * (pa + pb);
    // Concentric shells around the input vertex.
    const Vec2 from = ia ? pa : pb, to = ia ? pb : pa;
    const double len = distance(pa, pb);
    const double d = std::exp2(std::round(std::log2(0.5 * len)));
    return from + (to - from) * (d / len);
  }

  void split_segment(int a, int b) {
    const auto k = key(a, b);
    const int tag = subsegments.at(k);
    const Vec2 m = split_point(a, b);
    subsegments.erase(k);
    const int t = locate(m, vtri_[a]);
    const Cavity cav = cavity(m, t);
    int mid = cav.duplicate;
    if (mid < 0) {
      subsegments[key(a, static_cast<int>(pts.size()))] = tag;
      subsegments[key(static_cast<int>(pts.size()), b)] = tag;
      mid = commit(m, cav);
    } else {
      subsegments[key(a, mid)] = tag;
      subsegments[key(mid, b)] = tag;
    }
    seg_queue_.push_back(key(a, mid));
    seg_queue_.push_back(key(mid, b));
  }

  static double angle_at(Vec2 p, Vec2 q, Vec2 r) {
    const Vec2 u = q - p, v = r - p;
    return std::atan2(std::abs(cross(u, v)), dot(u, v));
  }

  double min_angle(const Tri& t) const {
    double m = kPi;
    for (int i = 0; i < 3; ++i) m = std::min(m, angle_at(pts[t.v[i]], pts[t.v[(i + 1) % 3]], pts[t.v[(i + 2) % 3]]));
    return m;
  }

  double current_min_angle() const {
    double m = kPi;
    for (const auto& t : tris)
      if (t.alive && tri_in_domain(t)) m = std::min(m, min_angle(t));
    return m * 180.0 / kPi;
  }

  bool is_bad(const Tri& t) const {
    double longest = 0;
    for (int i = 0; i < 3; ++i) longest = std::max(longest, distance(pts[t.v[i]], pts[t.v[(i + 1) % 3]]));
    if (longest > opt_.size(centroid(t)) * (1 + 1e-12)) return true;
    const double lim = opt_.min_angle_deg * kPi / 180.0;
    int worst = 0;
    double m = kPi;
    for (int i = 0; i < 3; ++i) {
      const double a = angle_at(pts[t.v[i]], pts[t.v[(i + 1) % 3]], pts[t.v[(i + 2) % 3]]);
      if (a < m) {
        m = a;
        worst = i;
      }
    }
    if (m >= lim) return false;
    // Small angles enclosed by two constraint subsegments cannot be removed.
    const int v = t.v[worst], p = t.v[(worst + 1) % 3], q = t.v[(worst + 2) % 3];
    if (subsegments.count(key(v, p)) && subsegments.count(key(v, q))) return false;
    return true;
  }

  static Vec2 circumcenter(Vec2 a, Vec2 b, Vec2 c) {
    const Vec2 ab = b - a, ac = c - a;
    const double d = 2.0 * cross(ab, ac);
    const double ab2 = norm2(ab), ac2 = norm2(ac);
    return a + Vec2{(ac.y * ab2 - ab.y * ac2) / d, (ab.x * ac2 - ac.x * ab2) / d};
  }

  void drain_segments() {
    while (!seg_queue_.empty()) {
      const auto k = seg_queue_.front();
      seg_queue_.pop_front();
      if (!subsegments.count(k)) continue;
      if (segment_needs_split(k.first, k.second)) split_segment(k.first, k.second);
    }
  }

  void refine() {
    drain_segments();
    while (!tri_queue_.empty()) {
      const int t = tri_queue_.front();
      tri_queue_.pop_front();
      if (!tris[t].alive || !tri_in_domain(tris[t]) || !is_bad(tris[t])) continue;
      const auto tr = tris[t];
      const Vec2 c = circumcenter(pts[tr.v[0]], pts[tr.v[1]], pts[tr.v[2]]);
      const int loc = locate(c, t);
      const Cavity cav = cavity(c, loc);
      if (cav.duplicate >= 0) continue;
      std::vector<std::pair<int, int>> hit;
      for (const auto& e : cav.interior_edges)
        if (subsegments.count(e)) hit.push_back(e);
      for (const auto& e : cav.boundary) {
        const auto k = key(e[0], e[1]);
        if (subsegments.count(k) && encroaches(c, pts[e[0]], pts[e[1]])) hit.push_back(k);
      }
      if (!hit.empty()) {
        for (const auto& e : hit)
          if (subsegments.count(e)) split_segment(e.first, e.second);
        drain_segments();
        if (tris[t].alive) tri_queue_.push_back(t);
        continue;
      }
      commit(c, cav);
      drain_segments();
    }
    achieved_min_angle = current_min_angle();
  }
};

}  // namespace polyinc::detail
