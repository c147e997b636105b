#include "qdt/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace qdt {

namespace {

// Liang-Barsky parametric clip of segment a+t(b-a), t in [0,1].
bool clip_segment_params(const Vec2& a, const Vec2& b, const BoxV& box, double& t0, double& t1) {
    t0 = 0.0;
    t1 = 1.0;
    const Vec2 d = b - a;
    for (int axis = 0; axis < 2; ++axis) {
        const double p[2] = {-d[axis], d[axis]};
        const double q[2] = {a[axis] - box.lo[axis], box.hi[axis] - a[axis]};
        for (int side = 0; side < 2; ++side) {
            if (p[side] == 0.0) {
                if (q[side] < 0.0) return false;
            } else {
                const double r = q[side] / p[side];
                if (p[side] < 0.0) {
                    if (r > t1) return false;
                    t0 = std::max(t0, r);
                } else {
                    if (r < t0) return false;
                    t1 = std::min(t1, r);
                }
            }
        }
    }
    return t0 <= t1;
}

}  // namespace

bool segment_intersects_box(const Vec2& a, const Vec2& b, const BoxV& box) {
    double t0, t1;
    return clip_segment_params(a, b, box, t0, t1);
}

bool polyline_intersects_box(const Polyline& poly, const BoxV& box) {
    if (poly.size() == 1) return box.contains(poly.front());
    for (size_t i = 0; i + 1 < poly.size(); ++i) {
        if (segment_intersects_box(poly[i], poly[i + 1], box)) return true;
    }
    return false;
}

bool point_in_polygon(const Vec2& p, const Polygon& poly) {
    const size_t n = poly.size();
    if (n < 3) return false;
    // Boundary check first so edge points are deterministically inside.
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[j];
        const Vec2& b = poly[i];
        const Vec2 ab = b - a;
        const Vec2 ap = p - a;
        const double cross = ab.x() * ap.y() - ab.y() * ap.x();
        const double len2 = ab.squaredNorm();
        if (std::abs(cross) <= 1e-12 * std::max(1.0, len2)) {
            const double t = len2 > 0.0 ? ap.dot(ab) / len2 : 0.0;
            if (t >= -1e-12 && t <= 1.0 + 1e-12 && (p - (a + t * ab)).squaredNorm() <= 1e-18 * std::max(1.0, len2))
                return true;
        }
    }
    bool inside = false;
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[j];
        const Vec2& b = poly[i];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

double polygon_area(const Polygon& poly) {
    double twice = 0.0;
    const size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        twice += poly[j].x() * poly[i].y() - poly[i].x() * poly[j].y();
    }
    return std::abs(twice) * 0.5;
}

Polygon clip_polygon_to_box(const Polygon& poly, const BoxV& box) {
    Polygon out = poly;
    // Each pass clips against one half-plane of the box.
    for (int pass = 0; pass < 4; ++pass) {
        const int axis = pass / 2;
        const bool keep_low = (pass % 2) == 0;
        const double bound = keep_low ? box.hi[axis] : box.lo[axis];
        auto inside = [&](const Vec2& p) {
            return keep_low ? p[axis] <= bound : p[axis] >= bound;
        };
        Polygon in;
        in.swap(out);
        const size_t n = in.size();
        for (size_t i = 0; i < n; ++i) {
            const Vec2& cur = in[i];
            const Vec2& prev = in[(i + n - 1) % n];
            const bool cur_in = inside(cur);
            const bool prev_in = inside(prev);
            if (cur_in != prev_in) {
                const double t = (bound - prev[axis]) / (cur[axis] - prev[axis]);
                out.push_back(prev + t * (cur - prev));
            }
            if (cur_in) out.push_back(cur);
        }
        if (out.empty()) return out;
    }
    return out;
}

std::vector<Polyline> clip_polyline_to_box(const Polyline& poly, const BoxV& box) {
    std::vector<Polyline> pieces;
    Polyline cur;
    for (size_t i = 0; i + 1 < poly.size(); ++i) {
        double t0, t1;
        if (!clip_segment_params(poly[i], poly[i + 1], box, t0, t1)) {
            if (cur.size() >= 2) pieces.push_back(std::move(cur));
            cur.clear();
            continue;
        }
        const Vec2 d = poly[i + 1] - poly[i];
        const Vec2 a = poly[i] + t0 * d;
        const Vec2 b = poly[i] + t1 * d;
        if (cur.empty() || (cur.back() - a).norm() > 1e-12) {
            if (cur.size() >= 2) pieces.push_back(std::move(cur));
            cur.clear();
            cur.push_back(a);
        }
        cur.push_back(b);
        if (t1 < 1.0) {
            if (cur.size() >= 2) pieces.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (cur.size() >= 2) pieces.push_back(std::move(cur));
    return pieces;
}

}  // namespace qdt
