#pragma once
#include <Eigen/Dense>
#include <vector>

namespace qdt {

using Vec2 = Eigen::Vector2d;
using Polyline = std::vector<Vec2>;
using Polygon = std::vector<Vec2>;

// Axis-aligned box in voltage space, closed on all sides.
struct BoxV {
    Vec2 lo;
    Vec2 hi;

    bool contains(const Vec2& p) const {
        return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
    }
    Vec2 clamp(const Vec2& p) const {
        return {std::clamp(p.x(), lo.x(), hi.x()), std::clamp(p.y(), lo.y(), hi.y())};
    }
};

// Closed segment vs closed axis-aligned box.
bool segment_intersects_box(const Vec2& a, const Vec2& b, const BoxV& box);

bool polyline_intersects_box(const Polyline& poly, const BoxV& box);

// Even-odd rule; points on the boundary count as inside.
bool point_in_polygon(const Vec2& p, const Polygon& poly);

double polygon_area(const Polygon& poly);

// Sutherland-Hodgman clip against an axis-aligned box.
Polygon clip_polygon_to_box(const Polygon& poly, const BoxV& box);

// Clip a polyline to a box, splitting it where it leaves the box.
std::vector<Polyline> clip_polyline_to_box(const Polyline& poly, const BoxV& box);

}  // namespace qdt
