#pragma once
#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdt/geometry.hpp"

namespace qdt {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Charge occupancy label of a region polygon.
enum class RegionLabel { zero, one, two, three, four_plus, unknown };

std::string to_string(RegionLabel label);
RegionLabel region_label_from_string(const std::string& s);

struct LineLabel {
    Polyline polyline;  // (g1, g2) volts
    int index = 1;      // 1 = lowest-voltage transition
};

struct ChargeRegion {
    Polygon polygon;  // (g1, g2) volts
    RegionLabel label = RegionLabel::unknown;
};

// Pixel-space square window, side x side pixels starting at (x, y).
struct PatchRect {
    int x = 0;
    int y = 0;
    int side = 0;

    bool operator==(const PatchRect&) const = default;
};

enum class PatchCategory { no_line, line };

struct PatchSample {
    Eigen::MatrixXf values;  // side x side, normalized to [0,1]; (row, col) = (y, x)
    PatchRect rect;
    PatchCategory category = PatchCategory::no_line;
    std::string diagram_id;
};

// Per-dataset tuning/extraction parameters (pixel pitch, detection inset, priors).
struct DatasetProfile {
    std::string name;
    double pixel_size_v = 1e-3;
    int detection_offset_px = 6;
    double prior_line_distance_v = 30e-3;
    double prior_slope_deg = 75.0;
    bool use_last_line_validation = false;
    int patch_size_px = 18;
    int patch_overlap_px = 10;
};

class StabilityDiagram {
public:
    StabilityDiagram() = default;
    // Validates all invariants; throws Error on violation.
    StabilityDiagram(Eigen::MatrixXf grid, double pixel_size_v, Vec2 origin_v,
                     std::vector<LineLabel> lines, std::vector<ChargeRegion> regions,
                     std::string id);

    int width() const { return static_cast<int>(grid_.cols()); }
    int height() const { return static_cast<int>(grid_.rows()); }
    const Eigen::MatrixXf& grid() const { return grid_; }
    double pixel_size_v() const { return pixel_size_v_; }
    const Vec2& origin_v() const { return origin_v_; }
    const std::vector<LineLabel>& lines() const { return lines_; }
    const std::vector<ChargeRegion>& regions() const { return regions_; }
    const std::string& id() const { return id_; }

    // Full voltage extent covered by the grid.
    BoxV bounds_v() const;

    // Voltage box spanned by a pixel rectangle.
    BoxV rect_to_box_v(const PatchRect& rect) const;

    bool rect_in_bounds(const PatchRect& rect) const;

    // Raw (unnormalized) current values of a pixel window.
    Eigen::MatrixXf patch_values(const PatchRect& rect) const;

private:
    Eigen::MatrixXf grid_;  // (height, width); row 0 = lowest G2 voltage
    double pixel_size_v_ = 0.0;
    Vec2 origin_v_ = Vec2::Zero();
    std::vector<LineLabel> lines_;
    std::vector<ChargeRegion> regions_;
    std::string id_;
};

StabilityDiagram load_diagram(const std::filesystem::path& manifest_path);
void save_diagram(const StabilityDiagram& d, const std::filesystem::path& manifest_path);

// Patch classification ground truth: `line` iff a label polyline crosses the
// detection square (rect inset by detection_offset_px, closed boundary).
PatchCategory assign_category(const StabilityDiagram& d, const PatchRect& rect,
                              int detection_offset_px);

// Min-max normalization to [0,1]; a constant patch maps to all zeros.
Eigen::MatrixXf normalize_patch(const Eigen::MatrixXf& raw);

// Sliding-window extraction at stride patch_size - overlap, flush at (0,0).
std::vector<PatchSample> extract_patches(const StabilityDiagram& d, const DatasetProfile& profile);

// Charge label at a voltage coordinate; boundary ties go to the smaller label.
RegionLabel region_at(const StabilityDiagram& d, const Vec2& point_v);

}  // namespace qdt
