#include "qdt/diagram.hpp"

#include <cstring>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <json.hpp>

namespace qdt {

namespace {

constexpr std::array<const char*, 6> kRegionNames = {"0", "1", "2", "3", "4+", "unknown"};

void write_file_atomic(const std::filesystem::path& path, const std::string& data,
                       bool binary) {
    const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
    {
        std::ofstream os(tmp, binary ? std::ios::binary : std::ios::out);
        if (!os) throw Error("cannot open for writing: " + tmp.string());
        os.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!os) throw Error("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("rename failed: " + path.string() + ": " + ec.message());
}

}  // namespace

std::string to_string(RegionLabel label) {
    return kRegionNames.at(static_cast<size_t>(label));
}

RegionLabel region_label_from_string(const std::string& s) {
    for (size_t i = 0; i < kRegionNames.size(); ++i) {
        if (s == kRegionNames[i]) return static_cast<RegionLabel>(i);
    }
    throw Error("unknown region label: \"" + s + "\"");
}

StabilityDiagram::StabilityDiagram(Eigen::MatrixXf grid, double pixel_size_v, Vec2 origin_v,
                                   std::vector<LineLabel> lines,
                                   std::vector<ChargeRegion> regions, std::string id)
    : grid_(std::move(grid)),
      pixel_size_v_(pixel_size_v),
      origin_v_(origin_v),
      lines_(std::move(lines)),
      regions_(std::move(regions)),
      id_(std::move(id)) {
    if (grid_.rows() < 1 || grid_.cols() < 1) throw Error("diagram grid is empty");
    if (!(pixel_size_v_ > 0.0)) throw Error("pixel_size_v must be > 0");
    for (Eigen::Index r = 0; r < grid_.rows(); ++r) {
        for (Eigen::Index c = 0; c < grid_.cols(); ++c) {
            if (!std::isfinite(grid_(r, c))) {
                throw Error("non-finite value at (" + std::to_string(r) + "," +
                            std::to_string(c) + ")");
            }
        }
    }
    const BoxV box = bounds_v();
    for (const auto& line : lines_) {
        if (line.polyline.size() < 2) throw Error("line polyline needs >= 2 vertices");
        if (line.index < 1) throw Error("line index must be >= 1");
        for (const auto& v : line.polyline) {
            if (!box.contains(v)) {
                throw Error("line vertex out of bounds: (" + std::to_string(v.x()) + "," +
                            std::to_string(v.y()) + ")");
            }
        }
    }
    for (const auto& region : regions_) {
        if (region.polygon.size() < 3) throw Error("region polygon needs >= 3 vertices");
    }
}

BoxV StabilityDiagram::bounds_v() const {
    return {origin_v_, origin_v_ + Vec2(width() * pixel_size_v_, height() * pixel_size_v_)};
}

BoxV StabilityDiagram::rect_to_box_v(const PatchRect& rect) const {
    const Vec2 lo = origin_v_ + pixel_size_v_ * Vec2(rect.x, rect.y);
    return {lo, lo + pixel_size_v_ * Vec2(rect.side, rect.side)};
}

bool StabilityDiagram::rect_in_bounds(const PatchRect& rect) const {
    return rect.x >= 0 && rect.y >= 0 && rect.side > 0 && rect.x + rect.side <= width() &&
           rect.y + rect.side <= height();
}

Eigen::MatrixXf StabilityDiagram::patch_values(const PatchRect& rect) const {
    if (!rect_in_bounds(rect)) throw Error("patch rect out of bounds");
    return grid_.block(rect.y, rect.x, rect.side, rect.side);
}

StabilityDiagram load_diagram(const std::filesystem::path& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) throw Error("cannot open manifest: " + manifest_path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    try {
        const int width = j.at("width").get<int>();
        const int height = j.at("height").get<int>();
        const double pixel_size_v = j.at("pixel_size_v").get<double>();
        const auto origin = j.at("origin_v");
        const Vec2 origin_v(origin.at(0).get<double>(), origin.at(1).get<double>());
        const std::string grid_file = j.at("grid_file").get<std::string>();

        const auto grid_path = manifest_path.parent_path() / grid_file;
        std::ifstream gs(grid_path, std::ios::binary);
        if (!gs) throw Error("cannot open grid file: " + grid_path.string());
        gs.seekg(0, std::ios::end);
        const auto bytes = static_cast<size_t>(gs.tellg());
        gs.seekg(0);
        const size_t expected = static_cast<size_t>(width) * height * sizeof(float);
        if (bytes != expected) {
            throw Error("grid size mismatch in " + grid_path.string() + ": expected " +
                        std::to_string(expected) + " bytes, found " + std::to_string(bytes));
        }
        Eigen::MatrixXf grid(height, width);
        std::vector<float> row(static_cast<size_t>(width));
        for (int r = 0; r < height; ++r) {
            gs.read(reinterpret_cast<char*>(row.data()),
                    static_cast<std::streamsize>(row.size() * sizeof(float)));
            for (int c = 0; c < width; ++c) grid(r, c) = row[static_cast<size_t>(c)];
        }

        std::vector<LineLabel> lines;
        for (const auto& jl : j.value("lines", nlohmann::json::array())) {
            LineLabel line;
            line.index = jl.at("index").get<int>();
            for (const auto& v : jl.at("polyline")) {
                line.polyline.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
            }
            lines.push_back(std::move(line));
        }
        std::vector<ChargeRegion> regions;
        for (const auto& jr : j.value("regions", nlohmann::json::array())) {
            ChargeRegion region;
            region.label = region_label_from_string(jr.at("label").get<std::string>());
            for (const auto& v : jr.at("polygon")) {
                region.polygon.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
            }
            regions.push_back(std::move(region));
        }
        return StabilityDiagram(std::move(grid), pixel_size_v, origin_v, std::move(lines),
                                std::move(regions), j.at("id").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
}

void save_diagram(const StabilityDiagram& d, const std::filesystem::path& manifest_path) {
    const std::string grid_file = manifest_path.stem().string() + ".grid";

    std::string raw(static_cast<size_t>(d.width()) * d.height() * sizeof(float), '\0');
    size_t pos = 0;
    for (int r = 0; r < d.height(); ++r) {
        for (int c = 0; c < d.width(); ++c) {
            const float v = d.grid()(r, c);
            std::memcpy(raw.data() + pos, &v, sizeof(float));
            pos += sizeof(float);
        }
    }
    write_file_atomic(manifest_path.parent_path() / grid_file, raw, true);

    nlohmann::ordered_json j;
    j["id"] = d.id();
    j["width"] = d.width();
    j["height"] = d.height();
    j["pixel_size_v"] = d.pixel_size_v();
    j["origin_v"] = {d.origin_v().x(), d.origin_v().y()};
    j["grid_file"] = grid_file;
    j["lines"] = nlohmann::json::array();
    for (const auto& line : d.lines()) {
        nlohmann::ordered_json jl;
        jl["index"] = line.index;
        jl["polyline"] = nlohmann::json::array();
        for (const auto& v : line.polyline) jl["polyline"].push_back({v.x(), v.y()});
        j["lines"].push_back(std::move(jl));
    }
    j["regions"] = nlohmann::json::array();
    for (const auto& region : d.regions()) {
        nlohmann::ordered_json jr;
        jr["label"] = to_string(region.label);
        jr["polygon"] = nlohmann::json::array();
        for (const auto& v : region.polygon) jr["polygon"].push_back({v.x(), v.y()});
        j["regions"].push_back(std::move(jr));
    }
    write_file_atomic(manifest_path, j.dump(2) + "\n", false);
}

PatchCategory assign_category(const StabilityDiagram& d, const PatchRect& rect,
                              int detection_offset_px) {
    if (!d.rect_in_bounds(rect)) throw Error("patch rect out of bounds");
    const double inset = detection_offset_px * d.pixel_size_v();
    BoxV box = d.rect_to_box_v(rect);
    box.lo += Vec2(inset, inset);
    box.hi -= Vec2(inset, inset);
    if (box.lo.x() > box.hi.x() || box.lo.y() > box.hi.y()) return PatchCategory::no_line;
    for (const auto& line : d.lines()) {
        if (polyline_intersects_box(line.polyline, box)) return PatchCategory::line;
    }
    return PatchCategory::no_line;
}

Eigen::MatrixXf normalize_patch(const Eigen::MatrixXf& raw) {
    if (!raw.allFinite()) throw Error("non-finite value in patch");
    const float lo = raw.minCoeff();
    const float hi = raw.maxCoeff();
    if (hi == lo) return Eigen::MatrixXf::Zero(raw.rows(), raw.cols());
    return (raw.array() - lo) / (hi - lo);
}

std::vector<PatchSample> extract_patches(const StabilityDiagram& d,
                                         const DatasetProfile& profile) {
    const int patch = profile.patch_size_px;
    const int stride = patch - profile.patch_overlap_px;
    if (stride < 1) throw Error("patch overlap must be smaller than patch size");
    if (d.width() < patch || d.height() < patch) {
        throw Error("diagram smaller than patch size");
    }
    std::vector<PatchSample> out;
    for (int y = 0; y + patch <= d.height(); y += stride) {
        for (int x = 0; x + patch <= d.width(); x += stride) {
            PatchSample s;
            s.rect = {x, y, patch};
            s.values = normalize_patch(d.patch_values(s.rect));
            s.category = assign_category(d, s.rect, profile.detection_offset_px);
            s.diagram_id = d.id();
            out.push_back(std::move(s));
        }
    }
    return out;
}

RegionLabel region_at(const StabilityDiagram& d, const Vec2& point_v) {
    if (!d.bounds_v().contains(point_v)) throw Error("point out of diagram bounds");
    RegionLabel best = RegionLabel::unknown;
    for (const auto& region : d.regions()) {
        if (region.label == RegionLabel::unknown) continue;
        if (point_in_polygon(point_v, region.polygon)) {
            if (best == RegionLabel::unknown || region.label < best) best = region.label;
        }
    }
    return best;
}

}  // namespace qdt
