#pragma once

// Polygon and raster primitives shared by every other module.
//
// Pixel (col, row) covers [col, col+1) x [row, row+1); its center is
// (col + 0.5, row + 0.5). Rasterization samples pixel centers with the
// even-odd rule, and centroids are means of pixel centers, so offsets computed
// from one mask can be applied to another without a half-pixel drift.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace segpipe {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

enum class CoordinateSpace { Normalized, Pixel };

struct Polygon {
    std::vector<Point> vertices;
    CoordinateSpace space = CoordinateSpace::Pixel;

    // Pixel-space copy; normalized vertices are scaled by (width, height).
    Polygon to_pixels(int width, int height) const;
    // Normalized copy; pixel vertices are divided by (width, height).
    Polygon to_normalized(int width, int height) const;

    // Shoelace area in the polygon's own coordinate units.
    double area() const;
};

class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool at(int col, int row) const { return bits_[index(col, row)] != 0; }
    void set(int col, int row, bool on = true) { bits_[index(col, row)] = on ? 1 : 0; }

    // Row-major bytes, each exactly 0 or 1.
    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

    std::size_t count() const;
    bool empty() const { return count() == 0; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct SoftMask {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    SoftMask() = default;
    SoftMask(int w, int h, double fill = 0.0);

    double at(int col, int row) const { return values[static_cast<std::size_t>(row) * width + col]; }
    double& at(int col, int row) { return values[static_cast<std::size_t>(row) * width + col]; }
};

BinaryMask rasterize(const Polygon& polygon, int width, int height);

// One polygon (pixel coordinates) per 8-connected foreground component,
// traced along pixel edges around the component's outer boundary.
// Components are ordered by their first pixel in row-major order.
std::vector<Polygon> extract_contours(const BinaryMask& mask);

// 8-connected component labels (0 = background, 1..n), plus the count n.
struct ComponentLabels {
    std::vector<int> labels;
    int count = 0;
};
ComponentLabels label_components(const BinaryMask& mask);

double mask_iou(const BinaryMask& a, const BinaryMask& b);
double mask_dsc(const BinaryMask& a, const BinaryMask& b);

// Pixel count of a AND b.
std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b);

Point centroid(const BinaryMask& mask);

// Bilinear resampling with corner-aligned pixel centers.
SoftMask resize_bilinear(const SoftMask& mask, int new_width, int new_height);

}  // namespace segpipe
