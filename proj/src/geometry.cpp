#include "segpipe/geometry.hpp"

#include "segpipe/error.hpp"
#include "segpipe/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace segpipe {

Polygon Polygon::to_pixels(int width, int height) const {
    if (space == CoordinateSpace::Pixel) {
        return *this;
    }
    Polygon out{vertices, CoordinateSpace::Pixel};
    for (Point& p : out.vertices) {
        p.x *= width;
        p.y *= height;
    }
    return out;
}

Polygon Polygon::to_normalized(int width, int height) const {
    if (space == CoordinateSpace::Normalized) {
        return *this;
    }
    Polygon out{vertices, CoordinateSpace::Normalized};
    for (Point& p : out.vertices) {
        p.x /= width;
        p.y /= height;
    }
    return out;
}

double Polygon::area() const {
    double twice = 0.0;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        twice += vertices[j].x * vertices[i].y - vertices[i].x * vertices[j].y;
    }
    return std::abs(twice) * 0.5;
}

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
        throw Error(Errc::InvalidDimensions,
                    "mask dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
    }
    bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(kernels::active().overlap_counts(bits_, bits_).count_a);
}

SoftMask::SoftMask(int w, int h, double fill) : width(w), height(h) {
    if (w <= 0 || h <= 0) {
        throw Error(Errc::InvalidDimensions, "soft mask dimensions must be positive");
    }
    values.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

BinaryMask rasterize(const Polygon& polygon, int width, int height) {
    if (polygon.vertices.size() < 3) {
        throw Error(Errc::DegeneratePolygon,
                    "need at least 3 vertices, got " + std::to_string(polygon.vertices.size()));
    }
    BinaryMask mask(width, height);
    const Polygon px = polygon.to_pixels(width, height);
    const std::vector<Point>& v = px.vertices;
    const std::size_t n = v.size();

    std::vector<double> crossings;
    crossings.reserve(n);
    for (int row = 0; row < height; ++row) {
        const double yc = row + 0.5;
        crossings.clear();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            if ((v[i].y > yc) != (v[j].y > yc)) {
                crossings.push_back((v[j].x - v[i].x) * (yc - v[i].y) / (v[j].y - v[i].y) + v[i].x);
            }
        }
        if (crossings.empty()) {
            continue;
        }
        std::sort(crossings.begin(), crossings.end());
        // A center is inside iff an odd number of crossings lie strictly to
        // its right, i.e. an odd number lie at or to its left.
        std::size_t left = 0;
        for (int col = 0; col < width; ++col) {
            const double xc = col + 0.5;
            while (left < crossings.size() && crossings[left] <= xc) {
                ++left;
            }
            if (left == crossings.size()) {
                break;
            }
            if (left & 1u) {
                mask.set(col, row);
            }
        }
    }
    return mask;
}

namespace {

kernels::OverlapCounts overlap(const BinaryMask& a, const BinaryMask& b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw Error(Errc::DimensionMismatch, std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                                                 std::to_string(b.width()) + "x" + std::to_string(b.height()));
    }
    return kernels::active().overlap_counts(a.bits(), b.bits());
}

}  // namespace

std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
    return static_cast<std::size_t>(overlap(a, b).intersection);
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    const auto c = overlap(a, b);
    const std::uint64_t uni = c.count_a + c.count_b - c.intersection;
    if (uni == 0) {
        return 0.0;
    }
    return static_cast<double>(c.intersection) / static_cast<double>(uni);
}

double mask_dsc(const BinaryMask& a, const BinaryMask& b) {
    const auto c = overlap(a, b);
    const std::uint64_t total = c.count_a + c.count_b;
    if (total == 0) {
        return 0.0;
    }
    return 2.0 * static_cast<double>(c.intersection) / static_cast<double>(total);
}

Point centroid(const BinaryMask& mask) {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (int row = 0; row < mask.height(); ++row) {
        for (int col = 0; col < mask.width(); ++col) {
            if (mask.at(col, row)) {
                sx += col;
                sy += row;
                ++n;
            }
        }
    }
    if (n == 0) {
        throw Error(Errc::EmptyMask, "centroid of an empty mask");
    }
    const double count = static_cast<double>(n);
    return {sx / count + 0.5, sy / count + 0.5};
}

namespace {

struct Tap {
    int lo = 0;
    int hi = 0;
    double t = 0.0;
};

std::vector<Tap> corner_aligned_taps(int in, int out) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    for (int i = 0; i < out; ++i) {
        if (in == 1 || out == 1) {
            taps[i] = {0, 0, 0.0};
            continue;
        }
        const double src = static_cast<double>(i) * (in - 1) / (out - 1);
        int lo = static_cast<int>(std::floor(src));
        lo = std::clamp(lo, 0, in - 1);
        const int hi = std::min(lo + 1, in - 1);
        taps[i] = {lo, hi, src - lo};
    }
    return taps;
}

// a + t (b - a) keeps constants exact; the clamp absorbs the last-ulp overshoot.
double lerp_bounded(double a, double b, double t) {
    const double v = a + t * (b - a);
    return std::clamp(v, std::min(a, b), std::max(a, b));
}

}  // namespace

SoftMask resize_bilinear(const SoftMask& mask, int new_width, int new_height) {
    if (new_width <= 0 || new_height <= 0) {
        throw Error(Errc::InvalidDimensions, "target dimensions must be positive");
    }
    if (new_width == mask.width && new_height == mask.height) {
        return mask;
    }
    const auto xs = corner_aligned_taps(mask.width, new_width);
    const auto ys = corner_aligned_taps(mask.height, new_height);
    SoftMask out(new_width, new_height);
    for (int r = 0; r < new_height; ++r) {
        const Tap& ty = ys[r];
        for (int c = 0; c < new_width; ++c) {
            const Tap& tx = xs[c];
            const double top = lerp_bounded(mask.at(tx.lo, ty.lo), mask.at(tx.hi, ty.lo), tx.t);
            const double bottom = lerp_bounded(mask.at(tx.lo, ty.hi), mask.at(tx.hi, ty.hi), tx.t);
            out.at(c, r) = lerp_bounded(top, bottom, ty.t);
        }
    }
    return out;
}

}  // namespace segpipe
