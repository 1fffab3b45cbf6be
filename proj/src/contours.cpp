#include "segpipe/geometry.hpp"

#include <array>
#include <vector>

namespace segpipe {

ComponentLabels label_components(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    ComponentLabels out;
    out.labels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
    std::vector<std::pair<int, int>> stack;
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            const std::size_t idx = static_cast<std::size_t>(row) * w + col;
            if (!mask.at(col, row) || out.labels[idx] != 0) {
                continue;
            }
            const int id = ++out.count;
            out.labels[idx] = id;
            stack.emplace_back(col, row);
            while (!stack.empty()) {
                const auto [cx, cy] = stack.back();
                stack.pop_back();
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx;
                        const int ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) {
                            continue;
                        }
                        const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                        if (mask.at(nx, ny) && out.labels[nidx] == 0) {
                            out.labels[nidx] = id;
                            stack.emplace_back(nx, ny);
                        }
                    }
                }
            }
        }
    }
    return out;
}

namespace {

// Headings in image coordinates (y grows downward): E, S, W, N.
constexpr std::array<int, 4> kDx{1, 0, -1, 0};
constexpr std::array<int, 4> kDy{0, 1, 0, -1};

int turn_left(int dir) { return (dir + 3) % 4; }
int turn_right(int dir) { return (dir + 1) % 4; }

// Pixels diagonally ahead of corner (x, y) on the left and right of the heading.
struct Ahead {
    int left_x, left_y, right_x, right_y;
};

Ahead ahead_of(int x, int y, int dir) {
    switch (dir) {
        case 0: return {x, y - 1, x, y};
        case 1: return {x, y, x - 1, y};
        case 2: return {x - 1, y, x - 1, y - 1};
        default: return {x - 1, y - 1, x, y - 1};
    }
}

// Crack-follows the outer boundary keeping the component on the right.
// Preferring left turns joins diagonal neighbours (8-connectivity).
Polygon trace_outer_boundary(const ComponentLabels& comps, int w, int h, int id, int start_x, int start_y) {
    auto inside = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < w && y < h && comps.labels[static_cast<std::size_t>(y) * w + x] == id;
    };

    std::vector<Point> path;
    std::vector<int> headings;
    int x = start_x;
    int y = start_y;
    int dir = 0;
    do {
        path.push_back({static_cast<double>(x), static_cast<double>(y)});
        headings.push_back(dir);
        x += kDx[dir];
        y += kDy[dir];
        const Ahead a = ahead_of(x, y, dir);
        if (inside(a.left_x, a.left_y)) {
            dir = turn_left(dir);
        } else if (!inside(a.right_x, a.right_y)) {
            dir = turn_right(dir);
        }
    } while (!(x == start_x && y == start_y && dir == 0));

    Polygon poly;
    poly.space = CoordinateSpace::Pixel;
    const std::size_t n = path.size();
    for (std::size_t i = 0; i < n; ++i) {
        const int incoming = headings[(i + n - 1) % n];
        if (incoming != headings[i]) {
            poly.vertices.push_back(path[i]);
        }
    }
    return poly;
}

}  // namespace

std::vector<Polygon> extract_contours(const BinaryMask& mask) {
    std::vector<Polygon> out;
    if (mask.size() == 0) {
        return out;
    }
    const ComponentLabels comps = label_components(mask);
    std::vector<bool> traced(static_cast<std::size_t>(comps.count) + 1, false);
    const int w = mask.width();
    for (int row = 0; row < mask.height(); ++row) {
        for (int col = 0; col < w; ++col) {
            const int id = comps.labels[static_cast<std::size_t>(row) * w + col];
            if (id != 0 && !traced[id]) {
                traced[id] = true;
                out.push_back(trace_outer_boundary(comps, w, mask.height(), id, col, row));
            }
        }
    }
    return out;
}

}  // namespace segpipe
