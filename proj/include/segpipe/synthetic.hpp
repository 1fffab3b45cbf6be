#pragma once

// Synthetic ultrasound-like fixtures: an elliptical brain per frame, with
// optional small CSP and LV ellipses inside it. Used by tests and by the
// make_fixture tool.

#include "segpipe/dataset.hpp"
#include "segpipe/image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace segpipe {

struct FixtureOptions {
    int patients = 10;
    int min_frames = 1;
    int max_frames = 3;
    int width = 96;
    int height = 72;
    double csp_probability = 0.4;
    double lv_probability = 0.4;
};

Polygon ellipse(Point center, double rx, double ry, double angle, int vertices = 24,
                CoordinateSpace space = CoordinateSpace::Normalized);

// Names follow the HC18 convention: "007_HC", "007_2HC", ...
std::vector<ImageRecord> synthetic_records(const FixtureOptions& options, std::uint64_t seed);

GrayImage render_record(const ImageRecord& record, std::uint64_t seed);

// Writes <dir>/images/<id>.png and <dir>/labels/<id>.txt.
void write_fixture(const std::filesystem::path& dir, const std::vector<ImageRecord>& records, std::uint64_t seed);

}  // namespace segpipe
