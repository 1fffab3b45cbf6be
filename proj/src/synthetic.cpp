#include "segpipe/synthetic.hpp"

#include "segpipe/error.hpp"
#include "segpipe/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace segpipe {

Polygon ellipse(Point center, double rx, double ry, double angle, int vertices, CoordinateSpace space) {
    Polygon p{{}, space};
    const double c = std::cos(angle), s = std::sin(angle);
    for (int k = 0; k < vertices; ++k) {
        const double t = 2.0 * std::numbers::pi * k / vertices;
        const double x = rx * std::cos(t), y = ry * std::sin(t);
        p.vertices.push_back({center.x + c * x - s * y, center.y + s * x + c * y});
    }
    return p;
}

std::vector<ImageRecord> synthetic_records(const FixtureOptions& o, std::uint64_t seed) {
    if (o.patients < 1 || o.min_frames < 1 || o.max_frames < o.min_frames || o.width < 16 || o.height < 16) {
        throw Error(Errc::InvalidInput, "bad fixture options");
    }
    Rng rng(derive_seed(seed, "synthetic_records"));
    std::vector<ImageRecord> out;
    for (int p = 0; p < o.patients; ++p) {
        const int frames = o.min_frames + static_cast<int>(rng.uniform_index(
                                              static_cast<std::size_t>(o.max_frames - o.min_frames + 1)));
        char pid[16];
        std::snprintf(pid, sizeof pid, "%03d", p);
        for (int f = 0; f < frames; ++f) {
            ImageRecord r;
            r.patient_id = pid;
            r.image_id = std::string(pid) + (f == 0 ? "_HC" : "_" + std::to_string(f + 1) + "HC");
            r.width = o.width;
            r.height = o.height;
            const Point c{rng.uniform(0.45, 0.55), rng.uniform(0.45, 0.55)};
            const double rx = rng.uniform(0.30, 0.38), ry = rng.uniform(0.32, 0.40);
            const double angle = rng.uniform(-0.3, 0.3);
            r.instances.push_back({ClassId::Brain, ellipse(c, rx, ry, angle)});
            if (rng.uniform() < o.csp_probability) {
                const Point at{c.x + rng.uniform(-0.03, 0.03), c.y - 0.12 * ry / 0.36 + rng.uniform(-0.02, 0.02)};
                r.instances.push_back({ClassId::Csp, ellipse(at, rng.uniform(0.05, 0.07), rng.uniform(0.06, 0.08),
                                                            angle, 16)});
            }
            if (rng.uniform() < o.lv_probability) {
                const Point at{c.x + 0.15 * rx / 0.34 + rng.uniform(-0.02, 0.02), c.y + rng.uniform(0.02, 0.06)};
                r.instances.push_back({ClassId::Lv, ellipse(at, rng.uniform(0.05, 0.08), rng.uniform(0.07, 0.10),
                                                           angle, 16)});
            }
            out.push_back(std::move(r));
        }
    }
    std::sort(out.begin(), out.end(), [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
    return out;
}

GrayImage render_record(const ImageRecord& record, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "render/" + record.image_id));
    GrayImage img(record.width, record.height);
    static constexpr double kLevel[kNumClasses] = {140.0, 70.0, 40.0};
    std::vector<double> level(img.pixels.size(), 20.0);
    for (const auto& inst : record.instances) {
        const BinaryMask m = rasterize(inst.polygon, record.width, record.height);
        for (std::size_t i = 0; i < level.size(); ++i) {
            if (m.bits()[i]) {
                level[i] = kLevel[class_index(inst.class_id)];
            }
        }
    }
    for (std::size_t i = 0; i < level.size(); ++i) {
        const double v = std::nearbyint(level[i] + 12.0 * rng.normal());
        img.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return img;
}

void write_fixture(const std::filesystem::path& dir, const std::vector<ImageRecord>& records, std::uint64_t seed) {
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "labels");
    for (const ImageRecord& r : records) {
        write_png(dir / "images" / (r.image_id + ".png"), render_record(r, seed));
        std::ofstream out(dir / "labels" / (r.image_id + ".txt"), std::ios::binary | std::ios::trunc);
        out << serialize_label_file(r.instances);
        if (!out) {
            throw Error(Errc::IoFailure, "cannot write label for " + r.image_id);
        }
    }
}

}  // namespace segpipe
