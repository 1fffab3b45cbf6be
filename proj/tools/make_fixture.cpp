// Writes a synthetic dataset: images/, labels/ and image_sizes.json.
#include "segpipe/error.hpp"
#include "segpipe/metrics.hpp"
#include "segpipe/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Synthetic fetal head fixture generator", "segpipe_make_fixture"};
    std::string out_dir;
    std::uint64_t seed = 42;
    segpipe::FixtureOptions opt;
    app.add_option("--out-dir", out_dir)->required();
    app.add_option("--seed", seed)->capture_default_str();
    app.add_option("--patients", opt.patients)->capture_default_str();
    app.add_option("--min-frames", opt.min_frames)->capture_default_str();
    app.add_option("--max-frames", opt.max_frames)->capture_default_str();
    app.add_option("--width", opt.width)->capture_default_str();
    app.add_option("--height", opt.height)->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    try {
        const auto records = segpipe::synthetic_records(opt, seed);
        segpipe::write_fixture(out_dir, records, seed);
        segpipe::ImageSizes sizes;
        for (const auto& r : records) {
            sizes[r.image_id] = {r.width, r.height};
        }
        segpipe::write_image_sizes(std::filesystem::path(out_dir) / "image_sizes.json", sizes);
        std::cout << records.size() << " images written to " << out_dir << "\n";
    } catch (const segpipe::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == segpipe::Errc::IoFailure ? 2 : 1;
    }
    return 0;
}
