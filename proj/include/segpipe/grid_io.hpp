#pragma once

// Dense real grids on disk.
//
// CSV (.csv): first line "width,height", then `height` lines of `width`
// comma-separated values, row-major.
// Binary (any other extension): the 4 bytes "SGRD", width and height as
// little-endian uint32, then width*height little-endian float64 values.

#include <filesystem>
#include <vector>

namespace segpipe {

struct Grid {
    int width = 0;
    int height = 0;
    std::vector<double> values;
};

Grid read_grid(const std::filesystem::path& path);
void write_grid(const std::filesystem::path& path, const Grid& grid);

}  // namespace segpipe
