#include "segpipe/grid_io.hpp"

#include "segpipe/error.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace segpipe {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'G', 'R', 'D'};

bool is_csv(const std::filesystem::path& path) { return path.extension() == ".csv"; }

std::vector<double> parse_csv_row(const std::string& line, std::size_t row, const std::filesystem::path& path) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t end = line.find(',', pos);
        if (end == std::string::npos) {
            end = line.size();
        }
        std::size_t a = pos, b = end;
        while (a < b && std::isspace(static_cast<unsigned char>(line[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(line[b - 1]))) --b;
        double v = 0.0;
        const auto [p, ec] = std::from_chars(line.data() + a, line.data() + b, v);
        if (ec != std::errc{} || p != line.data() + b || a == b) {
            throw Error(Errc::InvalidInput, path.string() + ": bad value on row " + std::to_string(row));
        }
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return __builtin_bswap32(v);
    }
    return v;
}

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return __builtin_bswap64(v);
    }
    return v;
}

}  // namespace

Grid read_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::IoFailure, "cannot read " + path.string());
    }
    Grid g;
    if (is_csv(path)) {
        std::string line;
        std::getline(in, line);
        const auto header = parse_csv_row(line, 0, path);
        if (header.size() != 2 || header[0] < 1 || header[1] < 1) {
            throw Error(Errc::InvalidInput, path.string() + ": header must be 'width,height'");
        }
        g.width = static_cast<int>(header[0]);
        g.height = static_cast<int>(header[1]);
        for (int r = 0; r < g.height; ++r) {
            if (!std::getline(in, line)) {
                throw Error(Errc::InvalidInput, path.string() + ": expected " + std::to_string(g.height) + " rows");
            }
            const auto row = parse_csv_row(line, static_cast<std::size_t>(r) + 1, path);
            if (row.size() != static_cast<std::size_t>(g.width)) {
                throw Error(Errc::InvalidInput, path.string() + ": row " + std::to_string(r + 1) + " has " +
                                                    std::to_string(row.size()) + " values");
            }
            g.values.insert(g.values.end(), row.begin(), row.end());
        }
        return g;
    }

    std::array<char, 4> magic{};
    std::uint32_t w = 0, h = 0;
    in.read(magic.data(), 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || magic != kMagic) {
        throw Error(Errc::InvalidInput, path.string() + ": not an SGRD grid");
    }
    w = to_le(w);
    h = to_le(h);
    if (w == 0 || h == 0) {
        throw Error(Errc::InvalidInput, path.string() + ": empty grid");
    }
    g.width = static_cast<int>(w);
    g.height = static_cast<int>(h);
    g.values.resize(static_cast<std::size_t>(w) * h);
    for (double& v : g.values) {
        std::uint64_t raw = 0;
        in.read(reinterpret_cast<char*>(&raw), 8);
        raw = to_le(raw);
        std::memcpy(&v, &raw, 8);
    }
    if (!in) {
        throw Error(Errc::InvalidInput, path.string() + ": truncated grid");
    }
    return g;
}

void write_grid(const std::filesystem::path& path, const Grid& grid) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(Errc::IoFailure, "cannot write " + path.string());
    }
    if (is_csv(path)) {
        out << grid.width << ',' << grid.height << '\n';
        char buf[32];
        for (int r = 0; r < grid.height; ++r) {
            for (int c = 0; c < grid.width; ++c) {
                const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, grid.values[static_cast<std::size_t>(r) * grid.width + c]);
                out << (c ? "," : "") << std::string_view(buf, static_cast<std::size_t>(p - buf));
            }
            out << '\n';
        }
    } else {
        out.write(kMagic.data(), 4);
        const std::uint32_t w = to_le(static_cast<std::uint32_t>(grid.width));
        const std::uint32_t h = to_le(static_cast<std::uint32_t>(grid.height));
        out.write(reinterpret_cast<const char*>(&w), 4);
        out.write(reinterpret_cast<const char*>(&h), 4);
        for (const double v : grid.values) {
            std::uint64_t raw;
            std::memcpy(&raw, &v, 8);
            raw = to_le(raw);
            out.write(reinterpret_cast<const char*>(&raw), 8);
        }
    }
    if (!out) {
        throw Error(Errc::IoFailure, "cannot write " + path.string());
    }
}

}  // namespace segpipe
