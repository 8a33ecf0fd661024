#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tomopair/grid.hpp"

namespace tomopair {

// Reader/writer for the MRC2014 volume format, restricted to mode 2
// (32-bit float), little-endian, no extended header. The header is exactly
// 1024 bytes and the payload is nx*ny*nz*4 bytes. 2D fields are written as
// nz = 1 volumes so a single format serves projections and tomograms.
class MrcError : public std::runtime_error {
public:
    enum class Kind { BadMagic, UnsupportedMode, Truncated, BadHeader };

    MrcError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct MrcHeader {
    std::int32_t nx = 0, ny = 0, nz = 0;
    std::int32_t mode = 2;
    float cella[3] = {0, 0, 0};    // cell dimensions (x, y, z)
    float dmin = 0, dmax = 0, dmean = 0;
    float rms = 0;

    static constexpr std::size_t kBytes = 1024;
};

// Parses header + payload. The returned field is always 3D with shape
// (nz, ny, nx) and voxel_size = cella / extent per axis.
ScalarField read_mrc_bytes(const std::vector<std::uint8_t>& bytes);
ScalarField read_mrc(const std::string& path);

// Serializes a 2D or 3D field (values must be finite). Returns the encoded
// bytes / the number of bytes written.
std::vector<std::uint8_t> write_mrc_bytes(const ScalarField& f);
std::size_t write_mrc(const ScalarField& f, const std::string& path);

// Drops a leading nz = 1 axis, recovering the 2D field a projection was
// written as.
ScalarField squeeze_to_2d(const ScalarField& f);

} // namespace tomopair
