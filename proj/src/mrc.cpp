#include "tomopair/mrc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace tomopair {

namespace {

void put_i32(std::vector<std::uint8_t>& buf, std::size_t off, std::int32_t v) {
    std::uint32_t u = static_cast<std::uint32_t>(v);
    buf[off] = static_cast<std::uint8_t>(u & 0xFF);
    buf[off + 1] = static_cast<std::uint8_t>((u >> 8) & 0xFF);
    buf[off + 2] = static_cast<std::uint8_t>((u >> 16) & 0xFF);
    buf[off + 3] = static_cast<std::uint8_t>((u >> 24) & 0xFF);
}

void put_f32(std::vector<std::uint8_t>& buf, std::size_t off, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_i32(buf, off, static_cast<std::int32_t>(u));
}

std::int32_t get_i32(const std::vector<std::uint8_t>& buf, std::size_t off) {
    std::uint32_t u = static_cast<std::uint32_t>(buf[off]) |
                      (static_cast<std::uint32_t>(buf[off + 1]) << 8) |
                      (static_cast<std::uint32_t>(buf[off + 2]) << 16) |
                      (static_cast<std::uint32_t>(buf[off + 3]) << 24);
    return static_cast<std::int32_t>(u);
}

float get_f32(const std::vector<std::uint8_t>& buf, std::size_t off) {
    std::uint32_t u = static_cast<std::uint32_t>(get_i32(buf, off));
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

// Header word offsets in bytes.
constexpr std::size_t kOffMode = 12;
constexpr std::size_t kOffMxyz = 28;
constexpr std::size_t kOffCella = 40;
constexpr std::size_t kOffCellb = 52;
constexpr std::size_t kOffMap = 64;
constexpr std::size_t kOffStats = 76;
constexpr std::size_t kOffIspg = 88;
constexpr std::size_t kOffNversion = 108;
constexpr std::size_t kOffOrigin = 196;
constexpr std::size_t kOffMagic = 208;
constexpr std::size_t kOffMachst = 212;
constexpr std::size_t kOffRms = 216;

} // namespace

ScalarField read_mrc_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < MrcHeader::kBytes)
        throw MrcError(MrcError::Kind::Truncated, "MRC: file shorter than the 1024-byte header");
    if (bytes[kOffMagic] != 'M' || bytes[kOffMagic + 1] != 'A' || bytes[kOffMagic + 2] != 'P' ||
        bytes[kOffMagic + 3] != ' ')
        throw MrcError(MrcError::Kind::BadMagic, "MRC: missing 'MAP ' magic word");

    // Accept the little-endian machine stamp (0x44 0x44 / 0x44 0x41) and the
    // all-zero stamp some writers emit; big-endian files are not supported.
    std::uint8_t s0 = bytes[kOffMachst], s1 = bytes[kOffMachst + 1];
    bool little = (s0 == 0x44 && (s1 == 0x44 || s1 == 0x41)) || (s0 == 0 && s1 == 0);
    if (!little)
        throw MrcError(MrcError::Kind::UnsupportedMode, "MRC: big-endian files are not supported");

    std::int32_t nx = get_i32(bytes, 0);
    std::int32_t ny = get_i32(bytes, 4);
    std::int32_t nz = get_i32(bytes, 8);
    std::int32_t mode = get_i32(bytes, kOffMode);
    if (mode != 2)
        throw MrcError(MrcError::Kind::UnsupportedMode,
                       "MRC: only mode 2 (float32) is supported, got mode " + std::to_string(mode));
    if (nx <= 0 || ny <= 0 || nz <= 0)
        throw MrcError(MrcError::Kind::BadHeader, "MRC: non-positive extents in header");
    std::int32_t nsymbt = get_i32(bytes, kOffIspg + 4);
    if (nsymbt != 0)
        throw MrcError(MrcError::Kind::UnsupportedMode, "MRC: extended headers are not supported");

    std::size_t n = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
                    static_cast<std::size_t>(nz);
    std::size_t expected = MrcHeader::kBytes + n * 4;
    if (bytes.size() < expected)
        throw MrcError(MrcError::Kind::Truncated,
                       "MRC: payload truncated (expected " + std::to_string(expected) +
                           " bytes, got " + std::to_string(bytes.size()) + ")");

    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i)
        data[i] = get_f32(bytes, MrcHeader::kBytes + i * 4);

    std::int32_t mx = get_i32(bytes, kOffMxyz);
    std::int32_t my = get_i32(bytes, kOffMxyz + 4);
    std::int32_t mz = get_i32(bytes, kOffMxyz + 8);
    float cx = get_f32(bytes, kOffCella);
    float cy = get_f32(bytes, kOffCella + 4);
    float cz = get_f32(bytes, kOffCella + 8);
    std::vector<double> voxel = {
        (mz > 0 && cz > 0) ? static_cast<double>(cz) / mz : 1.0,
        (my > 0 && cy > 0) ? static_cast<double>(cy) / my : 1.0,
        (mx > 0 && cx > 0) ? static_cast<double>(cx) / mx : 1.0,
    };

    return ScalarField({static_cast<std::size_t>(nz), static_cast<std::size_t>(ny),
                        static_cast<std::size_t>(nx)},
                       std::move(data), std::move(voxel));
}

ScalarField read_mrc(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("MRC: cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return read_mrc_bytes(bytes);
}

std::vector<std::uint8_t> write_mrc_bytes(const ScalarField& f) {
    require(f.ndim() == 2 || f.ndim() == 3, "write_mrc: field must be 2D or 3D");
    f.require_finite("write_mrc");

    std::size_t nz = f.ndim() == 3 ? f.shape[0] : 1;
    std::size_t ny = f.ndim() == 3 ? f.shape[1] : f.shape[0];
    std::size_t nx = f.ndim() == 3 ? f.shape[2] : f.shape[1];
    double vz = f.ndim() == 3 ? f.voxel_size[0] : 1.0;
    double vy = f.ndim() == 3 ? f.voxel_size[1] : f.voxel_size[0];
    double vx = f.ndim() == 3 ? f.voxel_size[2] : f.voxel_size[1];

    double dmin = f.data[0], dmax = f.data[0], sum = 0.0;
    for (float v : f.data) {
        dmin = std::min<double>(dmin, v);
        dmax = std::max<double>(dmax, v);
        sum += v;
    }
    double dmean = sum / static_cast<double>(f.size());
    double ss = 0.0;
    for (float v : f.data) {
        double d = v - dmean;
        ss += d * d;
    }
    double rms = std::sqrt(ss / static_cast<double>(f.size()));

    std::vector<std::uint8_t> buf(MrcHeader::kBytes + f.size() * 4, 0);
    put_i32(buf, 0, static_cast<std::int32_t>(nx));
    put_i32(buf, 4, static_cast<std::int32_t>(ny));
    put_i32(buf, 8, static_cast<std::int32_t>(nz));
    put_i32(buf, kOffMode, 2);
    // nxstart/nystart/nzstart stay 0.
    put_i32(buf, kOffMxyz, static_cast<std::int32_t>(nx));
    put_i32(buf, kOffMxyz + 4, static_cast<std::int32_t>(ny));
    put_i32(buf, kOffMxyz + 8, static_cast<std::int32_t>(nz));
    put_f32(buf, kOffCella, static_cast<float>(vx * static_cast<double>(nx)));
    put_f32(buf, kOffCella + 4, static_cast<float>(vy * static_cast<double>(ny)));
    put_f32(buf, kOffCella + 8, static_cast<float>(vz * static_cast<double>(nz)));
    put_f32(buf, kOffCellb, 90.0f);
    put_f32(buf, kOffCellb + 4, 90.0f);
    put_f32(buf, kOffCellb + 8, 90.0f);
    put_i32(buf, kOffMap, 1);
    put_i32(buf, kOffMap + 4, 2);
    put_i32(buf, kOffMap + 8, 3);
    put_f32(buf, kOffStats, static_cast<float>(dmin));
    put_f32(buf, kOffStats + 4, static_cast<float>(dmax));
    put_f32(buf, kOffStats + 8, static_cast<float>(dmean));
    put_i32(buf, kOffIspg, 1);
    put_i32(buf, kOffNversion, 20140);
    put_f32(buf, kOffOrigin, 0.0f);
    buf[kOffMagic] = 'M';
    buf[kOffMagic + 1] = 'A';
    buf[kOffMagic + 2] = 'P';
    buf[kOffMagic + 3] = ' ';
    buf[kOffMachst] = 0x44;
    buf[kOffMachst + 1] = 0x44;
    put_f32(buf, kOffRms, static_cast<float>(rms));

    for (std::size_t i = 0; i < f.size(); ++i)
        put_f32(buf, MrcHeader::kBytes + i * 4, f.data[i]);
    return buf;
}

std::size_t write_mrc(const ScalarField& f, const std::string& path) {
    std::vector<std::uint8_t> bytes = write_mrc_bytes(f);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("MRC: cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("MRC: write failed for '" + path + "'");
    return bytes.size();
}

ScalarField squeeze_to_2d(const ScalarField& f) {
    require(f.ndim() == 3 && f.shape[0] == 1, "squeeze_to_2d: field is not a single section");
    return ScalarField({f.shape[1], f.shape[2]}, f.data, {f.voxel_size[1], f.voxel_size[2]});
}

} // namespace tomopair
