#include "vprune/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

static_assert(std::endian::native == std::endian::little,
              "cvol IO assumes a little-endian host");

namespace vprune {

namespace {

constexpr char kMagic[4] = {'C', 'V', 'O', 'L'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

void put_f32(std::ostream& out, float v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw IoError(std::string("cvol: truncated ") + what);
    return v;
}

float get_f32(std::istream& in, const char* what) {
    float v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw IoError(std::string("cvol: truncated ") + what);
    return v;
}

}  // namespace

void cvol_write(std::ostream& out, const ScalarVolume& vol) {
    if (vol.data.size() != static_cast<std::size_t>(vol.dims.count()))
        throw IoError("cvol: data length disagrees with dims");
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(vol.dims.nx));
    put_u32(out, static_cast<std::uint32_t>(vol.dims.ny));
    put_u32(out, static_cast<std::uint32_t>(vol.dims.nz));
    put_f32(out, static_cast<float>(vol.spacing.x()));
    put_f32(out, static_cast<float>(vol.spacing.y()));
    put_f32(out, static_cast<float>(vol.spacing.z()));
    std::vector<float> buf(vol.data.size());
    for (std::size_t i = 0; i < vol.data.size(); ++i) buf[i] = static_cast<float>(vol.data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * 4));
    if (!out) throw IoError("cvol: write failed");
}

ScalarVolume cvol_read(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError("cvol: bad magic");
    const std::uint32_t version = get_u32(in, "version");
    if (version != kVersion)
        throw IoError("cvol: unsupported version " + std::to_string(version));
    const std::uint32_t nx = get_u32(in, "nx");
    const std::uint32_t ny = get_u32(in, "ny");
    const std::uint32_t nz = get_u32(in, "nz");
    const float sx = get_f32(in, "sx");
    const float sy = get_f32(in, "sy");
    const float sz = get_f32(in, "sz");
    if (nx == 0 || ny == 0 || nz == 0 || !(sx > 0) || !(sy > 0) || !(sz > 0))
        throw IoError("cvol: invalid dims/spacing");
    const std::uint64_t n = static_cast<std::uint64_t>(nx) * ny * nz;
    if (n > (1ULL << 31)) throw IoError("cvol: volume too large");

    ScalarVolume vol(GridDims{static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nz)},
                     Vec3(sx, sy, sz));
    std::vector<float> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4));
    if (!in || static_cast<std::uint64_t>(in.gcount()) != n * 4)
        throw IoError("cvol: truncated payload");
    for (std::size_t i = 0; i < buf.size(); ++i) vol.data[i] = static_cast<double>(buf[i]);
    return vol;
}

void cvol_write(const std::filesystem::path& path, const ScalarVolume& vol) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    cvol_write(out, vol);
}

ScalarVolume cvol_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open " + path.string());
    return cvol_read(in);
}

}  // namespace vprune
