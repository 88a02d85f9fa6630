#include "mamreg/field_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "mamreg/errors.hpp"

namespace mamreg {

namespace {

constexpr char kMagic[7] = {'M', 'R', 'E', 'G', 'F', '1', '\n'};

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

float get_f32(std::istream& in) {
    const uint32_t bits = get_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void write_plane(std::ostream& out, const std::vector<double>& plane) {
    std::vector<float> buf(plane.size());
    for (size_t i = 0; i < plane.size(); ++i) buf[i] = static_cast<float>(plane[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void read_plane(std::istream& in, std::vector<double>& plane) {
    std::vector<float> buf(plane.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    for (size_t i = 0; i < plane.size(); ++i) plane[i] = buf[i];
}

} // namespace

void save_field(const DisplacementField& field, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("field: cannot write '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    put_u32(out, static_cast<uint32_t>(field.width));
    put_u32(out, static_cast<uint32_t>(field.height));
    put_f32(out, static_cast<float>(field.spacing_x));
    put_f32(out, static_cast<float>(field.spacing_y));
    write_plane(out, field.dx);
    write_plane(out, field.dy);
    if (!out) throw IoError("field: write failed for '" + path + "'");
}

DisplacementField load_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("field: cannot open '" + path + "'");
    char magic[7];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("field: '" + path + "' is not an MREGF1 file");
    const uint32_t w = get_u32(in);
    const uint32_t h = get_u32(in);
    const float sx = get_f32(in);
    const float sy = get_f32(in);
    if (!in || w < 1 || h < 1 || sx <= 0.0f || sy <= 0.0f)
        throw FormatError("field: bad header in '" + path + "'");
    DisplacementField field(static_cast<int>(w), static_cast<int>(h), sx, sy);
    read_plane(in, field.dx);
    read_plane(in, field.dy);
    if (!in) throw IoError("field: truncated payload in '" + path + "'");
    return field;
}

} // namespace mamreg
