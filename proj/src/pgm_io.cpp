#include "mamreg/pgm_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mamreg/errors.hpp"

namespace mamreg {

namespace {

// Reads the next PGM header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) continue;
        tok.push_back(static_cast<char>(c));
        while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#')
            tok.push_back(static_cast<char>(in.get()));
        return tok;
    }
    return tok;
}

long parse_long(const std::string& tok, const char* what) {
    long value = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw FormatError(std::string("pgm: bad ") + what + " '" + tok + "'");
    return value;
}

void read_meta_sidecar(const std::string& path, Image& img) {
    std::ifstream meta(path + ".meta");
    if (!meta) return;
    std::string line;
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const double value = std::atof(line.c_str() + eq + 1);
        if (value <= 0.0) continue;
        if (key == "spacing_x") img.spacing_x = value;
        if (key == "spacing_y") img.spacing_y = value;
    }
}

std::string format_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

} // namespace

Image load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("pgm: cannot open '" + path + "'");

    const std::string magic = next_token(in);
    if (magic != "P5")
        throw FormatError("pgm: '" + path + "' is not binary PGM (magic '" + magic + "')");
    const long w = parse_long(next_token(in), "width");
    const long h = parse_long(next_token(in), "height");
    const long maxval = parse_long(next_token(in), "maxval");
    if (w < 1 || h < 1) throw FormatError("pgm: non-positive dimensions");
    if (maxval < 1 || maxval > 65535) throw FormatError("pgm: maxval out of range");
    in.get(); // single whitespace byte before the payload

    Image img(static_cast<int>(w), static_cast<int>(h));
    const bool wide = maxval > 255;
    const size_t n = img.size();
    std::vector<unsigned char> raw(n * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw IoError("pgm: truncated payload in '" + path + "'");

    const double scale = 1.0 / static_cast<double>(maxval);
    if (wide) {
        for (size_t i = 0; i < n; ++i) {
            const unsigned v = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
            img.data[i] = v * scale;
        }
    } else {
        for (size_t i = 0; i < n; ++i) img.data[i] = raw[i] * scale;
    }
    read_meta_sidecar(path, img);
    return img;
}

void save_pgm(const Image& image, const std::string& path, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16)
        throw std::invalid_argument("save_pgm: bit depth must be 8 or 16");
    if (image.width < 1 || image.height < 1)
        throw std::invalid_argument("save_pgm: empty image");

    const long maxval = (bit_depth == 8) ? 255 : 65535;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("pgm: cannot write '" + path + "'");
    out << "P5\n" << image.width << " " << image.height << "\n" << maxval << "\n";

    const size_t n = image.size();
    std::vector<unsigned char> raw(n * (bit_depth == 16 ? 2 : 1));
    for (size_t i = 0; i < n; ++i) {
        const double v = std::clamp(image.data[i], 0.0, 1.0);
        const long q = std::lround(v * maxval);
        if (bit_depth == 16) {
            raw[2 * i] = static_cast<unsigned char>((q >> 8) & 0xff);
            raw[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
        } else {
            raw[i] = static_cast<unsigned char>(q & 0xff);
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("pgm: write failed for '" + path + "'");
    out.close();

    std::ofstream meta(path + ".meta");
    if (!meta) throw IoError("pgm: cannot write '" + path + ".meta'");
    meta << "spacing_x=" << format_double(image.spacing_x) << "\n"
         << "spacing_y=" << format_double(image.spacing_y) << "\n";
}

Mask load_mask_pgm(const std::string& path) {
    const Image img = load_pgm(path);
    Mask mask(img.width, img.height);
    for (size_t i = 0; i < img.size(); ++i) mask.data[i] = img.data[i] > 0.5 ? 1 : 0;
    return mask;
}

void save_mask_pgm(const Mask& mask, const std::string& path) {
    Image img(mask.width, mask.height);
    for (size_t i = 0; i < mask.size(); ++i) img.data[i] = mask.data[i] ? 1.0 : 0.0;
    save_pgm(img, path, 8);
}

} // namespace mamreg
