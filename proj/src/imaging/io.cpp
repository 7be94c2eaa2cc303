#include "imaging/io.hpp"

#include "common/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

namespace cfe::img {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error::io("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    const std::streamoff size = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    if (size > 0)
        f.read(reinterpret_cast<char*>(buf.data()), size);
    if (!f)
        throw Error::io("cannot read file: " + path);
    return buf;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& buf) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw Error::io("cannot open file for writing: " + path);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f)
        throw Error::io("cannot write file: " + path);
}

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void push_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

const std::uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc)
        return a;
    if (pb <= pc)
        return b;
    return c;
}

Image decode_png(const std::vector<std::uint8_t>& buf, const std::string& path) {
    if (buf.size() < 8 + 25 || std::memcmp(buf.data(), kPngSig, 8) != 0)
        throw Error::data("corrupt PNG signature: " + path);

    std::size_t pos = 8;
    std::uint32_t width = 0, height = 0;
    int depth = 0;
    bool have_ihdr = false, done = false;
    std::vector<std::uint8_t> idat;

    while (pos + 12 <= buf.size() && !done) {
        const std::uint32_t len = be32(&buf[pos]);
        if (pos + 12 + len > buf.size())
            throw Error::data("corrupt PNG chunk (truncated): " + path);
        const char* type = reinterpret_cast<const char*>(&buf[pos + 4]);
        const std::uint8_t* data = &buf[pos + 8];
        const std::uint32_t want_crc = be32(&buf[pos + 8 + len]);
        const std::uint32_t got_crc = static_cast<std::uint32_t>(
            crc32(crc32(0L, &buf[pos + 4], 4), data, static_cast<uInt>(len)));
        if (want_crc != got_crc)
            throw Error::data("corrupt PNG chunk (bad CRC): " + path);

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13)
                throw Error::data("corrupt PNG header: " + path);
            width = be32(data);
            height = be32(data + 4);
            depth = data[8];
            const int color_type = data[9];
            const int interlace = data[12];
            if (width == 0 || height == 0)
                throw Error::data("corrupt PNG header (zero dimension): " + path);
            if (color_type != 2 || (depth != 8 && depth != 16))
                throw Error::data("unsupported PNG format (need 8/16-bit RGB): " + path);
            if (interlace != 0)
                throw Error::data("unsupported PNG format (interlaced): " + path);
            have_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            done = true;
        }
        pos += 12 + len;
    }
    if (!have_ihdr || idat.empty())
        throw Error::data("corrupt PNG (missing IHDR or IDAT): " + path);

    const int bpp = 3 * depth / 8;                       // bytes per pixel
    const std::size_t stride = std::size_t(width) * bpp; // bytes per scanline
    std::vector<std::uint8_t> raw((stride + 1) * height);
    {
        uLongf out_len = static_cast<uLongf>(raw.size());
        const int rc = uncompress(raw.data(), &out_len, idat.data(),
                                  static_cast<uLong>(idat.size()));
        if (rc != Z_OK || out_len != raw.size())
            throw Error::data("corrupt PNG (inflate failed): " + path);
    }

    // undo per-row filters in place
    std::vector<std::uint8_t> prev(stride, 0);
    Image img(static_cast<int>(width), static_cast<int>(height));
    const double scale = depth == 8 ? 1.0 / 255.0 : 1.0 / 65535.0;
    for (std::uint32_t y = 0; y < height; ++y) {
        const std::uint8_t filter = raw[(stride + 1) * y];
        std::uint8_t* row = &raw[(stride + 1) * y + 1];
        switch (filter) {
        case 0:
            break;
        case 1:
            for (std::size_t i = bpp; i < stride; ++i)
                row[i] = std::uint8_t(row[i] + row[i - bpp]);
            break;
        case 2:
            for (std::size_t i = 0; i < stride; ++i)
                row[i] = std::uint8_t(row[i] + prev[i]);
            break;
        case 3:
            for (std::size_t i = 0; i < stride; ++i) {
                const int left = i >= static_cast<std::size_t>(bpp) ? row[i - bpp] : 0;
                row[i] = std::uint8_t(row[i] + ((left + prev[i]) >> 1));
            }
            break;
        case 4:
            for (std::size_t i = 0; i < stride; ++i) {
                const int left = i >= static_cast<std::size_t>(bpp) ? row[i - bpp] : 0;
                const int ul = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
                row[i] = std::uint8_t(row[i] + paeth(left, prev[i], ul));
            }
            break;
        default:
            throw Error::data("corrupt PNG (unknown filter): " + path);
        }
        std::copy(row, row + stride, prev.begin());

        for (std::uint32_t x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c) {
                if (depth == 8) {
                    img.at(static_cast<int>(x), static_cast<int>(y), c) =
                        row[x * 3 + c] * scale;
                } else {
                    const std::size_t o = (std::size_t(x) * 3 + c) * 2;
                    img.at(static_cast<int>(x), static_cast<int>(y), c) =
                        ((row[o] << 8) | row[o + 1]) * scale;
                }
            }
    }
    return img;
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
    push_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, &out[type_at], static_cast<uInt>(4 + data.size())));
    push_be32(out, crc);
}

void encode_png(const Image& image, int depth, const std::string& path) {
    const int w = image.width, h = image.height;
    const int bpp = 3 * depth / 8;
    const std::size_t stride = std::size_t(w) * bpp;
    std::vector<std::uint8_t> raw((stride + 1) * h, 0);
    const double peak = depth == 8 ? 255.0 : 65535.0;
    for (int y = 0; y < h; ++y) {
        std::uint8_t* row = &raw[(stride + 1) * y + 1];
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(image.at(x, y, c), 0.0, 1.0);
                const std::uint32_t q =
                    static_cast<std::uint32_t>(std::floor(v * peak + 0.5));
                if (depth == 8) {
                    row[x * 3 + c] = std::uint8_t(q);
                } else {
                    row[(std::size_t(x) * 3 + c) * 2] = std::uint8_t(q >> 8);
                    row[(std::size_t(x) * 3 + c) * 2 + 1] = std::uint8_t(q);
                }
            }
    }

    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw Error::io("PNG deflate failed: " + path);
    comp.resize(comp_len);

    std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
    std::vector<std::uint8_t> ihdr;
    push_be32(ihdr, static_cast<std::uint32_t>(w));
    push_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(std::uint8_t(depth));
    ihdr.push_back(2); // truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", comp);
    append_chunk(out, "IEND", {});
    write_file(path, out);
}

Image decode_ppm(const std::vector<std::uint8_t>& buf, const std::string& path) {
    std::size_t pos = 2; // past "P6"
    auto next_token = [&]() -> long {
        // skip whitespace and '#' comments
        while (pos < buf.size()) {
            if (std::isspace(buf[pos])) {
                ++pos;
            } else if (buf[pos] == '#') {
                while (pos < buf.size() && buf[pos] != '\n')
                    ++pos;
            } else {
                break;
            }
        }
        if (pos >= buf.size() || !std::isdigit(buf[pos]))
            throw Error::data("corrupt PPM header: " + path);
        long v = 0;
        while (pos < buf.size() && std::isdigit(buf[pos])) {
            v = v * 10 + (buf[pos] - '0');
            ++pos;
        }
        return v;
    };
    const long w = next_token();
    const long h = next_token();
    const long maxval = next_token();
    if (w < 1 || h < 1 || (maxval != 255 && maxval != 65535))
        throw Error::data("unsupported PPM format (need maxval 255 or 65535): " + path);
    ++pos; // single whitespace after maxval
    const int bytes = maxval == 255 ? 1 : 2;
    const std::size_t need = std::size_t(w) * h * 3 * bytes;
    if (pos + need > buf.size())
        throw Error::data("corrupt PPM (truncated pixel data): " + path);

    Image img(static_cast<int>(w), static_cast<int>(h));
    const double scale = 1.0 / maxval;
    const std::uint8_t* p = &buf[pos];
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                long v;
                if (bytes == 1) {
                    v = *p++;
                } else {
                    v = (long(p[0]) << 8) | p[1];
                    p += 2;
                }
                img.at(static_cast<int>(x), static_cast<int>(y), c) = v * scale;
            }
    return img;
}

} // namespace

Image load_image(const std::string& path) {
    std::vector<std::uint8_t> buf = read_file(path);
    if (buf.size() >= 8 && std::memcmp(buf.data(), kPngSig, 8) == 0)
        return decode_png(buf, path);
    if (buf.size() >= 2 && buf[0] == 'P' && buf[1] == '6')
        return decode_ppm(buf, path);
    throw Error::data("unsupported image format (need PNG or PPM P6): " + path);
}

void save_image(const Image& image, const std::string& path) { encode_png(image, 8, path); }

void save_image_png16(const Image& image, const std::string& path) {
    encode_png(image, 16, path);
}

} // namespace cfe::img
