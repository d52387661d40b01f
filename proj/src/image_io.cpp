#include "silsm/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace silsm {

namespace {

struct ReadCursor {
    const Bytes* bytes;
    std::size_t pos;
};

void png_read_mem(png_structp png, png_bytep out, png_size_t n) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->pos + n > cur->bytes->size()) png_error(png, "truncated PNG data");
    std::memcpy(out, cur->bytes->data() + cur->pos, n);
    cur->pos += n;
}

void png_write_mem(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}

void png_flush_noop(png_structp) {}

// libpng reports errors by longjmp; the helpers below that call setjmp keep
// only trivially destructible locals.
struct PngErrorSink {
    char message[256] = {0};
};

void png_error_jump(png_structp png, png_const_charp msg) {
    auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
    if (sink) std::snprintf(sink->message, sizeof sink->message, "%s", msg);
    png_longjmp(png, 1);
}

void png_warn_ignore(png_structp, png_const_charp) {}

struct PngHeader {
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int channels = 0;
    int depth = 0;
    std::size_t rowbytes = 0;
};

bool png_read_header(png_structp png, png_infop info, ReadCursor* cur, PngHeader* hdr) {
    if (setjmp(png_jmpbuf(png))) return false;
    png_set_read_fn(png, cur, png_read_mem);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);
    hdr->width = png_get_image_width(png, info);
    hdr->height = png_get_image_height(png, info);
    hdr->channels = png_get_channels(png, info);
    hdr->depth = png_get_bit_depth(png, info);
    hdr->rowbytes = png_get_rowbytes(png, info);
    return true;
}

bool png_read_rows(png_structp png, png_bytepp rows) {
    if (setjmp(png_jmpbuf(png))) return false;
    png_read_image(png, rows);
    return true;
}

GrayImage decode_png(const Bytes& bytes) {
    PngErrorSink sink;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, png_error_jump, png_warn_ignore);
    if (!png) throw DecodeError("PNG: cannot allocate reader");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DecodeError("PNG: cannot allocate info");
    }
    ReadCursor cur{&bytes, 0};
    PngHeader hdr;
    if (!png_read_header(png, info, &cur, &hdr)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DecodeError(std::string("PNG: ") + sink.message);
    }
    if (hdr.width > 65536 || hdr.height > 65536) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DecodeError("PNG: image too large");
    }
    std::vector<std::uint8_t> buf(hdr.rowbytes * hdr.height);
    std::vector<png_bytep> rows(hdr.height);
    for (png_uint_32 y = 0; y < hdr.height; ++y) rows[y] = buf.data() + y * hdr.rowbytes;
    const bool ok = png_read_rows(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    if (!ok) throw DecodeError(std::string("PNG: ") + sink.message);

    GrayImage img(static_cast<int>(hdr.width), static_cast<int>(hdr.height));
    const double scale = hdr.depth == 16 ? 255.0 / 65535.0 : 1.0;
    for (png_uint_32 y = 0; y < hdr.height; ++y) {
        for (png_uint_32 x = 0; x < hdr.width; ++x) {
            double c[3] = {0, 0, 0};
            for (int k = 0; k < hdr.channels && k < 3; ++k) {
                const std::size_t idx = static_cast<std::size_t>(x) * hdr.channels + k;
                if (hdr.depth == 16) {
                    std::uint16_t v;
                    std::memcpy(&v, rows[y] + 2 * idx, 2);
                    c[k] = v;
                } else {
                    c[k] = rows[y][idx];
                }
            }
            const double v = hdr.channels >= 3 ? 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2] : c[0];
            img(static_cast<int>(x), static_cast<int>(y)) = std::min(255.0, std::max(0.0, v * scale));
        }
    }
    return img;
}

GrayImage decode_pgm(const Bytes& bytes) {
    std::string s(bytes.begin(), bytes.end());
    std::istringstream is(s);
    std::string magic;
    is >> magic;
    auto next_int = [&is]() {
        int v;
        while (true) {
            is >> std::ws;
            if (is.peek() == '#') {
                std::string line;
                std::getline(is, line);
                continue;
            }
            if (!(is >> v)) throw DecodeError("PGM: malformed header");
            return v;
        }
    };
    const int w = next_int(), h = next_int(), maxval = next_int();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw DecodeError("PGM: bad header values");
    is.get();
    const std::size_t offset = static_cast<std::size_t>(is.tellg());
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(w) * h * bpp;
    if (offset + need > bytes.size()) throw DecodeError("PGM: truncated pixel data");
    GrayImage img(w, h);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = bpp == 2 ? (bytes[offset + 2 * i] << 8 | bytes[offset + 2 * i + 1]) : bytes[offset + i];
        img[i] = v * 255.0 / maxval;
    }
    return img;
}

bool png_write_all(png_structp png, png_infop info, Bytes* out, int width, int height, int color_type, int channels,
                   const std::uint8_t* data) {
    if (setjmp(png_jmpbuf(png))) return false;
    png_set_write_fn(png, out, png_write_mem, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(data + static_cast<std::size_t>(y) * width * channels));
    png_write_end(png, nullptr);
    return true;
}

Bytes encode_png(int width, int height, int color_type, int channels, const std::uint8_t* data) {
    PngErrorSink sink;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, png_error_jump, png_warn_ignore);
    if (!png) throw Error("PNG: cannot allocate writer");
    png_infop info = png_create_info_struct(png);
    Bytes out;
    const bool ok = info && png_write_all(png, info, &out, width, height, color_type, channels, data);
    png_destroy_write_struct(&png, &info);
    if (!ok) throw Error(std::string("PNG encode failed: ") + sink.message);
    return out;
}

constexpr char kSnapshotMagic[8] = {'S', 'I', 'L', 'S', 'M', 'P', 'H', 'I'};
constexpr std::uint32_t kSnapshotVersion = 1;

void put_u32(Bytes& b, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) b.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get_u32(const Bytes& b, std::size_t at) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[at + k]) << (8 * k);
    return v;
}

}  // namespace

GrayImage decode_image(const Bytes& bytes) {
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
    throw DecodeError("unsupported image format (expected PNG or binary PGM)");
}

GrayImage read_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

RegionMask decode_mask(const Bytes& bytes) {
    const GrayImage img = decode_image(bytes);
    RegionMask m(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) m[i] = img[i] > 0.0 ? 1 : 0;
    return m;
}

RegionMask read_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }

Bytes encode_png_gray(const Grid<std::uint8_t>& pixels) {
    return encode_png(pixels.width(), pixels.height(), PNG_COLOR_TYPE_GRAY, 1, pixels.data().data());
}

Bytes encode_png_rgb(const RgbImage& image) {
    return encode_png(image.width, image.height, PNG_COLOR_TYPE_RGB, 3, image.pixels.data());
}

Bytes encode_mask_png(const RegionMask& mask) {
    Grid<std::uint8_t> px(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i) px[i] = mask[i] ? 255 : 0;
    return encode_png_gray(px);
}

Bytes encode_gray_png(const GrayImage& image) {
    Grid<std::uint8_t> px(image.width(), image.height());
    for (std::size_t i = 0; i < image.size(); ++i)
        px[i] = static_cast<std::uint8_t>(std::lround(std::min(255.0, std::max(0.0, image[i]))));
    return encode_png_gray(px);
}

Bytes encode_snapshot(const ScalarGrid& grid) {
    Bytes b(kSnapshotMagic, kSnapshotMagic + 8);
    put_u32(b, kSnapshotVersion);
    put_u32(b, static_cast<std::uint32_t>(grid.width()));
    put_u32(b, static_cast<std::uint32_t>(grid.height()));
    b.reserve(b.size() + grid.size() * 8);
    for (double v : grid.data()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        for (int k = 0; k < 8; ++k) b.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
    }
    return b;
}

ScalarGrid decode_snapshot(const Bytes& b) {
    if (b.size() < 20 || std::memcmp(b.data(), kSnapshotMagic, 8) != 0) throw DecodeError("snapshot: bad magic");
    if (get_u32(b, 8) != kSnapshotVersion) throw DecodeError("snapshot: unsupported version");
    const std::uint32_t w = get_u32(b, 12), h = get_u32(b, 16);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (b.size() != 20 + 8 * n) throw DecodeError("snapshot: size does not match dimensions");
    ScalarGrid g(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[20 + 8 * i + k]) << (8 * k);
        std::memcpy(&g[i], &bits, 8);
    }
    return g;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DecodeError("cannot open '" + path.string() + "'");
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const Bytes& bytes) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("short write to '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    write_file(path, Bytes(text.begin(), text.end()));
}

}  // namespace silsm
