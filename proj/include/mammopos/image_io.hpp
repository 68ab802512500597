#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include <png.h>

#include "mammopos/common.hpp"
#include "mammopos/image.hpp"

namespace mammopos {

// ---------------------------------------------------------------------------
// Sidecar metadata ("<image>.meta", key = value lines)
// ---------------------------------------------------------------------------

struct SidecarMeta {
    std::optional<double> spacing_mm_per_px;
    std::optional<Laterality> laterality;
    std::optional<ViewKind> view;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

inline std::filesystem::path sidecar_path(const std::filesystem::path& image_path) {
    std::filesystem::path p = image_path;
    p += ".meta";
    return p;
}

inline SidecarMeta read_sidecar(const std::filesystem::path& image_path) {
    SidecarMeta meta;
    const auto path = sidecar_path(image_path);
    std::ifstream in(path);
    if (!in) return meta;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        if (key == "spacing_mm_per_px") {
            try {
                const double v = std::stod(value);
                if (!(v > 0.0)) throw ValidationError("sidecar spacing_mm_per_px must be > 0: " + path.string());
                meta.spacing_mm_per_px = v;
            } catch (const std::invalid_argument&) {
                throw ValidationError("sidecar spacing_mm_per_px is not a number: " + path.string());
            }
        } else if (key == "laterality") {
            meta.laterality = parse_laterality(value);
            if (!meta.laterality) throw ValidationError("sidecar laterality must be L or R: " + path.string());
        } else if (key == "view") {
            meta.view = parse_view(value);
            if (!meta.view) throw ValidationError("sidecar view must be MLO or CC: " + path.string());
        }
        // unknown keys are permitted and skipped
    }
    return meta;
}

inline void write_sidecar(const std::filesystem::path& image_path, const SidecarMeta& meta) {
    std::ofstream out(sidecar_path(image_path), std::ios::trunc);
    if (!out) throw IoError("cannot write sidecar for " + image_path.string());
    if (meta.spacing_mm_per_px) out << "spacing_mm_per_px = " << format_double(*meta.spacing_mm_per_px) << "\n";
    if (meta.laterality) out << "laterality = " << to_string(*meta.laterality) << "\n";
    if (meta.view) out << "view = " << to_string(*meta.view) << "\n";
}

// ---------------------------------------------------------------------------
// PGM (P5 binary / P2 ascii, maxval up to 65535)
// ---------------------------------------------------------------------------

namespace detail {

inline int pgm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (!std::isspace(c)) break;
    }
    if (c == EOF) return 0;
    tok.push_back(static_cast<char>(c));
    while ((c = in.get()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(c));
    return 1;
}

inline GrayImage load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic, tok;
    if (!pgm_next_token(in, magic) || (magic != "P5" && magic != "P2"))
        throw FormatError(FormatError::Kind::Malformed, "not a PGM file: " + path.string());
    long w = 0, h = 0, maxval = 0;
    for (long* field : {&w, &h, &maxval}) {
        if (!pgm_next_token(in, tok))
            throw FormatError(FormatError::Kind::Malformed, "truncated PGM header: " + path.string());
        try {
            *field = std::stol(tok);
        } catch (...) {
            throw FormatError(FormatError::Kind::Malformed, "bad PGM header field: " + path.string());
        }
    }
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
        throw FormatError(FormatError::Kind::Malformed, "bad PGM dimensions: " + path.string());
    const int depth = maxval > 255 ? 16 : 8;
    GrayImage img = GrayImage::make(static_cast<int>(w), static_cast<int>(h), depth);
    const std::size_t n = img.size();
    if (magic == "P2") {
        for (std::size_t i = 0; i < n; ++i) {
            if (!pgm_next_token(in, tok))
                throw FormatError(FormatError::Kind::Malformed, "truncated PGM data: " + path.string());
            img.pixels[i] = static_cast<float>(std::stol(tok));
        }
    } else {
        // single whitespace byte after maxval, already consumed by tokenizer
        if (depth == 8) {
            std::vector<unsigned char> raw(n);
            in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
            if (static_cast<std::size_t>(in.gcount()) != n)
                throw FormatError(FormatError::Kind::Malformed, "truncated PGM data: " + path.string());
            for (std::size_t i = 0; i < n; ++i) img.pixels[i] = raw[i];
        } else {
            std::vector<unsigned char> raw(n * 2);
            in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
            if (static_cast<std::size_t>(in.gcount()) != raw.size())
                throw FormatError(FormatError::Kind::Malformed, "truncated PGM data: " + path.string());
            for (std::size_t i = 0; i < n; ++i)
                img.pixels[i] = static_cast<float>((raw[2 * i] << 8) | raw[2 * i + 1]);  // big-endian per spec
        }
    }
    return img;
}

inline void save_pgm(const std::filesystem::path& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    const int maxval = img.bit_depth == 16 ? 65535 : 255;
    out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
    const std::size_t n = img.size();
    if (img.bit_depth == 8) {
        std::vector<unsigned char> raw(n);
        for (std::size_t i = 0; i < n; ++i)
            raw[i] = static_cast<unsigned char>(std::clamp(std::lround(img.pixels[i]), 0L, 255L));
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(n));
    } else {
        std::vector<unsigned char> raw(n * 2);
        for (std::size_t i = 0; i < n; ++i) {
            const long v = std::clamp(std::lround(img.pixels[i]), 0L, 65535L);
            raw[2 * i] = static_cast<unsigned char>(v >> 8);
            raw[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
        }
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// PNG (grayscale, 8/16-bit) via libpng
// ---------------------------------------------------------------------------

struct PngReadCtx {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngReadCtx() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriteCtx {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngWriteCtx() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

inline GrayImage load_png(const std::filesystem::path& path) {
    PngReadCtx ctx;
    ctx.fp = std::fopen(path.string().c_str(), "rb");
    if (!ctx.fp) throw IoError("cannot open " + path.string());

    unsigned char header[8];
    if (std::fread(header, 1, 8, ctx.fp) != 8 || png_sig_cmp(header, 0, 8))
        throw FormatError(FormatError::Kind::Malformed, "not a PNG file: " + path.string());

    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw Error("libpng init failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw Error("libpng init failed");

    if (setjmp(png_jmpbuf(ctx.png)))
        throw FormatError(FormatError::Kind::Malformed, "corrupt or truncated PNG: " + path.string());

    png_init_io(ctx.png, ctx.fp);
    png_set_sig_bytes(ctx.png, 8);
    png_read_info(ctx.png, ctx.info);

    const png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
    const png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
    const int color = png_get_color_type(ctx.png, ctx.info);
    int depth = png_get_bit_depth(ctx.png, ctx.info);

    if (color != PNG_COLOR_TYPE_GRAY)
        throw FormatError(FormatError::Kind::ColorUnsupported,
                          "PNG is not single-channel grayscale: " + path.string());
    if (depth < 8) {
        png_set_expand_gray_1_2_4_to_8(ctx.png);
        depth = 8;
    }
    if (depth != 8 && depth != 16)
        throw FormatError(FormatError::Kind::DepthUnsupported, "unsupported PNG bit depth: " + path.string());
    if (png_get_interlace_type(ctx.png, ctx.info) != PNG_INTERLACE_NONE)
        png_set_interlace_handling(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    GrayImage img = GrayImage::make(static_cast<int>(w), static_cast<int>(h), depth);
    const std::size_t stride = png_get_rowbytes(ctx.png, ctx.info);
    std::vector<unsigned char> raw(stride * h);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * stride;
    png_read_image(ctx.png, rows.data());
    png_read_end(ctx.png, nullptr);

    for (png_uint_32 y = 0; y < h; ++y) {
        const unsigned char* row = rows[y];
        for (png_uint_32 x = 0; x < w; ++x) {
            const float v = depth == 8 ? static_cast<float>(row[x])
                                       : static_cast<float>((row[2 * x] << 8) | row[2 * x + 1]);
            img.at(static_cast<int>(x), static_cast<int>(y)) = v;
        }
    }
    return img;
}

inline void save_png(const std::filesystem::path& path, const GrayImage& img) {
    PngWriteCtx ctx;
    ctx.fp = std::fopen(path.string().c_str(), "wb");
    if (!ctx.fp) throw IoError("cannot write " + path.string());
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw Error("libpng init failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw Error("libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw IoError("PNG write failed: " + path.string());

    png_init_io(ctx.png, ctx.fp);
    png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), img.bit_depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);

    const std::size_t stride = static_cast<std::size_t>(img.width) * (img.bit_depth / 8);
    std::vector<unsigned char> row(stride);
    for (int y = 0; y < img.height; ++y) {
        if (img.bit_depth == 8) {
            for (int x = 0; x < img.width; ++x)
                row[x] = static_cast<unsigned char>(std::clamp(std::lround(img.at(x, y)), 0L, 255L));
        } else {
            for (int x = 0; x < img.width; ++x) {
                const long v = std::clamp(std::lround(img.at(x, y)), 0L, 65535L);
                row[2 * x] = static_cast<unsigned char>(v >> 8);
                row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
            }
        }
        png_write_row(ctx.png, row.data());
    }
    png_write_end(ctx.png, nullptr);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

/// Load an 8/16-bit grayscale PNG or PGM. Pixel values are preserved exactly
/// at source depth; spacing is filled in from "<path>.meta" when present.
inline GrayImage load_image(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open " + path.string());
    char magic[2] = {0, 0};
    probe.read(magic, 2);
    probe.close();

    GrayImage img;
    if (magic[0] == '\x89' && magic[1] == 'P') {
        img = detail::load_png(path);
    } else if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '2')) {
        img = detail::load_pgm(path);
    } else {
        throw FormatError(FormatError::Kind::UnknownFormat, "unrecognized image format: " + path.string());
    }
    img.spacing_mm_per_px = read_sidecar(path).spacing_mm_per_px;
    return img;
}

/// Save by extension (.png or .pgm). Values are rounded and clamped to the
/// image's bit depth.
inline void save_image(const std::filesystem::path& path, const GrayImage& img) {
    if (img.empty()) throw ContractError("save_image: empty image");
    const auto ext = path.extension().string();
    if (ext == ".png") {
        detail::save_png(path, img);
    } else if (ext == ".pgm") {
        detail::save_pgm(path, img);
    } else {
        throw ContractError("save_image: unsupported extension " + ext);
    }
}

}  // namespace mammopos
