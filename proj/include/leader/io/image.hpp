#pragma once

// 8-bit grayscale images (binary PGM, PNG), RGB PNG output and single-channel
// PFM for lossless float maps.

#include <leader/io/errors.hpp>
#include <leader/io/files.hpp>
#include <leader/tensor.hpp>

#include <png.h>

#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

namespace leader::io {

inline std::uint8_t quantize(float v) noexcept {
    if (!(v > 0.0f)) return 0;
    if (v >= 1.0f) return 255;
    return static_cast<std::uint8_t>(std::lround(v * 255.0f));
}

// ---------------------------------------------------------------------------
// PGM (P5)

namespace detail {

/// Next whitespace-separated header token, skipping '#' comments.
inline std::string pgm_token(const std::string& bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw TruncationError("PGM header ends early");
    return bytes.substr(start, pos - start);
}

inline std::size_t pgm_number(const std::string& bytes, std::size_t& pos, const char* what) {
    const std::string tok = pgm_token(bytes, pos);
    std::size_t used = 0;
    unsigned long v = 0;
    try {
        v = std::stoul(tok, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != tok.size()) throw FormatError(std::string("PGM ") + what + " is not a number: '" + tok + "'");
    return v;
}

}  // namespace detail

inline Tensor decode_pgm(const std::string& bytes) {
    if (bytes.size() < 2 || bytes.compare(0, 2, "P5") != 0) throw FormatError("not a binary PGM (P5) file");
    std::size_t pos = 2;
    const std::size_t w = detail::pgm_number(bytes, pos, "width");
    const std::size_t h = detail::pgm_number(bytes, pos, "height");
    const std::size_t maxval = detail::pgm_number(bytes, pos, "maxval");
    if (w == 0 || h == 0) throw FormatError("PGM has zero width or height");
    if (maxval != 255) throw FormatError("unsupported PGM maxval " + std::to_string(maxval) + " (need 8-bit, 255)");
    ++pos;  // single whitespace before the raster
    if (bytes.size() < pos + w * h) throw TruncationError("PGM raster is shorter than " + std::to_string(w * h) + " bytes");
    Tensor t(h, w, 1);
    for (std::size_t k = 0; k < w * h; ++k) t.data()[k] = static_cast<unsigned char>(bytes[pos + k]) / 255.0f;
    return t;
}

inline std::string encode_pgm(const Tensor& t) {
    if (t.channels() != 1) throw StructuralError("PGM output needs a single-channel tensor");
    std::string out = "P5\n" + std::to_string(t.width()) + " " + std::to_string(t.height()) + "\n255\n";
    for (float v : t.values()) out.push_back(static_cast<char>(quantize(v)));
    return out;
}

// ---------------------------------------------------------------------------
// PNG

namespace detail {

// libpng reports errors through longjmp; the state lives on the heap so it
// stays valid across the jump.
struct PngState {
    const std::string* input = nullptr;
    std::size_t pos = 0;
    std::string* output = nullptr;
    std::string error;
    bool truncated = false;
};

inline void png_on_error(png_structp png, png_const_charp msg) {
    static_cast<PngState*>(png_get_error_ptr(png))->error = msg;
    std::longjmp(png_jmpbuf(png), 1);
}

inline void png_on_warning(png_structp, png_const_charp) {}

inline void png_on_read(png_structp png, png_bytep out, png_size_t n) {
    auto* s = static_cast<PngState*>(png_get_io_ptr(png));
    if (s->pos + n > s->input->size()) {
        s->truncated = true;
        png_error(png, "data ends early");
    }
    std::memcpy(out, s->input->data() + s->pos, n);
    s->pos += n;
}

inline void png_on_write(png_structp png, png_bytep data, png_size_t n) {
    static_cast<PngState*>(png_get_io_ptr(png))->output->append(reinterpret_cast<const char*>(data), n);
}

inline const char* png_color_name(int color) {
    switch (color) {
        case PNG_COLOR_TYPE_GRAY: return "gray";
        case PNG_COLOR_TYPE_RGB: return "RGB";
        case PNG_COLOR_TYPE_RGB_ALPHA: return "RGBA";
        case PNG_COLOR_TYPE_PALETTE: return "palette";
        case PNG_COLOR_TYPE_GRAY_ALPHA: return "gray+alpha";
        default: return "unknown";
    }
}

}  // namespace detail

inline bool is_png(const std::string& bytes) {
    return bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0;
}

/// 8-bit single-channel PNG only; other bit depths and colour types are rejected.
inline Tensor decode_png(const std::string& bytes) {
    if (!is_png(bytes)) throw FormatError("not a PNG file");
    const auto state = std::make_unique<detail::PngState>();
    state->input = &bytes;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, state.get(), detail::png_on_error, detail::png_on_warning);
    if (!png) throw FormatError("PNG: cannot create reader");
    png_infop info = png_create_info_struct(png);
    const auto raster = std::make_unique<std::vector<png_byte>>();
    const auto rows = std::make_unique<std::vector<png_bytep>>();
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        if (state->truncated) throw TruncationError("PNG data ends early");
        throw FormatError("PNG: " + state->error);
    }
    png_set_read_fn(png, state.get(), detail::png_on_read);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        if (color != PNG_COLOR_TYPE_GRAY) {
            throw FormatError(std::string("unsupported PNG colour type ") + detail::png_color_name(color) +
                              " (need single-channel gray)");
        }
        throw FormatError("unsupported PNG bit depth " + std::to_string(depth) + " (need 8)");
    }
    if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
    png_read_update_info(png, info);
    raster->resize(static_cast<std::size_t>(w) * h);
    rows->resize(h);
    for (png_uint_32 i = 0; i < h; ++i) (*rows)[i] = raster->data() + static_cast<std::size_t>(i) * w;
    png_read_image(png, rows->data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    Tensor t(h, w, 1);
    for (std::size_t k = 0; k < raster->size(); ++k) t.data()[k] = (*raster)[k] / 255.0f;
    return t;
}

/// Gray (1 channel) or RGB (3 channel) 8-bit PNG.
inline std::string encode_png(const Tensor& t) {
    if (t.channels() != 1 && t.channels() != 3) throw StructuralError("PNG output needs 1 or 3 channels");
    const auto out = std::make_unique<std::string>();
    const auto state = std::make_unique<detail::PngState>();
    state->output = out.get();
    const auto row = std::make_unique<std::vector<png_byte>>(t.width() * t.channels());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, state.get(), detail::png_on_error, detail::png_on_warning);
    if (!png) throw FormatError("PNG: cannot create writer");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("PNG: " + state->error);
    }
    png_set_write_fn(png, state.get(), detail::png_on_write, nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(t.width()), static_cast<png_uint_32>(t.height()), 8,
                 t.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t i = 0; i < t.height(); ++i) {
        const float* src = t.data() + i * row->size();
        for (std::size_t k = 0; k < row->size(); ++k) (*row)[k] = quantize(src[k]);
        png_write_row(png, row->data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return *out;
}

// ---------------------------------------------------------------------------
// PFM (single channel "Pf", little-endian, rows stored bottom-up)

inline std::string encode_pfm(const Tensor& t) {
    if (t.channels() != 1) throw StructuralError("PFM output needs a single-channel tensor");
    std::string out = "Pf\n" + std::to_string(t.width()) + " " + std::to_string(t.height()) + "\n-1.0\n";
    const std::size_t header = out.size();
    out.resize(header + t.size() * 4);
    for (std::size_t i = 0; i < t.height(); ++i) {
        const std::size_t src_row = t.height() - 1 - i;
        for (std::size_t j = 0; j < t.width(); ++j) {
            const auto bits = std::bit_cast<std::uint32_t>(t.at(src_row, j));
            char* dst = out.data() + header + (i * t.width() + j) * 4;
            for (int b = 0; b < 4; ++b) dst[b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
        }
    }
    return out;
}

inline Tensor decode_pfm(const std::string& bytes) {
    if (bytes.size() < 2 || bytes.compare(0, 2, "Pf") != 0) {
        throw FormatError(bytes.compare(0, 2, "PF") == 0 ? "colour PFM not supported (need single-channel Pf)"
                                                          : "not a PFM file");
    }
    std::size_t pos = 2;
    const std::size_t w = detail::pgm_number(bytes, pos, "width");
    const std::size_t h = detail::pgm_number(bytes, pos, "height");
    const std::string scale_tok = detail::pgm_token(bytes, pos);
    double scale = 0.0;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::exception&) {
        throw FormatError("PFM scale is not a number: '" + scale_tok + "'");
    }
    if (scale == 0.0) throw FormatError("PFM scale must be non-zero");
    const bool little = scale < 0.0;
    ++pos;
    if (w == 0 || h == 0) throw FormatError("PFM has zero width or height");
    if (bytes.size() < pos + w * h * 4) throw TruncationError("PFM raster is shorter than declared");
    Tensor t(h, w, 1);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + pos + (i * w + j) * 4);
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(src[little ? b : 3 - b]) << (8 * b);
            t.at(h - 1 - i, j) = std::bit_cast<float>(bits);
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Files

/// Grayscale image scaled to [0, 1]; PGM and PNG are told apart by content.
/// PFM files are returned unscaled.
inline Tensor load_image(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    try {
        if (is_png(bytes)) return decode_png(bytes);
        if (bytes.compare(0, 2, "P5") == 0) return decode_pgm(bytes);
        if (bytes.compare(0, 2, "Pf") == 0 || bytes.compare(0, 2, "PF") == 0) return decode_pfm(bytes);
        if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] >= '1' && bytes[1] <= '6') {
            throw FormatError("unsupported PNM variant P" + std::string(1, bytes[1]) + " (need binary gray P5)");
        }
        throw FormatError("unrecognized image format");
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

/// Format chosen by extension: .png, .pgm or .pfm.
inline void save_image(const std::filesystem::path& path, const Tensor& t) {
    const std::string ext = path.extension().string();
    if (ext == ".png") {
        write_file_atomic(path, encode_png(t));
    } else if (ext == ".pgm") {
        write_file_atomic(path, encode_pgm(t));
    } else if (ext == ".pfm") {
        write_file_atomic(path, encode_pfm(t));
    } else {
        throw FormatError("cannot infer image format from extension '" + ext + "' (use .png, .pgm or .pfm)");
    }
}

}  // namespace leader::io
