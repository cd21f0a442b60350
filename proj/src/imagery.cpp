#include "hsi/imagery.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <csetjmp>
#include <jpeglib.h>
#include <png.h>

namespace hsi::imagery {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return e;
}

enum class Format { png, jpeg, pnm, unknown };

Format format_of(const fs::path& p) {
    std::string e = lower_ext(p);
    if (e == ".png") return Format::png;
    if (e == ".jpg" || e == ".jpeg") return Format::jpeg;
    if (e == ".pgm" || e == ".ppm" || e == ".pnm") return Format::pnm;
    return Format::unknown;
}

struct Raster {
    int rows = 0, cols = 0, channels = 0; // channels 1 or 3
    std::vector<float> data;              // interleaved, [0,255]
};

// ---- PNM (PGM/PPM, binary and ascii, 8/16-bit) ----

int pnm_token(std::FILE* f) {
    int c;
    for (;;) {
        c = std::fgetc(f);
        if (c == '#') {
            while (c != '\n' && c != EOF) c = std::fgetc(f);
        } else if (!std::isspace(c)) {
            break;
        }
    }
    if (c == EOF) return -1;
    int v = 0;
    while (std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = std::fgetc(f);
    }
    return v;
}

Raster load_pnm(const fs::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) raise(ErrorKind::decode, "cannot open " + path.string());
    char magic[3] = {0, 0, 0};
    if (std::fread(magic, 1, 2, f) != 2 || magic[0] != 'P') {
        std::fclose(f);
        raise(ErrorKind::decode, "not a PNM file: " + path.string());
    }
    int kind = magic[1] - '0'; // 2,3 ascii; 5,6 binary
    bool color = (kind == 3 || kind == 6);
    bool binary = (kind == 5 || kind == 6);
    if (kind != 2 && kind != 3 && kind != 5 && kind != 6) {
        std::fclose(f);
        raise(ErrorKind::decode, "unsupported PNM variant in " + path.string());
    }
    int w = pnm_token(f), h = pnm_token(f), maxval = pnm_token(f);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
        std::fclose(f);
        raise(ErrorKind::invalid_input, "bad PNM header in " + path.string());
    }
    Raster r;
    r.rows = h;
    r.cols = w;
    r.channels = color ? 3 : 1;
    size_t n = size_t(w) * h * r.channels;
    r.data.resize(n);
    double scale = 255.0 / maxval;
    if (binary) {
        if (maxval < 256) {
            std::vector<uint8_t> buf(n);
            if (std::fread(buf.data(), 1, n, f) != n) {
                std::fclose(f);
                raise(ErrorKind::decode, "truncated PNM data in " + path.string());
            }
            for (size_t i = 0; i < n; ++i) r.data[i] = float(buf[i] * scale);
        } else {
            std::vector<uint8_t> buf(n * 2);
            if (std::fread(buf.data(), 1, n * 2, f) != n * 2) {
                std::fclose(f);
                raise(ErrorKind::decode, "truncated PNM data in " + path.string());
            }
            for (size_t i = 0; i < n; ++i) { // big-endian per netpbm
                unsigned v = (unsigned(buf[2 * i]) << 8) | buf[2 * i + 1];
                r.data[i] = float(v * scale);
            }
        }
    } else {
        for (size_t i = 0; i < n; ++i) {
            int v = pnm_token(f);
            if (v < 0) {
                std::fclose(f);
                raise(ErrorKind::decode, "truncated PNM data in " + path.string());
            }
            r.data[i] = float(v * scale);
        }
    }
    std::fclose(f);
    return r;
}

std::pair<int, int> peek_pnm(const fs::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) raise(ErrorKind::decode, "cannot open " + path.string());
    char magic[2];
    if (std::fread(magic, 1, 2, f) != 2 || magic[0] != 'P') {
        std::fclose(f);
        raise(ErrorKind::decode, "not a PNM file: " + path.string());
    }
    int w = pnm_token(f), h = pnm_token(f);
    std::fclose(f);
    if (w <= 0 || h <= 0)
        raise(ErrorKind::invalid_input, "bad PNM header in " + path.string());
    return {h, w};
}

// ---- PNG ----

Raster load_png(const fs::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) raise(ErrorKind::decode, "cannot open " + path.string());
    png_structp pp = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = pp ? png_create_info_struct(pp) : nullptr;
    if (!pp || !info) {
        if (pp) png_destroy_read_struct(&pp, info ? &info : nullptr, nullptr);
        std::fclose(f);
        raise(ErrorKind::decode, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(pp))) {
        png_destroy_read_struct(&pp, &info, nullptr);
        std::fclose(f);
        raise(ErrorKind::decode, "PNG decode error in " + path.string());
    }
    png_init_io(pp, f);
    png_read_info(pp, info);

    png_uint_32 w, h;
    int bit_depth, color_type;
    png_get_IHDR(pp, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (w == 0 || h == 0) {
        png_destroy_read_struct(&pp, &info, nullptr);
        std::fclose(f);
        raise(ErrorKind::invalid_input, "zero-dimension PNG " + path.string());
    }

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(pp);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(pp);
    if (png_get_valid(pp, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(pp);
    png_set_strip_alpha(pp);
    if (bit_depth == 16) png_set_swap(pp); // to little-endian for direct u16 reads
    png_set_interlace_handling(pp);
    png_read_update_info(pp, info);

    int channels = png_get_channels(pp, info);
    bit_depth = png_get_bit_depth(pp, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&pp, &info, nullptr);
        std::fclose(f);
        raise(ErrorKind::decode, "unsupported PNG channel count in " + path.string());
    }

    size_t rowbytes = png_get_rowbytes(pp, info);
    std::vector<uint8_t> buf(rowbytes * h);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
    png_read_image(pp, rows.data());
    png_destroy_read_struct(&pp, &info, nullptr);
    std::fclose(f);

    Raster r;
    r.rows = int(h);
    r.cols = int(w);
    r.channels = channels;
    size_t n = size_t(w) * h * channels;
    r.data.resize(n);
    if (bit_depth == 16) {
        const uint16_t* s = reinterpret_cast<const uint16_t*>(buf.data());
        for (size_t i = 0; i < n; ++i) r.data[i] = float(s[i] * (255.0 / 65535.0));
    } else {
        for (size_t i = 0; i < n; ++i) r.data[i] = float(buf[i]);
    }
    return r;
}

std::pair<int, int> peek_png(const fs::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) raise(ErrorKind::decode, "cannot open " + path.string());
    png_structp pp = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = pp ? png_create_info_struct(pp) : nullptr;
    if (!pp || !info) {
        if (pp) png_destroy_read_struct(&pp, info ? &info : nullptr, nullptr);
        std::fclose(f);
        raise(ErrorKind::decode, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(pp))) {
        png_destroy_read_struct(&pp, &info, nullptr);
        std::fclose(f);
        raise(ErrorKind::decode, "PNG header error in " + path.string());
    }
    png_init_io(pp, f);
    png_read_info(pp, info);
    png_uint_32 w, h;
    int bd, ct;
    png_get_IHDR(pp, info, &w, &h, &bd, &ct, nullptr, nullptr, nullptr);
    png_destroy_read_struct(&pp, &info, nullptr);
    std::fclose(f);
    return {int(h), int(w)};
}

// ---- JPEG ----

struct JpegErr {
    jpeg_error_mgr mgr;
    std::jmp_buf jb;
};

void jpeg_err_exit(j_common_ptr cinfo) {
    JpegErr* e = reinterpret_cast<JpegErr*>(cinfo->err);
    longjmp(e->jb, 1);
}

Raster load_jpeg(const fs::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) raise(ErrorKind::decode, "cannot open " + path.string());
    jpeg_decompress_struct cinfo;
    JpegErr jerr;
    cinfo.err = jpeg_std_error(&jerr.mgr);
    jerr.mgr.error_exit = jpeg_err_exit;
    if (setjmp(jerr.jb)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(f);
        raise(ErrorKind::decode, "JPEG decode error in " + path.string());
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = (cinfo.num_components == 1) ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    Raster r;
    r.rows = int(cinfo.output_height);
    r.cols = int(cinfo.output_width);
    r.channels = cinfo.output_components;
    if (r.rows == 0 || r.cols == 0 || (r.channels != 1 && r.channels != 3)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(f);
        raise(ErrorKind::decode, "unsupported JPEG layout in " + path.string());
    }
    r.data.resize(size_t(r.rows) * r.cols * r.channels);
    std::vector<uint8_t> row(size_t(r.cols) * r.channels);
    uint8_t* rowp = row.data();
    while (cinfo.output_scanline < cinfo.output_height) {
        int y = int(cinfo.output_scanline);
        jpeg_read_scanlines(&cinfo, &rowp, 1);
        float* dst = r.data.data() + size_t(y) * r.cols * r.channels;
        for (size_t i = 0; i < row.size(); ++i) dst[i] = float(row[i]);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    return r;
}

std::pair<int, int> peek_jpeg(const fs::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) raise(ErrorKind::decode, "cannot open " + path.string());
    jpeg_decompress_struct cinfo;
    JpegErr jerr;
    cinfo.err = jpeg_std_error(&jerr.mgr);
    jerr.mgr.error_exit = jpeg_err_exit;
    if (setjmp(jerr.jb)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(f);
        raise(ErrorKind::decode, "JPEG header error in " + path.string());
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    int h = int(cinfo.image_height), w = int(cinfo.image_width);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    return {h, w};
}

Raster load_raster(const fs::path& path) {
    if (!fs::exists(path))
        raise(ErrorKind::decode, "no such file: " + path.string());
    switch (format_of(path)) {
    case Format::png: return load_png(path);
    case Format::jpeg: return load_jpeg(path);
    case Format::pnm: return load_pnm(path);
    default: raise(ErrorKind::decode, "unsupported raster format: " + path.string());
    }
}

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

} // namespace

bool is_supported_raster(const fs::path& p) {
    return format_of(p) != Format::unknown;
}

Plane load_luma(const fs::path& path) {
    Raster r = load_raster(path);
    if (r.rows <= 0 || r.cols <= 0)
        raise(ErrorKind::invalid_input, "zero-dimension image " + path.string());
    Plane out(r.rows, r.cols);
    if (r.channels == 1) {
        std::copy(r.data.begin(), r.data.end(), out.data.begin());
    } else {
        const float* s = r.data.data();
        for (size_t i = 0; i < out.size(); ++i, s += 3)
            out.data[i] = float(kLumaR * s[0] + kLumaG * s[1] + kLumaB * s[2]);
    }
    return out;
}

std::vector<Plane> load_channels(const fs::path& path) {
    Raster r = load_raster(path);
    std::vector<Plane> out;
    out.reserve(r.channels);
    for (int c = 0; c < r.channels; ++c) {
        Plane p(r.rows, r.cols);
        const float* s = r.data.data() + c;
        for (size_t i = 0; i < p.size(); ++i, s += r.channels) p.data[i] = *s;
        out.push_back(std::move(p));
    }
    return out;
}

std::pair<int, int> peek_dims(const fs::path& path) {
    if (!fs::exists(path))
        raise(ErrorKind::decode, "no such file: " + path.string());
    switch (format_of(path)) {
    case Format::png: return peek_png(path);
    case Format::jpeg: return peek_jpeg(path);
    case Format::pnm: return peek_pnm(path);
    default: raise(ErrorKind::decode, "unsupported raster format: " + path.string());
    }
}

Plane saturation_mask(const Plane& img, double threshold) {
    if (!(threshold > 0.0 && threshold <= 255.0))
        raise(ErrorKind::invalid_input, "saturation threshold must lie in (0,255]");
    Plane m(img.rows, img.cols);
    for (size_t i = 0; i < img.size(); ++i)
        m.data[i] = img.data[i] >= float(threshold) ? 0.0f : 1.0f;
    return m;
}

void save_pgm16(const Plane& p, const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) raise(ErrorKind::io, "cannot write " + path.string());
    f << "P5\n" << p.cols << " " << p.rows << "\n65535\n";
    std::vector<uint8_t> row(size_t(p.cols) * 2);
    for (int r = 0; r < p.rows; ++r) {
        for (int c = 0; c < p.cols; ++c) {
            double v = p.at(r, c) * 257.0; // 255 -> 65535
            long q = std::lround(std::min(65535.0, std::max(0.0, v)));
            row[2 * c] = uint8_t(q >> 8);
            row[2 * c + 1] = uint8_t(q & 0xff);
        }
        f.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
    if (!f) raise(ErrorKind::io, "short write to " + path.string());
}

void save_pgm8(const Plane& p, const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) raise(ErrorKind::io, "cannot write " + path.string());
    f << "P5\n" << p.cols << " " << p.rows << "\n255\n";
    std::vector<uint8_t> row(size_t(p.cols));
    for (int r = 0; r < p.rows; ++r) {
        for (int c = 0; c < p.cols; ++c) {
            long q = std::lround(std::min(255.0, std::max(0.0, double(p.at(r, c)))));
            row[c] = uint8_t(q);
        }
        f.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
    if (!f) raise(ErrorKind::io, "short write to " + path.string());
}

namespace {

void save_png_impl(const std::vector<const Plane*>& ch, const fs::path& path) {
    const Plane& p0 = *ch[0];
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) raise(ErrorKind::io, "cannot write " + path.string());
    png_structp pp = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = pp ? png_create_info_struct(pp) : nullptr;
    if (!pp || !info) {
        if (pp) png_destroy_write_struct(&pp, info ? &info : nullptr);
        std::fclose(f);
        raise(ErrorKind::io, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(pp))) {
        png_destroy_write_struct(&pp, &info);
        std::fclose(f);
        raise(ErrorKind::io, "PNG encode error for " + path.string());
    }
    png_init_io(pp, f);
    int color = ch.size() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(pp, info, p0.cols, p0.rows, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(pp, info);
    std::vector<uint8_t> row(size_t(p0.cols) * ch.size());
    for (int r = 0; r < p0.rows; ++r) {
        for (int c = 0; c < p0.cols; ++c)
            for (size_t k = 0; k < ch.size(); ++k) {
                long q = std::lround(std::min(255.0, std::max(0.0, double(ch[k]->at(r, c)))));
                row[c * ch.size() + k] = uint8_t(q);
            }
        png_write_row(pp, row.data());
    }
    png_write_end(pp, nullptr);
    png_destroy_write_struct(&pp, &info);
    std::fclose(f);
}

} // namespace

void save_png_gray8(const Plane& p, const fs::path& path) {
    save_png_impl({&p}, path);
}

void save_png_rgb8(const Plane& r, const Plane& g, const Plane& b, const fs::path& path) {
    if (!r.same_dims(g) || !r.same_dims(b))
        raise(ErrorKind::invalid_input, "save_png_rgb8: channel dims differ");
    save_png_impl({&r, &g, &b}, path);
}

FrameSequence FrameSequence::from_directory(const fs::path& dir) {
    if (!fs::is_directory(dir))
        raise(ErrorKind::no_frames, "not a directory: " + dir.string());
    FrameSequence seq;
    seq.dir_ = dir;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_supported_raster(e.path()))
            seq.files_.push_back(e.path());
    if (seq.files_.empty())
        raise(ErrorKind::no_frames, "no supported raster files in " + dir.string());
    std::sort(seq.files_.begin(), seq.files_.end(),
              [](const fs::path& a, const fs::path& b) {
                  return a.filename().string() < b.filename().string();
              });
    auto [r0, c0] = peek_dims(seq.files_[0]);
    for (size_t i = 1; i < seq.files_.size(); ++i) {
        auto [r, c] = peek_dims(seq.files_[i]);
        if (r != r0 || c != c0)
            raise(ErrorKind::inconsistent_sequence,
                  "frame dimension mismatch: " + seq.files_[i].filename().string() + " is " +
                      std::to_string(c) + "x" + std::to_string(r) + ", expected " +
                      std::to_string(c0) + "x" + std::to_string(r0));
    }
    seq.rows_ = r0;
    seq.cols_ = c0;
    return seq;
}

FrameSequence FrameSequence::from_planes(std::vector<Plane> planes) {
    if (planes.empty())
        raise(ErrorKind::no_frames, "empty plane list");
    for (const auto& p : planes)
        if (!p.same_dims(planes[0]))
            raise(ErrorKind::inconsistent_sequence, "frame dimension mismatch in plane list");
    FrameSequence seq;
    seq.rows_ = planes[0].rows;
    seq.cols_ = planes[0].cols;
    seq.planes_ = std::make_shared<const std::vector<Plane>>(std::move(planes));
    return seq;
}

int FrameSequence::count() const {
    return planes_ ? int(planes_->size()) : int(files_.size());
}

Plane FrameSequence::frame(int index) const {
    if (index < 0 || index >= count())
        raise(ErrorKind::invalid_input, "frame index out of range");
    if (planes_) return (*planes_)[size_t(index)];
    return load_luma(files_[size_t(index)]);
}

std::string FrameSequence::frame_name(int index) const {
    if (planes_) return "frame_" + std::to_string(index);
    return files_[size_t(index)].filename().string();
}

} // namespace hsi::imagery
