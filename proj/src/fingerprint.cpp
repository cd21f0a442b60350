#include "hsi/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "hsi/fft.hpp"
#include "hsi/parallel.hpp"

namespace hsi::fingerprint {

using nlohmann::json;

std::string source_kind_name(SourceKind k) {
    switch (k) {
    case SourceKind::still_images: return "still-images";
    case SourceKind::video_frames: return "video-frames";
    case SourceKind::registered_frames: return "registered-frames";
    }
    return "unknown";
}

void accumulate(Accumulator& acc, const Plane& img, const Plane& residual,
                const Plane* mask) {
    if (acc.count == 0 && acc.rows == 0) {
        acc = Accumulator(img.rows, img.cols);
    }
    if (img.rows != acc.rows || img.cols != acc.cols || !img.same_dims(residual) ||
        (mask && !mask->same_dims(img)))
        raise(ErrorKind::invalid_input, "accumulate: dimension mismatch");
    size_t n = img.size();
    for (size_t i = 0; i < n; ++i) {
        double m = mask ? double(mask->data[i]) : 1.0;
        double iv = img.data[i];
        acc.numerator[i] += m * double(residual.data[i]) * iv;
        acc.denominator[i] += m * iv * iv;
    }
    acc.count += 1;
}

void merge(Accumulator& into, const Accumulator& other) {
    if (other.empty()) return;
    if (into.empty() && into.rows == 0) {
        into = other;
        return;
    }
    if (into.rows != other.rows || into.cols != other.cols)
        raise(ErrorKind::invalid_input, "merge: dimension mismatch");
    for (size_t i = 0; i < into.numerator.size(); ++i) {
        into.numerator[i] += other.numerator[i];
        into.denominator[i] += other.denominator[i];
    }
    into.count += other.count;
}

Fingerprint finalize(const Accumulator& acc, double eps, SourceKind kind,
                     const denoise::DenoiseConfig& cfg) {
    if (acc.empty())
        raise(ErrorKind::empty_accumulator, "finalize: no accumulated frames");
    Fingerprint fp;
    fp.plane = Plane(acc.rows, acc.cols);
    for (size_t i = 0; i < fp.plane.size(); ++i)
        fp.plane.data[i] = float(acc.numerator[i] / (acc.denominator[i] + eps));
    fp.num_inputs = acc.count;
    fp.source_kind = kind;
    fp.denoise_cfg = cfg;
    return fp;
}

Fingerprint whiten(const Fingerprint& fp) {
    const Plane& p = fp.plane;
    if (p.rows < 16 || p.cols < 16)
        raise(ErrorKind::invalid_input, "whiten: plane must be at least 16x16");
    Fingerprint out = fp;
    out.postprocess |= kPostWhitened;

    bool all_zero = true;
    for (float v : p.data)
        if (v != 0.0f) { all_zero = false; break; }
    if (all_zero) {
        out.postprocess |= kPostDegenerate;
        return out;
    }

    int R = p.rows, C = p.cols;
    std::vector<double> w(p.size());
    for (size_t i = 0; i < p.size(); ++i) w[i] = p.data[i];

    // zero-mean each row, then each column
    for (int r = 0; r < R; ++r) {
        double m = 0.0;
        for (int c = 0; c < C; ++c) m += w[size_t(r) * C + c];
        m /= C;
        for (int c = 0; c < C; ++c) w[size_t(r) * C + c] -= m;
    }
    for (int c = 0; c < C; ++c) {
        double m = 0.0;
        for (int r = 0; r < R; ++r) m += w[size_t(r) * C + c];
        m /= R;
        for (int r = 0; r < R; ++r) w[size_t(r) * C + c] -= m;
    }

    std::vector<std::complex<double>> f(p.size());
    for (size_t i = 0; i < p.size(); ++i) f[i] = w[i];
    fft::dft2d(f, R, C, false);

    // drop the u=0 / v=0 lines (row/col periodic structure) and flatten the
    // rest of the spectrum by its locally smoothed magnitude
    std::vector<double> mag(p.size());
    for (size_t i = 0; i < p.size(); ++i) mag[i] = std::abs(f[i]);
    for (int u = 0; u < R; ++u) { f[size_t(u) * C] = 0.0; mag[size_t(u) * C] = 0.0; }
    for (int v = 0; v < C; ++v) { f[size_t(v)] = 0.0; mag[size_t(v)] = 0.0; }

    constexpr int kHalf = 3; // 7x7 circular smoothing window
    std::vector<double> tmp(p.size()), sm(p.size());
    for (int u = 0; u < R; ++u)
        for (int v = 0; v < C; ++v) {
            double s = 0.0;
            for (int k = -kHalf; k <= kHalf; ++k) s += mag[size_t(u) * C + (v + k + C) % C];
            tmp[size_t(u) * C + v] = s;
        }
    for (int v = 0; v < C; ++v)
        for (int u = 0; u < R; ++u) {
            double s = 0.0;
            for (int k = -kHalf; k <= kHalf; ++k) s += tmp[size_t((u + k + R) % R) * C + v];
            sm[size_t(u) * C + v] = s / double((2 * kHalf + 1) * (2 * kHalf + 1));
        }

    for (size_t i = 0; i < p.size(); ++i) {
        double d = sm[i];
        f[i] = d > 0.0 ? f[i] / d : 0.0;
    }

    fft::dft2d(f, R, C, true);
    double mean = 0.0;
    for (size_t i = 0; i < p.size(); ++i) mean += f[i].real();
    mean /= double(p.size());
    double var = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        double d = f[i].real() - mean;
        var += d * d;
    }
    var /= double(p.size());
    if (var <= 0.0) {
        out.postprocess |= kPostDegenerate;
        std::fill(out.plane.data.begin(), out.plane.data.end(), 0.0f);
        return out;
    }
    double inv_sd = 1.0 / std::sqrt(var);
    for (size_t i = 0; i < p.size(); ++i)
        out.plane.data[i] = float((f[i].real() - mean) * inv_sd);
    return out;
}

namespace {

constexpr char kMagic[5] = {'H', 'S', 'I', 'F', 'P'};
constexpr uint8_t kVersion = 1;

void put_u16(std::string& b, uint16_t v) {
    b.push_back(char(v & 0xff));
    b.push_back(char(v >> 8));
}

void put_u32(std::string& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}

json denoise_cfg_to_json(const denoise::DenoiseConfig& c) {
    return {{"levels", c.levels},
            {"sigma0_sq", c.sigma0_sq},
            {"window_sizes", c.window_sizes},
            {"filter_kind", denoise::filter_kind_name(c.filter_kind)}};
}

denoise::DenoiseConfig denoise_cfg_from_json(const json& j) {
    denoise::DenoiseConfig c;
    c.levels = j.value("levels", c.levels);
    c.sigma0_sq = j.value("sigma0_sq", c.sigma0_sq);
    if (j.contains("window_sizes")) c.window_sizes = j["window_sizes"].get<std::vector<int>>();
    if (j.contains("filter_kind"))
        c.filter_kind = denoise::filter_kind_from_name(j["filter_kind"].get<std::string>());
    return c;
}

} // namespace

void save(const Fingerprint& fp, const std::filesystem::path& path) {
    json meta;
    meta["luma"] = "itu601";
    meta["denoise"] = denoise_cfg_to_json(fp.denoise_cfg);
    if (fp.geometry_note) {
        meta["geometry_note"] = {{"scale", fp.geometry_note->scale},
                                 {"rotation_deg", fp.geometry_note->rotation_deg},
                                 {"crop_x", fp.geometry_note->crop_x},
                                 {"crop_y", fp.geometry_note->crop_y}};
    }
    std::string meta_s = meta.dump();
    if (meta_s.size() > 0xffff)
        raise(ErrorKind::invalid_input, "fingerprint metadata too large");

    std::string head;
    head.append(kMagic, 5);
    head.push_back(char(kVersion));
    put_u32(head, uint32_t(fp.plane.rows));
    put_u32(head, uint32_t(fp.plane.cols));
    put_u32(head, fp.num_inputs);
    head.push_back(char(uint8_t(fp.source_kind)));
    head.push_back(char(fp.postprocess));
    put_u16(head, uint16_t(meta_s.size()));
    head += meta_s;

    std::ofstream f(path, std::ios::binary);
    if (!f) raise(ErrorKind::io, "cannot write " + path.string());
    f.write(head.data(), std::streamsize(head.size()));
    static_assert(sizeof(float) == 4);
    f.write(reinterpret_cast<const char*>(fp.plane.data.data()),
            std::streamsize(fp.plane.data.size() * 4));
    if (!f) raise(ErrorKind::io, "short write to " + path.string());
}

namespace {

[[noreturn]] void truncated(size_t offset, const std::filesystem::path& path) {
    raise(ErrorKind::format, "truncated fingerprint file at byte " + std::to_string(offset) +
                                 ": " + path.string());
}

} // namespace

Fingerprint load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) raise(ErrorKind::io, "cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    size_t off = 0;
    if (bytes.size() < 6) truncated(bytes.size(), path);
    if (std::memcmp(bytes.data(), kMagic, 5) != 0)
        raise(ErrorKind::format, "bad magic at byte 0: " + path.string());
    uint8_t version = uint8_t(bytes[5]);
    if (version != kVersion)
        raise(ErrorKind::unsupported_version,
              "unsupported fingerprint version " + std::to_string(int(version)) +
                  " at byte 5: " + path.string());
    off = 6;

    auto need = [&](size_t nb) {
        if (bytes.size() < off + nb) truncated(off, path);
    };
    auto get_u32 = [&]() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(bytes[off + i])) << (8 * i);
        off += 4;
        return v;
    };

    Fingerprint fp;
    uint32_t rows = get_u32();
    uint32_t cols = get_u32();
    fp.num_inputs = get_u32();
    need(2);
    uint8_t kind = uint8_t(bytes[off++]);
    if (kind > 2)
        raise(ErrorKind::format,
              "bad source_kind at byte " + std::to_string(off - 1) + ": " + path.string());
    fp.source_kind = SourceKind(kind);
    fp.postprocess = uint8_t(bytes[off++]);
    need(2);
    uint16_t meta_len = uint16_t(uint8_t(bytes[off])) | (uint16_t(uint8_t(bytes[off + 1])) << 8);
    off += 2;
    need(meta_len);
    std::string meta_s = bytes.substr(off, meta_len);
    off += meta_len;

    try {
        json meta = json::parse(meta_s);
        if (meta.contains("denoise")) fp.denoise_cfg = denoise_cfg_from_json(meta["denoise"]);
        if (meta.contains("geometry_note")) {
            const json& g = meta["geometry_note"];
            fp.geometry_note = geometry::SimilarityTransform{
                g.at("scale").get<double>(), g.at("rotation_deg").get<double>(),
                g.at("crop_x").get<int>(), g.at("crop_y").get<int>()};
        }
    } catch (const json::exception& e) {
        raise(ErrorKind::format, "bad metadata JSON at byte " + std::to_string(off - meta_len) +
                                     ": " + std::string(e.what()));
    }

    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
        raise(ErrorKind::format, "implausible dimensions at byte 6: " + path.string());
    size_t n = size_t(rows) * cols;
    need(n * 4);
    fp.plane = Plane(int(rows), int(cols));
    std::memcpy(fp.plane.data.data(), bytes.data() + off, n * 4);
    off += n * 4;
    if (off != bytes.size())
        raise(ErrorKind::format,
              "trailing bytes at " + std::to_string(off) + ": " + path.string());
    return fp;
}

Fingerprint estimate_from_frames(const imagery::FrameSequence& frames,
                                 const denoise::DenoiseConfig& cfg,
                                 const EstimateOptions& opt) {
    int n = frames.count();
    if (opt.max_frames > 0) n = std::min(n, opt.max_frames);
    if (n < 1) raise(ErrorKind::no_frames, "no frames to estimate from");

    // Fixed chunking: reduction tree does not depend on the thread count.
    constexpr int kChunk = 16;
    int nchunks = (n + kChunk - 1) / kChunk;
    std::vector<Accumulator> parts(static_cast<size_t>(nchunks));
    parallel_for(nchunks, opt.threads, [&](int ci) {
        int lo = ci * kChunk, hi = std::min(n, lo + kChunk);
        Accumulator acc;
        for (int i = lo; i < hi; ++i) {
            Plane img = frames.frame(i);
            Plane residual = denoise::noise_residual(img, cfg);
            if (opt.mask_saturation) {
                Plane mask = imagery::saturation_mask(img, opt.saturation_threshold);
                accumulate(acc, img, residual, &mask);
            } else {
                accumulate(acc, img, residual, nullptr);
            }
        }
        parts[size_t(ci)] = std::move(acc);
    });
    Accumulator total;
    for (auto& part : parts) merge(total, part);
    Fingerprint fp = finalize(total, opt.eps, opt.kind, cfg);
    if (opt.whiten) fp = whiten(fp);
    return fp;
}

} // namespace hsi::fingerprint
