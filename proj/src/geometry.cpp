#include "hsi/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hsi::geometry {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Keys bicubic kernel, a = -0.5.
inline double cubic(double s) {
    s = std::fabs(s);
    if (s <= 1.0) return 1.5 * s * s * s - 2.5 * s * s + 1.0;
    if (s < 2.0) return -0.5 * s * s * s + 2.5 * s * s - 4.0 * s + 2.0;
    return 0.0;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Separable bicubic pass along one axis of a row-major buffer.
void resample_axis(const std::vector<double>& in, int rows, int cols, int out_len,
                   bool horizontal, std::vector<double>& out) {
    int in_len = horizontal ? cols : rows;
    double ratio = double(out_len) / double(in_len);
    int orows = horizontal ? rows : out_len;
    int ocols = horizontal ? out_len : cols;
    out.assign(size_t(orows) * ocols, 0.0);

    std::vector<int> idx(size_t(out_len) * 4);
    std::vector<double> wgt(size_t(out_len) * 4);
    for (int o = 0; o < out_len; ++o) {
        double src = (o + 0.5) / ratio - 0.5;
        int i0 = int(std::floor(src));
        double f = src - i0;
        double w[4] = {cubic(1.0 + f), cubic(f), cubic(1.0 - f), cubic(2.0 - f)};
        for (int k = 0; k < 4; ++k) {
            idx[size_t(o) * 4 + k] = clampi(i0 - 1 + k, 0, in_len - 1);
            wgt[size_t(o) * 4 + k] = w[k];
        }
    }

    if (horizontal) {
        for (int r = 0; r < rows; ++r) {
            const double* src = in.data() + size_t(r) * cols;
            double* dst = out.data() + size_t(r) * ocols;
            for (int o = 0; o < out_len; ++o) {
                const int* ix = idx.data() + size_t(o) * 4;
                const double* w = wgt.data() + size_t(o) * 4;
                dst[o] = w[0] * src[ix[0]] + w[1] * src[ix[1]] + w[2] * src[ix[2]] +
                         w[3] * src[ix[3]];
            }
        }
    } else {
        for (int o = 0; o < out_len; ++o) {
            const int* ix = idx.data() + size_t(o) * 4;
            const double* w = wgt.data() + size_t(o) * 4;
            double* dst = out.data() + size_t(o) * ocols;
            const double* r0 = in.data() + size_t(ix[0]) * cols;
            const double* r1 = in.data() + size_t(ix[1]) * cols;
            const double* r2 = in.data() + size_t(ix[2]) * cols;
            const double* r3 = in.data() + size_t(ix[3]) * cols;
            for (int c = 0; c < cols; ++c)
                dst[c] = w[0] * r0[c] + w[1] * r1[c] + w[2] * r2[c] + w[3] * r3[c];
        }
    }
}

} // namespace

void SimilarityTransform::validate() const {
    if (!(scale > 0.0 && scale <= 4.0))
        raise(ErrorKind::invalid_input, "scale must lie in (0,4]");
    if (std::fabs(rotation_deg) > 45.0)
        raise(ErrorKind::invalid_input, "|rotation| must be <= 45 degrees");
}

Plane resample_to(const Plane& p, int out_rows, int out_cols) {
    if (out_rows < 2 || out_cols < 2)
        raise(ErrorKind::invalid_input, "resample output too small");
    if (out_rows == p.rows && out_cols == p.cols) {
        return p;
    }
    std::vector<double> buf(p.size());
    for (size_t i = 0; i < p.size(); ++i) buf[i] = p.data[i];
    std::vector<double> h, v;
    resample_axis(buf, p.rows, p.cols, out_cols, true, h);
    resample_axis(h, p.rows, out_cols, out_rows, false, v);
    Plane out(out_rows, out_cols);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = float(v[i]);
    return out;
}

Plane resample(const Plane& p, double scale) {
    if (!(scale > 0.0 && scale <= 4.0))
        raise(ErrorKind::invalid_input, "scale must lie in (0,4]");
    int out_rows = int(std::lround(p.rows * scale));
    int out_cols = int(std::lround(p.cols * scale));
    return resample_to(p, out_rows, out_cols);
}

Plane rotate(const Plane& p, double deg, Plane* mask) {
    if (std::fabs(deg) > 45.0)
        raise(ErrorKind::invalid_input, "|rotation| must be <= 45 degrees");
    if (mask) *mask = Plane(p.rows, p.cols, 1.0f);
    if (deg == 0.0) return p;

    double th = deg * kPi / 180.0;
    double ct = std::cos(th), st = std::sin(th);
    double cy = 0.5 * (p.rows - 1), cx = 0.5 * (p.cols - 1);
    Plane out(p.rows, p.cols);
    for (int r = 0; r < p.rows; ++r) {
        double dy = r - cy;
        for (int c = 0; c < p.cols; ++c) {
            double dx = c - cx;
            // content rotates CCW on screen (y down): inverse map is R(th)^T
            double sx = cx + ct * dx - st * dy;
            double sy = cy + st * dx + ct * dy;
            if (sx < 0.0 || sy < 0.0 || sx > p.cols - 1 || sy > p.rows - 1) {
                if (mask) mask->at(r, c) = 0.0f;
                continue;
            }
            int x0 = int(sx), y0 = int(sy);
            int x1 = std::min(x0 + 1, p.cols - 1), y1 = std::min(y0 + 1, p.rows - 1);
            double fx = sx - x0, fy = sy - y0;
            double v = (1 - fy) * ((1 - fx) * p.at(y0, x0) + fx * p.at(y0, x1)) +
                       fy * ((1 - fx) * p.at(y1, x0) + fx * p.at(y1, x1));
            out.at(r, c) = float(v);
        }
    }
    return out;
}

Plane apply_crop(const Plane& p, int crop_x, int crop_y, int out_rows, int out_cols,
                 Plane* mask) {
    if (out_rows <= 0 || out_cols <= 0)
        raise(ErrorKind::invalid_input, "crop output dims must be positive");
    int r0 = std::max(0, -crop_y), r1 = std::min(out_rows, p.rows - crop_y);
    int c0 = std::max(0, -crop_x), c1 = std::min(out_cols, p.cols - crop_x);
    if (r0 >= r1 || c0 >= c1)
        raise(ErrorKind::invalid_input, "crop window does not intersect the source");
    Plane out(out_rows, out_cols);
    if (mask) *mask = Plane(out_rows, out_cols, 0.0f);
    for (int r = r0; r < r1; ++r) {
        const float* src = p.data.data() + size_t(r + crop_y) * p.cols + (c0 + crop_x);
        float* dst = &out.at(r, c0);
        std::copy(src, src + (c1 - c0), dst);
        if (mask) std::fill(&mask->at(r, c0), &mask->at(r, c0) + (c1 - c0), 1.0f);
    }
    return out;
}

Plane apply_transform(const Plane& p, const SimilarityTransform& t, int out_rows,
                      int out_cols, Plane* mask) {
    t.validate();
    Plane scaled = (t.scale == 1.0) ? p : resample(p, t.scale);
    Plane rot_mask;
    Plane rotated = rotate(scaled, t.rotation_deg, mask ? &rot_mask : nullptr);
    Plane crop_mask;
    Plane out = apply_crop(rotated, t.crop_x, t.crop_y, out_rows, out_cols,
                           mask ? &crop_mask : nullptr);
    if (mask) {
        Plane rm = apply_crop(rot_mask, t.crop_x, t.crop_y, out_rows, out_cols, nullptr);
        *mask = Plane(out_rows, out_cols);
        for (size_t i = 0; i < mask->size(); ++i)
            mask->data[i] = (crop_mask.data[i] > 0.5f && rm.data[i] > 0.5f) ? 1.0f : 0.0f;
    }
    return out;
}

Plane warp_to_reference(const Plane& frame, const SimilarityTransform& t, int ref_rows,
                        int ref_cols, Plane* mask) {
    t.validate();
    int srows = int(std::lround(ref_rows * t.scale));
    int scols = int(std::lround(ref_cols * t.scale));
    if (srows < 2 || scols < 2)
        raise(ErrorKind::invalid_input, "reference too small under this scale");
    double ry = double(srows) / ref_rows, rx = double(scols) / ref_cols;
    double cy = 0.5 * (srows - 1), cx = 0.5 * (scols - 1);
    double th = t.rotation_deg * kPi / 180.0;
    double ct = std::cos(th), st = std::sin(th);

    Plane out(ref_rows, ref_cols);
    if (mask) *mask = Plane(ref_rows, ref_cols, 0.0f);
    for (int r = 0; r < ref_rows; ++r) {
        double uy = (r + 0.5) * ry - 0.5;
        double dy = uy - cy;
        for (int c = 0; c < ref_cols; ++c) {
            double ux = (c + 0.5) * rx - 0.5;
            double dx = ux - cx;
            // forward of the rotate() sampling map
            double vx = ct * dx + st * dy;
            double vy = -st * dx + ct * dy;
            double fx = cx + vx - t.crop_x;
            double fy = cy + vy - t.crop_y;
            if (fx < 0.0 || fy < 0.0 || fx > frame.cols - 1 || fy > frame.rows - 1)
                continue;
            int x0 = int(fx), y0 = int(fy);
            int x1 = std::min(x0 + 1, frame.cols - 1), y1 = std::min(y0 + 1, frame.rows - 1);
            double gx = fx - x0, gy = fy - y0;
            double v = (1 - gy) * ((1 - gx) * frame.at(y0, x0) + gx * frame.at(y0, x1)) +
                       gy * ((1 - gx) * frame.at(y1, x0) + gx * frame.at(y1, x1));
            out.at(r, c) = float(v);
            if (mask) mask->at(r, c) = 1.0f;
        }
    }
    return out;
}

namespace {

DeviceProfile fixed_profile(const char* id, const char* model, int iw, int ih, int vw,
                            int vh, double scale, int cx, int cy) {
    DeviceProfile p;
    p.id = id;
    p.model = model;
    p.image_w = iw;
    p.image_h = ih;
    p.video_w = vw;
    p.video_h = vh;
    p.stabilized = false;
    p.nominal = {scale, 0.0, cx, cy};
    p.scale_range = {scale, scale};
    p.rotation_range = {0.0, 0.0};
    p.crop_x_range = {double(cx), double(cx)};
    p.crop_y_range = {double(cy), double(cy)};
    return p;
}

DeviceProfile stab_profile(const char* id, const char* model, int iw, int ih, int vw,
                           int vh, double s_lo, double s_med, double s_hi, int x_lo,
                           int x_med, int x_hi, int y_lo, int y_med, int y_hi,
                           double r_lo, double r_med, double r_hi) {
    DeviceProfile p;
    p.id = id;
    p.model = model;
    p.image_w = iw;
    p.image_h = ih;
    p.video_w = vw;
    p.video_h = vh;
    p.stabilized = true;
    p.nominal = {s_med, r_med, x_med, y_med};
    p.scale_range = {s_lo, s_hi};
    p.rotation_range = {r_lo, r_hi};
    p.crop_x_range = {double(x_lo), double(x_hi)};
    p.crop_y_range = {double(y_lo), double(y_hi)};
    return p;
}

std::vector<DeviceProfile> make_builtin() {
    std::vector<DeviceProfile> v;
    v.push_back(fixed_profile("C1", "Galaxy S3", 3264, 2448, 1920, 1080, 0.59, 0, 307));
    v.push_back(fixed_profile("C2", "Galaxy S3 Mini", 2560, 1920, 1280, 720, 0.5, 0, 228));
    v.push_back(fixed_profile("C3", "Galaxy S3 Mini", 2560, 1920, 1280, 720, 0.5, 0, 228));
    v.push_back(fixed_profile("C4", "Galaxy S4 Mini", 3264, 1836, 1920, 1080, 0.59, 0, 0));
    v.push_back(fixed_profile("C5", "Galaxy Tab 3 10.1", 2048, 1536, 1280, 720, 1.0, 408, 354));
    v.push_back(fixed_profile("C6", "Galaxy Tab A 10.1", 2592, 1944, 1280, 720, 0.49, 0, 246));
    v.push_back(fixed_profile("C7", "Galaxy Trend Plus", 2560, 1920, 1280, 720, 0.5, 0, 240));
    v.push_back(fixed_profile("C8", "Ascend G6", 3264, 2448, 1280, 720, 0.39, 0, 306));
    v.push_back(fixed_profile("C9", "Ipad 2", 960, 720, 1280, 720, 1.0, -160, 0));
    v.push_back(stab_profile("C10", "Ipad Mini", 2592, 1936, 1920, 1080,
                             0.806, 0.815, 0.821, 243, 256, 261, 86, 100, 103, -0.2, 0.0, 0.2));
    v.push_back(stab_profile("C11", "Iphone 4s", 3264, 2448, 1920, 1080,
                             0.748, 0.750, 0.753, 380, 388, 392, 250, 258, 265, -0.2, 0.0, 0.2));
    v.push_back(stab_profile("C12", "Iphone 5", 3264, 2448, 1920, 1080,
                             0.684, 0.689, 0.691, 287, 294, 304, 135, 147, 165, -0.2, 0.0, 0.6));
    v.push_back(stab_profile("C13", "Iphone 5c", 3264, 2448, 1920, 1080,
                             0.681, 0.686, 0.691, 301, 318, 327, 160, 181, 195, -0.4, 0.0, 1.0));
    v.push_back(stab_profile("C14", "Iphone 5c", 3264, 2448, 1920, 1080,
                             0.686, 0.686, 0.689, 261, 301, 304, 119, 161, 165, -0.4, 0.0, 0.0));
    v.push_back(stab_profile("C15", "Iphone 6", 3264, 2448, 1920, 1080,
                             0.696, 0.703, 0.713, 298, 322, 345, 172, 190, 218, -0.2, 0.2, 1.6));
    v.push_back(stab_profile("C16", "Iphone 6", 3264, 2448, 1920, 1080,
                             0.703, 0.706, 0.708, 315, 323, 333, 178, 187, 201, -0.2, 0.2, 0.4));
    v.push_back(fixed_profile("C17", "Lumia 640", 3264, 1840, 1920, 1080, 0.59, 0, 1));
    v.push_back(stab_profile("C18", "Xperia Z1c", 5248, 3936, 1920, 1080,
                             0.381, 0.384, 0.387, 548, 562, 574, 116, 121, 126, 0.0, 0.0, 0.0));
    return v;
}

using nlohmann::json;

json range_to_json(const ParamRange& r) { return json::array({r.lo, r.hi}); }

ParamRange range_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json profile_to_json(const DeviceProfile& p) {
    json j;
    j["id"] = p.id;
    j["model"] = p.model;
    j["image_res"] = json::array({p.image_w, p.image_h});
    j["video_res"] = json::array({p.video_w, p.video_h});
    j["stabilized"] = p.stabilized;
    j["nominal"] = {{"scale", p.nominal.scale},
                    {"rotation_deg", p.nominal.rotation_deg},
                    {"crop_x", p.nominal.crop_x},
                    {"crop_y", p.nominal.crop_y}};
    j["ranges"] = {{"scale", range_to_json(p.scale_range)},
                   {"rotation_deg", range_to_json(p.rotation_range)},
                   {"crop_x", range_to_json(p.crop_x_range)},
                   {"crop_y", range_to_json(p.crop_y_range)}};
    return j;
}

DeviceProfile profile_from_json(const json& j) {
    DeviceProfile p;
    p.id = j.at("id").get<std::string>();
    p.model = j.value("model", std::string{});
    p.image_w = j.at("image_res").at(0).get<int>();
    p.image_h = j.at("image_res").at(1).get<int>();
    p.video_w = j.at("video_res").at(0).get<int>();
    p.video_h = j.at("video_res").at(1).get<int>();
    p.stabilized = j.at("stabilized").get<bool>();
    const json& n = j.at("nominal");
    p.nominal = {n.at("scale").get<double>(), n.at("rotation_deg").get<double>(),
                 n.at("crop_x").get<int>(), n.at("crop_y").get<int>()};
    const json& r = j.at("ranges");
    p.scale_range = range_from_json(r.at("scale"));
    p.rotation_range = range_from_json(r.at("rotation_deg"));
    p.crop_x_range = range_from_json(r.at("crop_x"));
    p.crop_y_range = range_from_json(r.at("crop_y"));
    if (!p.scale_range.contains(p.nominal.scale) ||
        !p.rotation_range.contains(p.nominal.rotation_deg))
        raise(ErrorKind::invalid_input, "profile ranges must contain the nominal transform");
    return p;
}

} // namespace

const std::vector<DeviceProfile>& builtin_profiles() {
    static const std::vector<DeviceProfile> v = make_builtin();
    return v;
}

const DeviceProfile* find_profile(const std::string& id) {
    for (const auto& p : builtin_profiles())
        if (p.id == id) return &p;
    return nullptr;
}

std::vector<DeviceProfile> profiles_from_json(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) raise(ErrorKind::io, "cannot read " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        raise(ErrorKind::invalid_input, "profile JSON parse error: " + std::string(e.what()));
    }
    const json& arr = j.is_array() ? j : j.at("profiles");
    std::vector<DeviceProfile> out;
    try {
        for (const auto& pj : arr) out.push_back(profile_from_json(pj));
    } catch (const json::exception& e) {
        raise(ErrorKind::invalid_input, "profile JSON field error: " + std::string(e.what()));
    }
    return out;
}

std::string profiles_to_json(const std::vector<DeviceProfile>& profiles) {
    json arr = json::array();
    for (const auto& p : profiles) arr.push_back(profile_to_json(p));
    return arr.dump(2);
}

std::string profile_to_json_string(const DeviceProfile& profile) {
    return profile_to_json(profile).dump();
}

} // namespace hsi::geometry
