#include "hsi/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hsi/fingerprint.hpp"
#include "hsi/imagery.hpp"
#include "hsi/rng.hpp"

namespace hsi::sim {

namespace fs = std::filesystem;
using geometry::SimilarityTransform;
using nlohmann::json;

namespace {

inline uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    return z ^ (z >> 27);
}

inline float clip255(double v) {
    return float(std::min(255.0, std::max(0.0, v)));
}

inline int sym_index(int i, int n) {
    if (n == 1) return 0;
    int p = 2 * n;
    int m = ((i % p) + p) % p;
    return m < n ? m : p - 1 - m;
}

Plane box_blur(const Plane& in, int radius, int passes) {
    Plane cur = in;
    for (int pass = 0; pass < passes; ++pass) {
        Plane tmp(cur.rows, cur.cols);
        double inv = 1.0 / (2 * radius + 1);
        for (int r = 0; r < cur.rows; ++r)
            for (int c = 0; c < cur.cols; ++c) {
                double s = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    s += cur.at(r, sym_index(c + k, cur.cols));
                tmp.at(r, c) = float(s * inv);
            }
        Plane nxt(cur.rows, cur.cols);
        for (int c = 0; c < cur.cols; ++c)
            for (int r = 0; r < cur.rows; ++r) {
                double s = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    s += tmp.at(sym_index(r + k, cur.rows), c);
                nxt.at(r, c) = float(s * inv);
            }
        cur = std::move(nxt);
    }
    return cur;
}

} // namespace

Scene scene_from_name(const std::string& name) {
    if (name == "flat") return Scene::flat;
    if (name == "texture") return Scene::texture;
    if (name == "ramp") return Scene::ramp;
    raise(ErrorKind::invalid_input, "unknown scene kind: " + name);
}

std::string scene_name(Scene s) {
    switch (s) {
    case Scene::flat: return "flat";
    case Scene::texture: return "texture";
    case Scene::ramp: return "ramp";
    }
    return "flat";
}

SceneMotion motion_from_name(const std::string& name) {
    if (name == "still") return SceneMotion::still;
    if (name == "pan") return SceneMotion::pan;
    raise(ErrorKind::invalid_input, "unknown scene motion: " + name);
}

std::string motion_name(SceneMotion m) {
    return m == SceneMotion::pan ? "pan" : "still";
}

SyntheticDevice make_device(const std::string& id, uint64_t seed, int sensor_w, int sensor_h,
                            int video_w, int video_h, const SimilarityTransform& video_geometry,
                            std::optional<JitterSpec> jitter, double alpha,
                            double readout_sigma) {
    if (sensor_w < 8 || sensor_h < 8)
        raise(ErrorKind::invalid_input, "sensor dimensions too small");
    if (!(alpha > 0.0) && alpha != 0.0)
        raise(ErrorKind::invalid_input, "alpha must be >= 0");
    SyntheticDevice dev;
    dev.id = id;
    dev.seed = seed;
    dev.sensor_w = sensor_w;
    dev.sensor_h = sensor_h;
    dev.image_w = sensor_w;
    dev.image_h = sensor_h;
    dev.video_w = video_w;
    dev.video_h = video_h;
    dev.video_geometry = video_geometry;
    dev.jitter = jitter;
    dev.alpha = alpha;
    dev.readout_sigma = readout_sigma;
    dev.k_true = Plane(sensor_h, sensor_w);
    Rng rng = Rng::stream(seed, 0x6b74727565ull); // k_true stream
    for (auto& v : dev.k_true.data) v = float(rng.gaussian());
    return dev;
}

geometry::DeviceProfile device_profile(const SyntheticDevice& dev) {
    geometry::DeviceProfile p;
    p.id = dev.id;
    p.model = "synthetic";
    p.image_w = dev.image_w;
    p.image_h = dev.image_h;
    p.video_w = dev.video_w;
    p.video_h = dev.video_h;
    p.stabilized = dev.jitter.has_value();
    p.nominal = dev.video_geometry;
    if (dev.jitter) {
        const JitterSpec& j = *dev.jitter;
        p.scale_range = {dev.video_geometry.scale * (1.0 - j.max_scale_dev),
                         dev.video_geometry.scale * (1.0 + j.max_scale_dev)};
        p.rotation_range = {dev.video_geometry.rotation_deg - j.max_rot_deg,
                            dev.video_geometry.rotation_deg + j.max_rot_deg};
        p.crop_x_range = {double(dev.video_geometry.crop_x - j.max_shift_px),
                          double(dev.video_geometry.crop_x + j.max_shift_px)};
        p.crop_y_range = {double(dev.video_geometry.crop_y - j.max_shift_px),
                          double(dev.video_geometry.crop_y + j.max_shift_px)};
    } else {
        p.scale_range = {dev.video_geometry.scale, dev.video_geometry.scale};
        p.rotation_range = {0.0, 0.0};
        p.crop_x_range = {double(dev.video_geometry.crop_x), double(dev.video_geometry.crop_x)};
        p.crop_y_range = {double(dev.video_geometry.crop_y), double(dev.video_geometry.crop_y)};
    }
    return p;
}

Plane scene_plane(Scene scene, int rows, int cols, uint64_t seed) {
    Rng rng = Rng::stream(seed, 0x7363656e65ull); // scene stream
    Plane p(rows, cols);
    switch (scene) {
    case Scene::flat: {
        double base = rng.uniform(110.0, 150.0);
        double gx = rng.uniform(-5.0, 5.0), gy = rng.uniform(-5.0, 5.0);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                double u = cols > 1 ? (double(c) / (cols - 1) - 0.5) : 0.0;
                double v = rows > 1 ? (double(r) / (rows - 1) - 0.5) : 0.0;
                p.at(r, c) = float(base + 2.0 * (gx * u + gy * v));
            }
        break;
    }
    case Scene::texture: {
        for (auto& v : p.data) v = float(rng.uniform(-1.0, 1.0));
        p = box_blur(p, 2, 2);
        double m = plane_mean(p), sd = std::sqrt(plane_variance(p));
        double gain = sd > 0 ? 30.0 / sd : 0.0;
        for (auto& v : p.data) v = clip255(128.0 + gain * (v - m));
        break;
    }
    case Scene::ramp: {
        double a = rng.uniform(0.2, 0.8);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                double u = cols > 1 ? double(c) / (cols - 1) : 0.0;
                double v = rows > 1 ? double(r) / (rows - 1) : 0.0;
                p.at(r, c) = float(30.0 + 195.0 * (a * v + (1.0 - a) * u));
            }
        break;
    }
    }
    return p;
}

namespace {

Plane render_sensor(const SyntheticDevice& dev, const Plane& scene_img, Rng& noise_rng) {
    Plane out(dev.sensor_h, dev.sensor_w);
    for (size_t i = 0; i < out.size(); ++i) {
        double v = double(scene_img.data[i]) * (1.0 + dev.alpha * double(dev.k_true.data[i]));
        v += dev.readout_sigma * noise_rng.gaussian();
        out.data[i] = clip255(v);
    }
    return out;
}

Plane apply_smp(const Plane& p, const SmpSpec& smp) {
    Plane scaled = geometry::resample(p, smp.scale);
    return dct_quantize(scaled, smp.quality);
}

} // namespace

Plane synth_image(const SyntheticDevice& dev, Scene scene, uint64_t image_seed) {
    Plane scene_img = scene_plane(scene, dev.sensor_h, dev.sensor_w,
                                  mix(dev.seed, mix(0x696d67ull, image_seed)));
    Rng noise = Rng::stream(mix(dev.seed, 0x696d67ull), image_seed);
    Plane img = render_sensor(dev, scene_img, noise);
    if (!dev.image_geometry.identity())
        img = geometry::apply_transform(img, dev.image_geometry, dev.image_h, dev.image_w);
    if (dev.compression_quality) img = dct_quantize(img, *dev.compression_quality);
    if (dev.image_smp) img = apply_smp(img, *dev.image_smp);
    return img;
}

std::vector<Plane> synth_video(const SyntheticDevice& dev, int n_frames, Scene scene,
                               uint64_t video_seed,
                               std::vector<SimilarityTransform>* truths, SceneMotion motion) {
    if (n_frames < 1) raise(ErrorKind::invalid_input, "n_frames must be >= 1");
    uint64_t vkey = mix(dev.seed, mix(0x766964ull, video_seed));
    Plane scene_img = scene_plane(scene, dev.sensor_h, dev.sensor_w, vkey);
    std::vector<Plane> frames;
    frames.reserve(size_t(n_frames));
    if (truths) truths->clear();
    for (int f = 0; f < n_frames; ++f) {
        Rng rng = Rng::stream(vkey, uint64_t(f));
        SimilarityTransform t = dev.video_geometry;
        if (dev.jitter) {
            const JitterSpec& j = *dev.jitter;
            t.crop_x += int(rng.uniform_int(-j.max_shift_px, j.max_shift_px));
            t.crop_y += int(rng.uniform_int(-j.max_shift_px, j.max_shift_px));
            t.rotation_deg += rng.uniform(-j.max_rot_deg, j.max_rot_deg);
            t.scale *= 1.0 + rng.uniform(-j.max_scale_dev, j.max_scale_dev);
        }
        const Plane* content = &scene_img;
        Plane panned;
        if (motion == SceneMotion::pan && f > 0) {
            // content drifts across the fixed sensor (circular to keep the
            // generator cheap); the pattern stays put
            int dy = (2 * f) % dev.sensor_h, dx = (3 * f) % dev.sensor_w;
            panned = Plane(dev.sensor_h, dev.sensor_w);
            for (int r = 0; r < dev.sensor_h; ++r)
                for (int c = 0; c < dev.sensor_w; ++c)
                    panned.at(r, c) =
                        scene_img.at((r + dy) % dev.sensor_h, (c + dx) % dev.sensor_w);
            content = &panned;
        }
        Plane img = render_sensor(dev, *content, rng);
        Plane frame = geometry::apply_transform(img, t, dev.video_h, dev.video_w);
        if (dev.compression_quality) frame = dct_quantize(frame, *dev.compression_quality);
        if (dev.video_smp) frame = apply_smp(frame, *dev.video_smp);
        for (auto& v : frame.data) v = clip255(v);
        frames.push_back(std::move(frame));
        if (truths) truths->push_back(t);
    }
    return frames;
}

namespace {

constexpr int kQLuma[8][8] = {
    {16, 11, 10, 16, 24, 40, 51, 61},   {12, 12, 14, 19, 26, 58, 60, 55},
    {14, 13, 16, 24, 40, 57, 69, 56},   {14, 17, 22, 29, 51, 87, 80, 62},
    {18, 22, 37, 56, 68, 109, 103, 77}, {24, 35, 55, 64, 81, 104, 113, 92},
    {49, 64, 78, 87, 103, 121, 120, 101}, {72, 92, 95, 98, 112, 100, 103, 99}};

struct Dct8 {
    double c[8][8]; // DCT-II basis
    Dct8() {
        constexpr double pi = 3.14159265358979323846;
        for (int u = 0; u < 8; ++u)
            for (int x = 0; x < 8; ++x) {
                double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
                c[u][x] = a * std::cos((2 * x + 1) * u * pi / 16.0);
            }
    }
};

} // namespace

Plane dct_quantize(const Plane& p, int quality) {
    if (quality < 1 || quality > 100)
        raise(ErrorKind::invalid_input, "quality must lie in [1,100]");
    static const Dct8 dct;
    double s = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
    double q[8][8];
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            q[i][j] = std::max(1.0, std::floor((kQLuma[i][j] * s + 50.0) / 100.0));

    int rows8 = (p.rows + 7) / 8 * 8, cols8 = (p.cols + 7) / 8 * 8;
    Plane out(p.rows, p.cols);
    double blk[8][8], tmp[8][8];
    for (int br = 0; br < rows8; br += 8)
        for (int bc = 0; bc < cols8; bc += 8) {
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j)
                    blk[i][j] = p.at(sym_index(br + i, p.rows), sym_index(bc + j, p.cols)) - 128.0;
            // D = C * B * C^T
            for (int u = 0; u < 8; ++u)
                for (int j = 0; j < 8; ++j) {
                    double acc = 0.0;
                    for (int x = 0; x < 8; ++x) acc += dct.c[u][x] * blk[x][j];
                    tmp[u][j] = acc;
                }
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) {
                    double acc = 0.0;
                    for (int x = 0; x < 8; ++x) acc += tmp[u][x] * dct.c[v][x];
                    blk[u][v] = std::round(acc / q[u][v]) * q[u][v];
                }
            // B = C^T * D * C
            for (int x = 0; x < 8; ++x)
                for (int v = 0; v < 8; ++v) {
                    double acc = 0.0;
                    for (int u = 0; u < 8; ++u) acc += dct.c[u][x] * blk[u][v];
                    tmp[x][v] = acc;
                }
            for (int x = 0; x < 8; ++x)
                for (int y = 0; y < 8; ++y) {
                    if (br + x >= p.rows || bc + y >= p.cols) continue;
                    double acc = 0.0;
                    for (int v = 0; v < 8; ++v) acc += tmp[x][v] * dct.c[v][y];
                    out.at(br + x, bc + y) = clip255(acc + 128.0);
                }
        }
    return out;
}

namespace {

json transform_to_json(const SimilarityTransform& t) {
    return {{"scale", t.scale},
            {"rotation_deg", t.rotation_deg},
            {"crop_x", t.crop_x},
            {"crop_y", t.crop_y}};
}

json profile_json_of(const SyntheticDevice& dev) {
    geometry::DeviceProfile p = device_profile(dev);
    json j;
    j["id"] = p.id;
    j["model"] = p.model;
    j["image_res"] = json::array({p.image_w, p.image_h});
    j["video_res"] = json::array({p.video_w, p.video_h});
    j["stabilized"] = p.stabilized;
    j["nominal"] = transform_to_json(p.nominal);
    j["ranges"] = {{"scale", json::array({p.scale_range.lo, p.scale_range.hi})},
                   {"rotation_deg", json::array({p.rotation_range.lo, p.rotation_range.hi})},
                   {"crop_x", json::array({p.crop_x_range.lo, p.crop_x_range.hi})},
                   {"crop_y", json::array({p.crop_y_range.lo, p.crop_y_range.hi})}};
    return j;
}

template <typename T>
T spec_get(const json& j, const char* field) {
    if (!j.contains(field))
        raise(ErrorKind::invalid_input, std::string("spec: missing field '") + field + "'");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception&) {
        raise(ErrorKind::invalid_input, std::string("spec: bad value for field '") + field + "'");
    }
}

SyntheticDevice device_from_spec(const json& dj, uint64_t base_seed) {
    auto sensor = spec_get<std::vector<int>>(dj, "sensor");
    auto video = spec_get<std::vector<int>>(dj, "video");
    if (sensor.size() != 2 || video.size() != 2)
        raise(ErrorKind::invalid_input, "spec: 'sensor'/'video' must be [w,h]");
    json nj = dj.contains("nominal") ? dj.at("nominal") : json::object();
    SimilarityTransform nominal{nj.value("scale", 1.0), nj.value("rotation_deg", 0.0),
                                nj.value("crop_x", 0), nj.value("crop_y", 0)};
    std::optional<JitterSpec> jitter;
    if (dj.contains("jitter") && !dj.at("jitter").is_null()) {
        const json& jj = dj.at("jitter");
        jitter = JitterSpec{jj.value("max_shift_px", 8), jj.value("max_rot_deg", 0.5),
                            jj.value("max_scale_dev", 0.01)};
    }
    uint64_t seed = dj.value("seed", 0);
    if (seed == 0) seed = mix(base_seed, std::hash<std::string>{}(spec_get<std::string>(dj, "id")));
    SyntheticDevice dev =
        make_device(spec_get<std::string>(dj, "id"), seed, sensor[0], sensor[1], video[0],
                    video[1], nominal, jitter, dj.value("alpha", 0.05),
                    dj.value("readout_sigma", 2.0));
    if (dj.contains("compression_quality") && !dj.at("compression_quality").is_null())
        dev.compression_quality = spec_get<int>(dj, "compression_quality");
    if (dj.contains("smp") && !dj.at("smp").is_null()) {
        const json& sj = dj.at("smp");
        SmpSpec smp{sj.value("scale", 0.5), sj.value("quality", 65)};
        dev.image_smp = smp;
        dev.video_smp = smp;
    }
    return dev;
}

std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (int(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

} // namespace

json generate_dataset(const json& spec, const fs::path& out_dir) {
    uint64_t base_seed = spec.value("seed", 1);
    if (!spec.contains("devices") || !spec.at("devices").is_array() ||
        spec.at("devices").empty())
        raise(ErrorKind::invalid_input, "spec: missing or empty field 'devices'");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) raise(ErrorKind::io, "cannot create " + out_dir.string());

    json manifest;
    manifest["seed"] = base_seed;
    manifest["devices"] = json::array();

    for (const json& dj : spec.at("devices")) {
        SyntheticDevice dev = device_from_spec(dj, base_seed);
        fs::path droot = out_dir / dev.id;
        fs::create_directories(droot);

        json dm;
        dm["id"] = dev.id;
        dm["seed"] = dev.seed;
        dm["sensor"] = json::array({dev.sensor_w, dev.sensor_h});
        dm["video"] = json::array({dev.video_w, dev.video_h});
        dm["alpha"] = dev.alpha;
        dm["readout_sigma"] = dev.readout_sigma;
        dm["stabilized"] = dev.jitter.has_value();
        if (dev.jitter)
            dm["jitter"] = {{"max_shift_px", dev.jitter->max_shift_px},
                            {"max_rot_deg", dev.jitter->max_rot_deg},
                            {"max_scale_dev", dev.jitter->max_scale_dev}};
        if (dev.compression_quality) dm["compression_quality"] = *dev.compression_quality;
        if (dev.video_smp)
            dm["smp"] = {{"scale", dev.video_smp->scale}, {"quality", dev.video_smp->quality}};
        dm["profile"] = profile_json_of(dev);

        // ground-truth pattern in fingerprint format for oracle checks
        fingerprint::Fingerprint ktrue;
        ktrue.plane = dev.k_true;
        ktrue.num_inputs = 1;
        fingerprint::save(ktrue, droot / "k_true.hsifp");
        dm["k_true"] = (fs::path(dev.id) / "k_true.hsifp").generic_string();

        if (dj.contains("ref_images") && !dj.at("ref_images").is_null()) {
            const json& rj = dj.at("ref_images");
            int count = rj.value("count", 20);
            Scene scene = scene_from_name(rj.value("scene", std::string("flat")));
            fs::path rdir = droot / "ref";
            fs::create_directories(rdir);
            for (int i = 0; i < count; ++i) {
                Plane img = synth_image(dev, scene, uint64_t(i));
                imagery::save_pgm16(img, rdir / ("img_" + zero_pad(i, 4) + ".pgm"));
            }
            dm["ref_images"] = {{"count", count},
                                {"scene", scene_name(scene)},
                                {"dir", (fs::path(dev.id) / "ref").generic_string()}};
        }

        dm["videos"] = json::array();
        if (dj.contains("videos")) {
            int vid_index = 0;
            for (const json& vj : dj.at("videos")) {
                std::string name = vj.value("name", "video" + std::to_string(vid_index));
                int nframes = vj.value("frames", 20);
                Scene scene = scene_from_name(vj.value("scene", std::string("texture")));
                SceneMotion motion = motion_from_name(vj.value("motion", std::string("still")));
                uint64_t vseed = vj.value("seed", uint64_t(vid_index));
                fs::path vdir = droot / name;
                fs::create_directories(vdir);
                std::vector<SimilarityTransform> truths;
                std::vector<Plane> frames =
                    synth_video(dev, nframes, scene, vseed, &truths, motion);
                for (int f = 0; f < int(frames.size()); ++f)
                    imagery::save_pgm16(frames[size_t(f)],
                                        vdir / ("frame_" + zero_pad(f, 4) + ".pgm"));
                json vm;
                vm["name"] = name;
                vm["frames"] = nframes;
                vm["scene"] = scene_name(scene);
                vm["motion"] = motion_name(motion);
                vm["seed"] = vseed;
                vm["dir"] = (fs::path(dev.id) / name).generic_string();
                vm["ground_truth"] = json::array();
                for (const auto& t : truths) vm["ground_truth"].push_back(transform_to_json(t));
                dm["videos"].push_back(std::move(vm));
                ++vid_index;
            }
        }
        manifest["devices"].push_back(std::move(dm));
    }

    std::ofstream mf(out_dir / "manifest.json");
    if (!mf) raise(ErrorKind::io, "cannot write manifest to " + out_dir.string());
    mf << manifest.dump(2) << "\n";
    return manifest;
}

json generate_dataset_file(const fs::path& spec_file, const fs::path& out_dir) {
    std::ifstream f(spec_file);
    if (!f) raise(ErrorKind::io, "cannot read " + spec_file.string());
    json spec;
    try {
        f >> spec;
    } catch (const json::exception& e) {
        raise(ErrorKind::invalid_input, "spec JSON parse error: " + std::string(e.what()));
    }
    return generate_dataset(spec, out_dir);
}

} // namespace hsi::sim
