#include "hazerf/synth/synth.hpp"

#include "hazerf/error.hpp"
#include "hazerf/renderer/render.hpp"
#include "hazerf/util/parallel.hpp"
#include "hazerf/util/rng.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

namespace hazerf {

using nlohmann::json;
namespace fs = std::filesystem;

CameraRig make_rig(int n_views, double radius, int resolution, std::uint64_t seed)
{
    if (n_views < 2)
        throw Error("make_rig: need at least 2 views, got " + std::to_string(n_views));
    if (!(radius > 1.0))
        throw Error("make_rig: camera radius must exceed 1 (cameras outside the unit sphere)");
    if (resolution < 1)
        throw Error("make_rig: resolution must be positive");
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double phase = 2.0 * std::numbers::pi * uniform01(hash_key({seed, hash_name("rig")}));
    const double half_angle = std::asin(1.0 / radius);
    const double f = 0.45 * resolution / std::tan(half_angle);
    const double c = 0.5 * resolution;

    CameraRig rig;
    for (int i = 0; i < n_views; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n_views;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = phase + golden * i;
        const Vec3 eye = radius * Vec3(r * std::cos(phi), r * std::sin(phi), z);
        Camera cam = look_at(eye, Vec3::Zero(), Vec3::UnitZ(), f, f, c, c, resolution, resolution);
        cam.t_near = 1e-4;
        cam.t_far = radius + 1.0;
        rig.views.push_back(cam);
    }
    return rig;
}

HazeSpec HazeSpec::none() { return {}; }

HazeSpec HazeSpec::homogeneous(double sigma, const Rgb& c_s)
{
    if (!(sigma >= 0.0))
        throw Error("haze: scattering coefficient must be non-negative");
    if ((c_s.array() < 0.0).any() || (c_s.array() > 1.0).any())
        throw Error("haze: airlight must lie in [0, 1]");
    HazeSpec h;
    h.kind = Kind::Homogeneous;
    h.sigma = sigma;
    h.c_s = c_s;
    return h;
}

Rgb HazeSpec::random_airlight(std::uint64_t seed)
{
    Rgb c;
    for (int k = 0; k < 3; ++k)
        c[k] = 0.7 + 0.2 * uniform01(hash_key({seed, hash_name("airlight"), static_cast<std::uint64_t>(k)}));
    return c;
}

HazeSpec HazeSpec::random_blobs(double amplitude, int count, std::uint64_t seed)
{
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
        throw Error("haze: blob amplitude must be a finite non-negative number");
    if (count < 1)
        throw Error("haze: need at least one blob");
    HazeSpec h;
    h.kind = Kind::Blobs;
    h.c_s = random_airlight(seed);
    for (int b = 0; b < count; ++b) {
        auto u = [&](std::uint64_t j) {
            return uniform01(hash_key({seed, hash_name("blob"), static_cast<std::uint64_t>(b), j}));
        };
        GaussianBlob g;
        for (int k = 0; k < 3; ++k)
            g.center[k] = h.box_min[k] + (h.box_max[k] - h.box_min[k]) * u(static_cast<std::uint64_t>(k));
        g.stddev = 1.0 + 2.0 * u(3);
        g.amplitude = amplitude;
        h.blobs.push_back(g);
    }
    return h;
}

ScatteringField HazeSpec::field() const
{
    switch (kind) {
    case Kind::None: return ZeroScattering{};
    case Kind::Homogeneous: return sigma == 0.0 ? ScatteringField{} : ScatteringField{ConstantScattering{sigma}};
    case Kind::Blobs: return BlobScattering{blobs};
    }
    return {};
}

namespace {

double parse_number(std::string_view s, std::string_view what)
{
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v))
        throw Error("haze spec: bad " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            return out;
        start = pos + 1;
    }
}

}  // namespace

HazeSpec parse_haze_spec(std::string_view text, std::uint64_t seed)
{
    const auto parts = split(text, ':');
    const auto kind = parts[0];
    if (kind == "none" && parts.size() == 1)
        return HazeSpec::none();
    if (kind == "homogeneous" || kind == "koschmieder") {
        if (parts.size() < 2 || parts.size() > 3)
            throw Error("haze spec: expected " + std::string(kind) + ":SIGMA[:C or :R,G,B]");
        const double sigma = parse_number(parts[1], "sigma");
        Rgb c = HazeSpec::random_airlight(seed);
        if (parts.size() == 3) {
            const auto ch = split(parts[2], ',');
            if (ch.size() == 1)
                c = Rgb::Constant(parse_number(ch[0], "airlight"));
            else if (ch.size() == 3)
                c = Rgb(parse_number(ch[0], "airlight"), parse_number(ch[1], "airlight"),
                        parse_number(ch[2], "airlight"));
            else
                throw Error("haze spec: airlight needs 1 or 3 values");
        }
        HazeSpec h = HazeSpec::homogeneous(sigma, c);
        h.koschmieder = kind == "koschmieder";
        return h;
    }
    if (kind == "blobs") {
        std::optional<double> amp;
        int count = 4;
        for (std::size_t i = 1; i < parts.size(); ++i) {
            const auto kv = split(parts[i], '=');
            if (kv.size() != 2)
                throw Error("haze spec: expected key=value, got '" + std::string(parts[i]) + "'");
            if (kv[0] == "amp")
                amp = parse_number(kv[1], "amplitude");
            else if (kv[0] == "n") {
                const double n = parse_number(kv[1], "blob count");
                if (n != std::floor(n) || n < 1 || n > 64)
                    throw Error("haze spec: blob count must be an integer in [1, 64]");
                count = static_cast<int>(n);
            } else
                throw Error("haze spec: unknown key '" + std::string(kv[0]) + "'");
        }
        if (!amp)
            throw Error("haze spec: blobs need an explicit amplitude (blobs:amp=A)");
        return HazeSpec::random_blobs(*amp, count, seed);
    }
    throw Error("haze spec: unknown form '" + std::string(text) + "'");
}

json haze_to_json(const HazeSpec& h)
{
    json j;
    j["c_s"] = vec_to_json(h.c_s);
    switch (h.kind) {
    case HazeSpec::Kind::None: j["type"] = "none"; break;
    case HazeSpec::Kind::Homogeneous:
        j["type"] = "homogeneous";
        j["sigma"] = h.sigma;
        j["koschmieder"] = h.koschmieder;
        break;
    case HazeSpec::Kind::Blobs: {
        j["type"] = "blobs";
        json blobs = json::array();
        for (const auto& g : h.blobs)
            blobs.push_back({{"center", vec_to_json(g.center)}, {"stddev", g.stddev}, {"amplitude", g.amplitude}});
        j["blobs"] = blobs;
        j["box_min"] = vec_to_json(h.box_min);
        j["box_max"] = vec_to_json(h.box_max);
        break;
    }
    }
    return j;
}

HazeSpec haze_from_json(const json& j)
{
    HazeSpec h;
    const auto type = j.at("type").get<std::string>();
    h.c_s = vec_from_json(j.at("c_s"));
    if (type == "none")
        return h;
    if (type == "homogeneous") {
        h.kind = HazeSpec::Kind::Homogeneous;
        h.sigma = j.at("sigma").get<double>();
        h.koschmieder = j.value("koschmieder", false);
        return h;
    }
    if (type == "blobs") {
        h.kind = HazeSpec::Kind::Blobs;
        for (const auto& e : j.at("blobs"))
            h.blobs.push_back({vec_from_json(e.at("center")), e.at("stddev").get<double>(), e.at("amplitude").get<double>()});
        h.box_min = vec_from_json(j.at("box_min"));
        h.box_max = vec_from_json(j.at("box_max"));
        return h;
    }
    throw Error("haze: unknown type '" + type + "'");
}

const std::vector<std::string>& standard_scene_names()
{
    static const std::vector<std::string> names = {"sphere", "sphere_box", "octant"};
    return names;
}

SceneModel standard_scene(std::string_view name)
{
    SceneModel s;
    s.sharpness = Sharpness(1e4);
    s.background = Rgb::Zero();
    if (name == "sphere") {
        s.sdf = AnalyticSdf{{SpherePrimitive{Vec3::Zero(), 0.5}}};
        s.radiance = TextureRadiance{};
    } else if (name == "sphere_box") {
        s.sdf = AnalyticSdf{{SpherePrimitive{Vec3(-0.25, 0.0, 0.1), 0.4},
                             BoxPrimitive{Vec3(0.3, 0.1, -0.2), Vec3(0.25, 0.3, 0.2)}}};
        s.radiance = TextureRadiance{};
    } else if (name == "octant") {
        s.sdf = AnalyticSdf{{SpherePrimitive{Vec3::Zero(), 0.5}}};
        OctantRadiance o;
        o.colors = {Rgb(0.8, 0.1, 0.0), Rgb(0.0, 0.6, 0.2), Rgb(0.1, 0.2, 0.9), Rgb(0.7, 0.7, 0.0),
                    Rgb(0.0, 0.5, 0.6), Rgb(0.6, 0.0, 0.5), Rgb(0.9, 0.4, 0.1), Rgb(0.3, 0.0, 0.1)};
        s.radiance = o;
    } else {
        throw Error("unknown scene '" + std::string(name) + "'");
    }
    return s;
}

SceneModel with_haze(const SceneModel& base, const HazeSpec& haze)
{
    SceneModel s = base;
    s.scattering = haze.field();
    s.airlight = AtmosphericLight(haze.c_s);
    return s;
}

SynthView render_synthetic_view(const SceneModel& scene, const Camera& cam, const HazeSpec& haze, int n_samples_oracle,
                                int threads)
{
    if (n_samples_oracle < 1024)
        throw Error("synthesis needs at least 1024 oracle samples per ray");
    validate_camera(cam);
    const SceneModel hazy_scene = with_haze(scene, haze);
    RenderOptions opt;
    opt.exact = true;
    opt.exact_haze_samples = n_samples_oracle;
    opt.koschmieder = haze.koschmieder;
    const auto px = render_image(hazy_scene, cam, opt, threads);

    SynthView v{Image(cam.width, cam.height, 3), Image(cam.width, cam.height, 3), Image(cam.width, cam.height, 1),
                Image(cam.width, cam.height, 1)};
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const RenderOutput& o = px[static_cast<std::size_t>(y) * cam.width + x];
            for (int k = 0; k < 3; ++k) {
                v.hazy.at(x, y, k) = o.hazy[k];
                v.clear.at(x, y, k) = o.clear[k];
            }
            v.depth.at(x, y, 0) = o.depth;
            v.mask.at(x, y, 0) = o.opacity;
        }
    return v;
}

std::size_t DatasetManifest::count(bool test) const
{
    std::size_t n = 0;
    for (const auto& v : views)
        n += v.test == test;
    return n;
}

std::vector<std::size_t> test_view_indices(std::size_t n_views)
{
    if (n_views == 0)
        return {};
    const std::size_t n_test = std::max<std::size_t>(1, n_views / 10);
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n_test; ++j)
        out.push_back((2 * j + 1) * n_views / (2 * n_test));
    return out;
}

json camera_to_json(const Camera& c)
{
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
        rot.push_back(json::array({c.rotation(r, 0), c.rotation(r, 1), c.rotation(r, 2)}));
    return {{"fx", c.fx},         {"fy", c.fy},         {"cx", c.cx},       {"cy", c.cy},
            {"width", c.width},   {"height", c.height}, {"rotation", rot},  {"translation", vec_to_json(c.translation)},
            {"t_near", c.t_near}, {"t_far", c.t_far}};
}

Camera camera_from_json(const json& j)
{
    Camera c;
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    const auto& rot = j.at("rotation");
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k)
            c.rotation(r, k) = rot.at(r).at(k).get<double>();
    c.translation = vec_from_json(j.at("translation"));
    c.t_near = j.at("t_near").get<double>();
    c.t_far = j.at("t_far").get<double>();
    validate_camera(c);
    return c;
}

json manifest_to_json(const DatasetManifest& m)
{
    json views = json::array();
    for (const auto& v : m.views) {
        json e = {{"name", v.name}, {"split", v.test ? "test" : "train"}, {"camera", camera_to_json(v.camera)},
                  {"image", v.image}};
        if (!v.mask.empty())
            e["mask"] = v.mask;
        if (!v.clear.empty())
            e["clear"] = v.clear;
        if (!v.depth.empty())
            e["depth"] = v.depth;
        views.push_back(e);
    }
    json sums = json::object();
    for (const auto& [path, crc] : m.checksums) {
        char buf[9];
        std::snprintf(buf, sizeof buf, "%08x", crc);
        sums[path] = buf;
    }
    json j = {{"format", "hazerf-dataset"},
              {"version", kManifestVersion},
              {"scene_name", m.scene_name},
              {"normalization", {{"scale", m.scale}, {"translation", vec_to_json(m.translation)}}},
              {"bounding_box", {{"min", vec_to_json(m.box_min)}, {"max", vec_to_json(m.box_max)}}},
              {"background", vec_to_json(m.background)},
              {"image_encoding", "linear 16-bit PNG, value = v / 65535"},
              {"depth_encoding", "PFM, distance along the unit ray from the camera centre, 0 where no surface"},
              {"views", views},
              {"checksums", sums}};
    if (m.haze || m.scene) {
        json gt = json::object();
        if (m.haze)
            gt["haze"] = haze_to_json(*m.haze);
        if (m.scene)
            gt["scene"] = *m.scene;
        j["ground_truth"] = gt;
    }
    return j;
}

DatasetManifest manifest_from_json(const json& j)
{
    try {
        if (j.at("format").get<std::string>() != "hazerf-dataset")
            throw Error("manifest: not a dataset manifest");
        const int version = j.at("version").get<int>();
        if (version != kManifestVersion)
            throw Error("manifest: unsupported version " + std::to_string(version));
        DatasetManifest m;
        m.scene_name = j.at("scene_name").get<std::string>();
        m.scale = j.at("normalization").at("scale").get<double>();
        m.translation = vec_from_json(j.at("normalization").at("translation"));
        m.box_min = vec_from_json(j.at("bounding_box").at("min"));
        m.box_max = vec_from_json(j.at("bounding_box").at("max"));
        m.background = vec_from_json(j.at("background"));
        for (const auto& e : j.at("views")) {
            ManifestView v;
            v.name = e.at("name").get<std::string>();
            const auto split_tag = e.at("split").get<std::string>();
            if (split_tag != "train" && split_tag != "test")
                throw Error("manifest: view " + v.name + " has unknown split '" + split_tag + "'");
            v.test = split_tag == "test";
            v.camera = camera_from_json(e.at("camera"));
            v.image = e.at("image").get<std::string>();
            v.mask = e.value("mask", "");
            v.clear = e.value("clear", "");
            v.depth = e.value("depth", "");
            m.views.push_back(std::move(v));
        }
        for (const auto& [path, value] : j.at("checksums").items()) {
            const auto s = value.get<std::string>();
            std::uint32_t crc = 0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), crc, 16);
            if (ec != std::errc{} || ptr != s.data() + s.size())
                throw Error("manifest: bad checksum for " + path);
            m.checksums.emplace_back(path, crc);
        }
        if (j.contains("ground_truth")) {
            const auto& gt = j.at("ground_truth");
            if (gt.contains("haze"))
                m.haze = haze_from_json(gt.at("haze"));
            if (gt.contains("scene"))
                m.scene = gt.at("scene");
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(std::string("manifest: malformed: ") + e.what());
    }
}

DatasetManifest synthesize_dataset(const SceneModel& scene, std::string_view scene_name, const CameraRig& rig,
                                   const HazeSpec& haze, int n_samples_oracle, const fs::path& out_dir, int threads)
{
    if (!scene.is_analytic() || !scene.scattering.is_zero())
        throw Error("synthesize_dataset: needs an analytic scene without a medium");
    const double r = scene.sdf.analytic().bounding_radius();
    if (!(r <= 1.0))
        throw Error("synthesize_dataset: scene is not normalized to the unit sphere (bounding radius " +
                    std::to_string(r) + ")");
    if (rig.views.size() < 2)
        throw Error("synthesize_dataset: need at least 2 views");
    if (n_samples_oracle < 1024)
        throw Error("synthesize_dataset: need at least 1024 oracle samples per ray");

    std::error_code ec;
    for (const char* sub : {"images", "clear", "depth", "masks"}) {
        fs::create_directories(out_dir / sub, ec);
        if (ec)
            throw Error("cannot create " + (out_dir / sub).string() + ": " + ec.message());
    }

    const auto test_idx = test_view_indices(rig.views.size());
    const std::set<std::size_t> test_set(test_idx.begin(), test_idx.end());
    DatasetManifest m;
    m.scene_name = std::string(scene_name);
    m.box_min = haze.box_min;
    m.box_max = haze.box_max;
    m.background = scene.background;
    m.haze = haze;
    m.scene = scene_to_json(with_haze(scene, haze));
    m.views.resize(rig.views.size());
    for (std::size_t i = 0; i < rig.views.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "view_%03zu", i);
        ManifestView& v = m.views[i];
        v.name = name;
        v.test = test_set.count(i) > 0;
        v.camera = rig.views[i];
        v.image = "images/" + v.name + ".png";
        v.clear = "clear/" + v.name + ".png";
        v.depth = "depth/" + v.name + ".pfm";
        v.mask = "masks/" + v.name + ".png";
    }

    // Views in parallel, one worker each; every file is written by exactly one task.
    parallel_for(rig.views.size(), threads, [&](std::size_t i) {
        const SynthView sv = render_synthetic_view(scene, rig.views[i], haze, n_samples_oracle, 1);
        const ManifestView& v = m.views[i];
        write_png16(out_dir / v.image, sv.hazy);
        write_png16(out_dir / v.clear, sv.clear);
        write_pfm(out_dir / v.depth, sv.depth);
        write_mask_png(out_dir / v.mask, sv.mask);
    });

    for (const auto& v : m.views)
        for (const auto* p : {&v.image, &v.clear, &v.depth, &v.mask})
            m.checksums.emplace_back(*p, file_crc32(out_dir / *p));

    std::ofstream out(out_dir / "manifest.json");
    out << manifest_to_json(m).dump(2) << '\n';
    if (!out)
        throw Error("cannot write " + (out_dir / "manifest.json").string());
    return m;
}

std::vector<std::size_t> Dataset::split(bool test) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < views.size(); ++i)
        if (views[i].test == test)
            out.push_back(i);
    return out;
}

Dataset load_dataset(const fs::path& manifest_path)
{
    std::ifstream in(manifest_path);
    if (!in)
        throw Error("cannot open manifest " + manifest_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("manifest " + manifest_path.string() + ": " + e.what());
    }
    Dataset d;
    d.root = manifest_path.parent_path();
    d.manifest = manifest_from_json(j);

    auto checked = [&](const std::string& rel) {
        const fs::path p = d.root / rel;
        if (!fs::exists(p))
            throw Error("dataset: missing file " + p.string());
        for (const auto& [path, crc] : d.manifest.checksums)
            if (path == rel) {
                if (file_crc32(p) != crc)
                    throw Error("dataset: checksum mismatch for " + p.string());
                return p;
            }
        throw Error("dataset: no checksum recorded for " + rel);
    };
    for (const auto& mv : d.manifest.views) {
        DatasetView v;
        v.name = mv.name;
        v.test = mv.test;
        v.camera = mv.camera;
        v.image = read_png(checked(mv.image));
        if (v.image.channels != 3 || v.image.width != mv.camera.width || v.image.height != mv.camera.height)
            throw Error("dataset: image " + mv.image + " does not match its camera");
        if (!mv.mask.empty())
            v.mask = read_png(checked(mv.mask));
        if (!mv.clear.empty())
            v.clear = read_png(checked(mv.clear));
        if (!mv.depth.empty())
            v.depth = read_pfm(checked(mv.depth));
        d.views.push_back(std::move(v));
    }
    return d;
}

}  // namespace hazerf
