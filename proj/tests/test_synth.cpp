#include <doctest.h>

#include "hazerf/error.hpp"
#include "hazerf/renderer/render.hpp"
#include "hazerf/synth/synth.hpp"

#include <Eigen/LU>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace hazerf;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
    fs::path path;
    explicit ScratchDir(const std::string& name) : path(fs::temp_directory_path() / name)
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~ScratchDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("rig: cameras look at the origin and reproject it to the principal point")
{
    const CameraRig two = make_rig(2, 3.0, 32, 7);
    REQUIRE(two.views.size() == 2);
    for (const auto& c : two.views) {
        CHECK(c.forward().dot(-c.center().normalized()) > 0.99);
        CHECK(c.center().norm() == doctest::Approx(3.0));
    }

    const CameraRig rig = make_rig(30, 2.5, 64, 3);
    for (const auto& c : rig.views) {
        CHECK(std::abs(c.rotation.determinant() - 1.0) < 1e-9);
        CHECK((c.rotation.transpose() * c.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        double z = 0.0;
        const auto uv = project(c, Vec3::Zero(), &z);
        CHECK(z > 0.0);
        CHECK(std::abs(uv.x() - c.cx) < 1.0);
        CHECK(std::abs(uv.y() - c.cy) < 1.0);
        CHECK(c.t_far > c.center().norm() + 1.0 - 1e-12);
        // the unit sphere fits in the frame
        const double half = std::asin(1.0 / c.center().norm());
        CHECK(c.fx * std::tan(half) < 0.5 * c.width);
    }

    const CameraRig again = make_rig(30, 2.5, 64, 3);
    for (std::size_t i = 0; i < rig.views.size(); ++i) {
        CHECK(rig.views[i].rotation == again.views[i].rotation);
        CHECK(rig.views[i].translation == again.views[i].translation);
    }
    CHECK(make_rig(30, 2.5, 64, 4).views[0].translation != rig.views[0].translation);

    CHECK_THROWS_AS(make_rig(1, 3.0, 32, 1), Error);
    CHECK_THROWS_AS(make_rig(4, 1.0, 32, 1), Error);
}

TEST_CASE("haze specs parse and sample inside their ranges")
{
    const HazeSpec h = parse_haze_spec("homogeneous:0.5:0.8", 1);
    CHECK(h.kind == HazeSpec::Kind::Homogeneous);
    CHECK(h.sigma == 0.5);
    CHECK(h.c_s == Rgb::Constant(0.8));
    CHECK_FALSE(h.koschmieder);

    const HazeSpec rgb = parse_haze_spec("koschmieder:0.25:0.7,0.8,0.9", 1);
    CHECK(rgb.koschmieder);
    CHECK(rgb.c_s == Rgb(0.7, 0.8, 0.9));

    const HazeSpec drawn = parse_haze_spec("homogeneous:0.5", 9);
    CHECK((drawn.c_s.array() >= 0.7).all());
    CHECK((drawn.c_s.array() <= 0.9).all());
    CHECK(drawn.c_s == parse_haze_spec("homogeneous:0.5", 9).c_s);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const HazeSpec b = parse_haze_spec("blobs:amp=1.5", seed);
        REQUIRE(b.blobs.size() == 4);
        CHECK((b.c_s.array() >= 0.7).all());
        CHECK((b.c_s.array() <= 0.9).all());
        for (const auto& g : b.blobs) {
            CHECK(g.amplitude == 1.5);
            CHECK(g.stddev >= 1.0);
            CHECK(g.stddev <= 3.0);
            CHECK((g.center.array() >= -1.0).all());
            CHECK((g.center.array() <= 1.0).all());
        }
    }
    CHECK(parse_haze_spec("blobs:amp=1:n=2", 1).blobs.size() == 2);
    CHECK(parse_haze_spec("none", 1).kind == HazeSpec::Kind::None);

    CHECK_THROWS_AS(parse_haze_spec("blobs", 1), Error);
    CHECK_THROWS_AS(parse_haze_spec("blobs:n=3", 1), Error);
    CHECK_THROWS_AS(parse_haze_spec("homogeneous:-1:0.8", 1), Error);
    CHECK_THROWS_AS(parse_haze_spec("homogeneous:0.5:1.5", 1), Error);
    CHECK_THROWS_AS(parse_haze_spec("homogeneous:abc", 1), Error);
    CHECK_THROWS_AS(parse_haze_spec("fog:1", 1), Error);

    const HazeSpec back = haze_from_json(haze_to_json(parse_haze_spec("blobs:amp=0.7:n=3", 4)));
    REQUIRE(back.blobs.size() == 3);
    CHECK(back.blobs[2].center == parse_haze_spec("blobs:amp=0.7:n=3", 4).blobs[2].center);
}

TEST_CASE("standard scenes are normalized and textured for the dark channel")
{
    for (const auto& name : standard_scene_names()) {
        const SceneModel s = standard_scene(name);
        CHECK(s.is_analytic());
        CHECK(s.sdf.analytic().bounding_radius() <= 1.0);
    }
    CHECK_THROWS_AS(standard_scene("teapot"), Error);

    // at least 30% of surface pixels have a channel below 0.05
    const Camera cam = make_rig(6, 2.5, 48, 1).views[0];
    for (const char* name : {"sphere", "sphere_box"}) {
        const SynthView v = render_synthetic_view(standard_scene(name), cam, HazeSpec::none(), 1024, 1);
        int surface = 0, dark = 0;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                if (v.mask.at(x, y, 0) == 0.0)
                    continue;
                ++surface;
                dark += std::min({v.clear.at(x, y, 0), v.clear.at(x, y, 1), v.clear.at(x, y, 2)}) < 0.05;
            }
        CHECK(surface > 200);
        CHECK(dark >= 0.3 * surface);
    }
}

TEST_CASE("zero haze: hazy equals clear bitwise")
{
    const Camera cam = make_rig(4, 3.0, 24, 2).views[1];
    for (const HazeSpec& h : {HazeSpec::none(), HazeSpec::homogeneous(0.0, Rgb::Constant(0.8))}) {
        const SynthView v = render_synthetic_view(standard_scene("sphere_box"), cam, h, 1024, 1);
        CHECK(v.hazy.data == v.clear.data);
    }
}

TEST_CASE("homogeneous haze agrees with the 2-D law on traced depth")
{
    const Camera cam = make_rig(4, 2.5, 24, 5).views[2];
    const SceneModel scene = standard_scene("sphere");
    for (double sigma : {0.1, 0.5, 1.0}) {
        const HazeSpec h = HazeSpec::homogeneous(sigma, Rgb(0.8, 0.75, 0.85));
        const SynthView v = render_synthetic_view(scene, cam, h, 4096, 1);
        double worst = 0.0;
        int fg = 0;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                if (v.mask.at(x, y, 0) == 0.0)
                    continue;
                ++fg;
                const Rgb clear(v.clear.at(x, y, 0), v.clear.at(x, y, 1), v.clear.at(x, y, 2));
                const Rgb expect = koschmieder_forward(clear, v.depth.at(x, y, 0), sigma, h.c_s);
                for (int k = 0; k < 3; ++k)
                    worst = std::max(worst, std::abs(v.hazy.at(x, y, k) - expect[k]) / std::abs(expect[k]));
            }
        CHECK(fg > 50);
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("blob haze on a background ray matches dense 1-D integration")
{
    const Camera cam = make_rig(4, 2.5, 16, 5).views[0];
    SceneModel scene = standard_scene("sphere");
    scene.background = Rgb(0.1, 0.2, 0.3);
    const HazeSpec h = HazeSpec::random_blobs(0.6, 4, 11);
    const SynthView v = render_synthetic_view(scene, cam, h, 4096, 1);
    REQUIRE(v.mask.at(0, 0, 0) == 0.0);
    const BlobScattering blobs{h.blobs};

    int checked = 0;
    for (auto [x, y] : {std::pair{0, 0}, std::pair{15, 0}, std::pair{0, 15}, std::pair{15, 15}}) {
        REQUIRE(v.mask.at(x, y, 0) == 0.0);
        const Ray r = pixel_ray(cam, x, y);
        // trapezoidal optical depth, in-scattering sum sigma T dt
        const int steps = 100000;
        const double dt = (r.t_far - r.t_near) / steps;
        double tau = 0.0, inscatter = 0.0;
        double prev = blobs.eval(r.origin + r.t_near * r.direction);
        for (int i = 1; i <= steps; ++i) {
            const double cur = blobs.eval(r.origin + (r.t_near + i * dt) * r.direction);
            const double tau_next = tau + 0.5 * dt * (prev + cur);
            inscatter += 0.5 * dt * (prev * std::exp(-tau) + cur * std::exp(-tau_next));
            tau = tau_next;
            prev = cur;
        }
        for (int k = 0; k < 3; ++k) {
            const double expect = scene.background[k] * std::exp(-tau) + h.c_s[k] * inscatter;
            CHECK(std::abs(v.hazy.at(x, y, k) - expect) / expect < 1e-3);
        }
        CHECK(inscatter > 0.05);
        ++checked;
    }
    CHECK(checked == 4);
}

TEST_CASE("haze moves foreground pixels monotonically toward the airlight")
{
    const Camera cam = make_rig(4, 2.5, 20, 8).views[3];
    const SceneModel scene = standard_scene("octant");
    const Rgb c_s = Rgb::Constant(0.95);
    std::vector<SynthView> views;
    for (double sigma : {0.0, 0.25, 0.5, 1.0})
        views.push_back(render_synthetic_view(scene, cam, HazeSpec::homogeneous(sigma, c_s), 1024, 1));
    int fg = 0;
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            if (views[0].mask.at(x, y, 0) == 0.0)
                continue;
            ++fg;
            for (int k = 0; k < 3; ++k)
                for (std::size_t i = 1; i < views.size(); ++i) {
                    const double before = c_s[k] - views[i - 1].hazy.at(x, y, k);
                    const double after = c_s[k] - views[i].hazy.at(x, y, k);
                    CHECK(after >= 0.0);
                    CHECK(after <= before);
                }
        }
    CHECK(fg > 50);
}

TEST_CASE("mask is one exactly where the ray meets the surface")
{
    const SceneModel scene = standard_scene("sphere_box");
    for (const Camera& cam : make_rig(3, 2.2, 24, 6).views) {
        const SynthView v = render_synthetic_view(scene, cam, HazeSpec::homogeneous(0.3, Rgb::Constant(0.8)), 1024, 1);
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const Ray r = pixel_ray(cam, x, y);
                const auto hit = scene.sdf.analytic().intersect(r.origin, r.direction, r.t_near, r.t_far);
                CHECK(v.mask.at(x, y, 0) == (hit ? 1.0 : 0.0));
                if (hit)
                    CHECK(v.depth.at(x, y, 0) == *hit);
            }
    }
}

TEST_CASE("test split holds out a tenth of the views")
{
    CHECK(test_view_indices(30).size() == 3);
    CHECK(test_view_indices(9).size() == 1);
    CHECK(test_view_indices(2).size() == 1);
    CHECK(test_view_indices(100).size() == 10);
    const auto idx = test_view_indices(30);
    CHECK(idx[0] < idx[1]);
    CHECK(idx[1] < idx[2]);
    CHECK(idx[2] < 30);

    ScratchDir dir("hazerf_synth_split");
    const auto m = synthesize_dataset(standard_scene("sphere"), "sphere", make_rig(30, 3.0, 4, 1),
                                      parse_haze_spec("homogeneous:0.5:0.8", 1), 1024, dir.path, 2);
    CHECK(m.count(false) == 27);
    CHECK(m.count(true) == 3);
    const Dataset d = load_dataset(dir.path / "manifest.json");
    CHECK(d.split(false).size() == 27);
    CHECK(d.split(true).size() == 3);
}

TEST_CASE("dataset round trip and determinism")
{
    ScratchDir a("hazerf_synth_a");
    ScratchDir b("hazerf_synth_b");
    const SceneModel scene = standard_scene("sphere_box");
    const CameraRig rig = make_rig(4, 2.5, 16, 2);
    const HazeSpec haze = parse_haze_spec("blobs:amp=0.5", 3);
    const auto m = synthesize_dataset(scene, "sphere_box", rig, haze, 1024, a.path, 2);
    synthesize_dataset(scene, "sphere_box", rig, haze, 1024, b.path, 1);

    // byte-identical regardless of thread count
    int files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a.path)) {
        if (!e.is_regular_file())
            continue;
        const auto rel = fs::relative(e.path(), a.path);
        CHECK(slurp(e.path()) == slurp(b.path / rel));
        ++files;
    }
    CHECK(files >= 17);

    const Dataset d = load_dataset(a.path / "manifest.json");
    REQUIRE(d.views.size() == 4);
    CHECK(d.manifest.scene_name == "sphere_box");
    REQUIRE(d.manifest.haze.has_value());
    CHECK(d.manifest.haze->blobs.size() == 4);
    CHECK(d.manifest.scene.has_value());
    for (std::size_t i = 0; i < 4; ++i) {
        const SynthView v = render_synthetic_view(scene, rig.views[i], haze, 1024, 1);
        const DatasetView& dv = d.views[i];
        CHECK(dv.camera.rotation == rig.views[i].rotation);
        double worst = 0.0;
        for (std::size_t j = 0; j < v.hazy.data.size(); ++j) {
            worst = std::max(worst, std::abs(dv.image.data[j] - v.hazy.data[j]));
            worst = std::max(worst, std::abs(dv.clear->data[j] - v.clear.data[j]));
        }
        CHECK(worst <= 0.5 / 65535.0 + 1e-15);
        CHECK(dv.mask->data == v.mask.data);
        for (std::size_t j = 0; j < v.depth.data.size(); ++j)
            CHECK(std::abs(dv.depth->data[j] - v.depth.data[j]) <= 1e-6 * v.depth.data[j]);
    }

    // a corrupted file is rejected
    {
        std::fstream f(a.path / m.views[1].image, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-8, std::ios::end);
        f.put('\x5a');
    }
    CHECK_THROWS_WITH_AS(load_dataset(a.path / "manifest.json"), doctest::Contains("checksum"), Error);

    // a missing file is named
    fs::remove(b.path / m.views[2].clear);
    CHECK_THROWS_WITH_AS(load_dataset(b.path / "manifest.json"), doctest::Contains("view_002.png"), Error);
}

TEST_CASE("synthesis preconditions")
{
    ScratchDir dir("hazerf_synth_pre");
    const CameraRig rig = make_rig(2, 3.0, 4, 1);
    SceneModel big = standard_scene("sphere");
    big.sdf = AnalyticSdf{{SpherePrimitive{Vec3::Zero(), 1.5}}};
    CHECK_THROWS_WITH_AS(synthesize_dataset(big, "big", rig, HazeSpec::none(), 1024, dir.path, 1),
                         doctest::Contains("normalized"), Error);
    CHECK_THROWS_AS(synthesize_dataset(standard_scene("sphere"), "s", rig, HazeSpec::none(), 512, dir.path, 1), Error);
    CHECK_THROWS_AS(load_dataset(dir.path / "nothing.json"), Error);
}
