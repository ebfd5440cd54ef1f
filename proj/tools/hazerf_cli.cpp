// hazerf command line: synth, train, render, eval, check.
#include "hazerf/checks/checks.hpp"
#include "hazerf/error.hpp"
#include "hazerf/trainer/metrics.hpp"
#include "hazerf/trainer/trainer.hpp"
#include "hazerf/util/parallel.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace hazerf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    if (!out)
        throw Error("cannot write " + path.string());
}

fs::path manifest_path(const fs::path& data)
{
    return fs::is_directory(data) ? data / "manifest.json" : data;
}

// A trained checkpoint (model.json beside it), a dataset manifest (its
// ground-truth scene) or a scene description file.
SceneModel load_any_scene(const fs::path& path, std::uint64_t seed)
{
    if (path.extension() != ".json")
        return load_trained_model(path);
    const json j = read_json(path);
    if (j.value("format", "") == "hazerf-dataset") {
        const DatasetManifest m = manifest_from_json(j);
        if (!m.scene)
            throw Error(path.string() + ": manifest carries no ground-truth scene");
        return scene_from_json(*m.scene, seed);
    }
    return scene_from_json(j, seed);
}

struct Common {
    std::uint64_t seed = 0;
    int threads = default_threads();
};

int cmd_synth(const Common& g, const std::string& scene, const std::string& haze_text, int views, int res,
              double radius, int oracle, const fs::path& out)
{
    const HazeSpec haze = parse_haze_spec(haze_text, g.seed);
    const CameraRig rig = make_rig(views, radius, res, g.seed);
    const DatasetManifest m = synthesize_dataset(standard_scene(scene), scene, rig, haze, oracle, out, g.threads);
    std::cout << "manifest: " << (out / "manifest.json").string() << "\n";
    std::cout << "views: " << m.views.size() << " (" << m.count(false) << " train, " << m.count(true) << " test)\n";
    std::cout << "haze: " << haze_to_json(haze).dump() << "\n";
    return 0;
}

int cmd_train(const Common& g, bool seed_given, const fs::path& data, const fs::path& config, const fs::path& model,
              const fs::path& out, bool resume)
{
    TrainConfig cfg;
    ModelConfig mc;
    if (!config.empty()) {
        json j = read_json(config);
        if (j.is_object() && j.contains("model")) {
            mc = model_config_from_json(j.at("model"));
            j.erase("model");
        }
        cfg = config_from_json(j);
    }
    if (!model.empty())
        mc = model_config_from_json(read_json(model));
    if (seed_given)
        cfg.seed = g.seed;
    cfg.threads = g.threads;
    validate_config(cfg);

    const Dataset d = load_dataset(manifest_path(data));
    mc.background = d.manifest.background;
    SceneModel scene = make_model(mc, cfg.seed);
    const TrainStats st = train(d, scene, cfg, out, resume);
    std::cout << "iterations: " << st.iterations_run << "\n";
    std::cout << "final loss: " << st.last_loss << "\n";
    std::cout << "checkpoint: " << st.final_checkpoint.string() << "\n";
    return 0;
}

int cmd_render(const Common& g, const fs::path& ckpt, const fs::path& data, const std::string& view,
               const fs::path& camera_file, const std::string& mode, int samples, const fs::path& out)
{
    const SceneModel scene = load_any_scene(ckpt, g.seed);
    Camera cam;
    if (!camera_file.empty()) {
        cam = camera_from_json(read_json(camera_file));
    } else {
        if (data.empty())
            throw Error("render: --view needs --data (or pass --camera)");
        const DatasetManifest m = manifest_from_json(read_json(manifest_path(data)));
        const ManifestView* found = nullptr;
        for (const auto& v : m.views)
            if (v.name == view)
                found = &v;
        if (!found) {
            std::size_t idx = 0;
            try {
                std::size_t used = 0;
                idx = std::stoul(view, &used);
                if (used != view.size())
                    throw std::invalid_argument(view);
            } catch (const std::exception&) {
                throw Error("render: no view named '" + view + "'");
            }
            if (idx >= m.views.size())
                throw Error("render: view index " + view + " out of range");
            found = &m.views[idx];
        }
        cam = found->camera;
    }
    validate_camera(cam);

    RenderOptions opt;
    opt.n_samples = samples;
    opt.seed = g.seed;
    opt.exact = scene.is_analytic();
    const auto px = render_image(scene, cam, opt, g.threads);
    const bool depth = mode == "depth";
    Image img(cam.width, cam.height, depth ? 1 : 3);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const RenderOutput& o = px[static_cast<std::size_t>(y) * cam.width + x];
            if (depth) {
                img.at(x, y, 0) = o.depth;
                continue;
            }
            const Rgb& c = mode == "hazy" ? o.hazy : mode == "clear" ? o.clear : o.haze;
            for (int k = 0; k < 3; ++k)
                img.at(x, y, k) = c[k];
        }
    if (out.has_parent_path())
        fs::create_directories(out.parent_path());
    if (depth)
        write_pfm(out, img);
    else
        write_png16(out, img);
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

int cmd_eval(const Common& g, const fs::path& ckpt, const fs::path& data, const std::string& split, int samples,
             int geometry_points, const fs::path& out)
{
    const SceneModel scene = load_any_scene(ckpt, g.seed);
    const Dataset d = load_dataset(manifest_path(data));
    const EvalReport r = evaluate(scene, d, split == "test", samples, g.threads, geometry_points);
    json j = r.to_json();
    j["split"] = split;
    std::cout << j.dump(2) << "\n";
    if (!out.empty()) {
        write_json(out, j);
        fs::path csv = out;
        csv.replace_extension(".csv");
        std::ofstream c(csv);
        c << "metric,value\n";
        for (const auto& [k, v] : j.items())
            if (v.is_number())
                c << k << "," << v.get<double>() << "\n";
        if (!c)
            throw Error("cannot write " + csv.string());
    }
    return 0;
}

int cmd_check(const Common& g, const std::string& suite)
{
    const auto results = run_checks(suite, g.seed, g.threads);
    int failed = 0;
    for (const auto& r : results) {
        std::printf("%-4s %-12s %-40s worst=%.3e limit=%.3e %.2fs %s\n", r.pass ? "PASS" : "FAIL", r.suite.c_str(),
                    r.name.c_str(), r.worst, r.limit, r.seconds, r.detail.c_str());
        failed += r.pass ? 0 : 1;
    }
    std::printf("%zu checks, %d failed\n", results.size(), failed);
    return failed == 0 ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Scattering-aware differentiable volume renderer"};
    app.require_subcommand(1);
    Common g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (default from HAZERF_THREADS)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    auto* synth = app.add_subcommand("synth", "Render a synthetic hazy dataset");
    std::string scene = "sphere", haze = "none";
    int views = 30, res = 64, oracle = 1024;
    double radius = 2.5;
    fs::path synth_out;
    synth->add_option("--scene", scene, "Scene name")->check(CLI::IsMember(standard_scene_names()))->capture_default_str();
    synth->add_option("--haze", haze, "none | homogeneous:S[:C|:R,G,B] | koschmieder:S[:C] | blobs:amp=A[:n=K]")
        ->capture_default_str();
    synth->add_option("--views", views, "Number of views (>= 2)")->check(CLI::Range(2, 100000))->capture_default_str();
    synth->add_option("--res", res, "Image side in pixels")->check(CLI::Range(1, 4096))->capture_default_str();
    synth->add_option("--radius", radius, "Camera distance from the origin (> 1)")->capture_default_str();
    synth->add_option("--oracle-samples", oracle, "Medium samples per ray (>= 1024)")
        ->check(CLI::Range(1024, 1 << 24))
        ->capture_default_str();
    synth->add_option("--out", synth_out, "Output directory")->required();

    auto* trn = app.add_subcommand("train", "Fit a model to a dataset");
    fs::path data, config, model, train_out;
    bool resume = false;
    trn->add_option("--data", data, "Dataset directory or manifest")->required();
    trn->add_option("--config", config, "Training config (JSON; optional \"model\" object)");
    trn->add_option("--model", model, "Model config (JSON), overrides the config's \"model\"");
    trn->add_option("--out", train_out, "Run directory")->required();
    trn->add_flag("--resume", resume, "Continue from the newest checkpoint in --out");

    auto* ren = app.add_subcommand("render", "Render one view of a model");
    fs::path ckpt, ren_data, camera, ren_out;
    std::string view = "0", mode = "hazy";
    int samples = 64;
    ren->add_option("--ckpt", ckpt, "Checkpoint, dataset manifest (ground truth) or scene JSON")->required();
    ren->add_option("--data", ren_data, "Dataset directory or manifest providing --view");
    ren->add_option("--view", view, "View name or index")->capture_default_str();
    ren->add_option("--camera", camera, "Camera JSON instead of a dataset view");
    ren->add_option("--mode", mode, "Output channel")
        ->check(CLI::IsMember({"hazy", "clear", "haze", "depth"}))
        ->capture_default_str();
    ren->add_option("--samples", samples, "Samples per ray")->check(CLI::PositiveNumber)->capture_default_str();
    ren->add_option("--out", ren_out, "Output file (PNG, or PFM for depth)")->required();

    auto* evl = app.add_subcommand("eval", "Compare clear renders with the ground truth");
    fs::path eval_ckpt, eval_data, eval_out;
    std::string split = "test";
    int eval_samples = 64, geometry_points = 10000;
    evl->add_option("--ckpt", eval_ckpt, "Checkpoint, dataset manifest (ground truth) or scene JSON")->required();
    evl->add_option("--data", eval_data, "Dataset directory or manifest")->required();
    evl->add_option("--split", split, "Views to evaluate")->check(CLI::IsMember({"train", "test"}))->capture_default_str();
    evl->add_option("--samples", eval_samples, "Samples per ray")->check(CLI::PositiveNumber)->capture_default_str();
    evl->add_option("--geometry-points", geometry_points, "Surface points for the geometry error (0 skips)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    evl->add_option("--out", eval_out, "Report path (JSON; a CSV is written beside it)");

    auto* chk = app.add_subcommand("check", "Run the property-check suite");
    std::string suite = "all";
    chk->add_option("--suite", suite, "Suite")->check(CLI::IsMember(check_suites()))->capture_default_str();

    // accepted before or after the subcommand, and listed in every --help
    for (auto* sub : {synth, trn, ren, evl, chk}) {
        sub->add_option("--seed", g.seed, "Random seed")->capture_default_str();
        sub->add_option("--threads", g.threads, "Worker threads (default from HAZERF_THREADS)")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        const bool seed_given = app.count("--seed") > 0 || trn->count("--seed") > 0;
        if (*synth)
            return cmd_synth(g, scene, haze, views, res, radius, oracle, synth_out);
        if (*trn)
            return cmd_train(g, seed_given, data, config, model, train_out, resume);
        if (*ren)
            return cmd_render(g, ckpt, ren_data, view, camera, mode, samples, ren_out);
        if (*evl)
            return cmd_eval(g, eval_ckpt, eval_data, split, eval_samples, geometry_points, eval_out);
        return cmd_check(g, suite);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}
