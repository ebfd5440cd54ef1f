#include "hazerf/fields/scene.hpp"

#include "hazerf/error.hpp"

#include <fstream>

namespace hazerf {

using nlohmann::json;

json vec_to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec_from_json(const json& j)
{
    if (!j.is_array() || j.size() != 3)
        throw Error("scene: expected a 3-vector, got " + j.dump());
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback)
{
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

SdfField sdf_from_json(const json& j, ParamStore& params, std::uint64_t seed)
{
    const auto type = j.at("type").get<std::string>();
    if (type == "analytic") {
        AnalyticSdf a;
        for (const auto& p : j.at("primitives")) {
            const auto kind = p.at("type").get<std::string>();
            if (kind == "sphere")
                a.primitives.push_back(SpherePrimitive{vec_from_json(p.at("center")), p.at("radius").get<double>()});
            else if (kind == "plane")
                a.primitives.push_back(PlanePrimitive{vec_from_json(p.at("normal")).normalized(), p.at("offset").get<double>()});
            else if (kind == "box")
                a.primitives.push_back(BoxPrimitive{vec_from_json(p.at("center")), vec_from_json(p.at("half_extents"))});
            else
                throw Error("scene: unknown primitive '" + kind + "'");
        }
        return a;
    }
    if (type == "neural") {
        NeuralSdfConfig c;
        c.frequencies = get_or(j, "frequencies", c.frequencies);
        c.hidden = get_or(j, "hidden", c.hidden);
        c.layers = get_or(j, "layers", c.layers);
        c.skip_layer = get_or(j, "skip_layer", c.skip_layer);
        c.init_radius = get_or(j, "init_radius", c.init_radius);
        c.softplus_beta = get_or(j, "softplus_beta", c.softplus_beta);
        return NeuralSdf(c, params, seed);
    }
    throw Error("scene: unknown sdf type '" + type + "'");
}

json sdf_to_json(const SdfField& f)
{
    if (f.is_analytic()) {
        json prims = json::array();
        for (const auto& p : f.analytic().primitives) {
            if (const auto* s = std::get_if<SpherePrimitive>(&p))
                prims.push_back({{"type", "sphere"}, {"center", vec_to_json(s->center)}, {"radius", s->radius}});
            else if (const auto* pl = std::get_if<PlanePrimitive>(&p))
                prims.push_back({{"type", "plane"}, {"normal", vec_to_json(pl->normal)}, {"offset", pl->offset}});
            else {
                const auto& b = std::get<BoxPrimitive>(p);
                prims.push_back({{"type", "box"}, {"center", vec_to_json(b.center)}, {"half_extents", vec_to_json(b.half_extents)}});
            }
        }
        return {{"type", "analytic"}, {"primitives", prims}};
    }
    const auto& c = f.neural().config();
    return {{"type", "neural"},        {"frequencies", c.frequencies}, {"hidden", c.hidden},
            {"layers", c.layers},      {"skip_layer", c.skip_layer},   {"init_radius", c.init_radius},
            {"softplus_beta", c.softplus_beta}};
}

RadianceField radiance_from_json(const json& j, ParamStore& params, std::uint64_t seed)
{
    const auto type = j.at("type").get<std::string>();
    if (type == "constant")
        return ConstantRadiance{vec_from_json(j.at("color"))};
    if (type == "texture") {
        TextureRadiance t;
        t.frequency = get_or(j, "frequency", t.frequency);
        t.amplitude = get_or(j, "amplitude", t.amplitude);
        t.offset = get_or(j, "offset", t.offset);
        if (j.contains("phases"))
            t.phases = vec_from_json(j.at("phases"));
        if (j.contains("axes"))
            for (std::size_t k = 0; k < 3; ++k)
                t.axes[k] = vec_from_json(j.at("axes").at(k));
        return t;
    }
    if (type == "octant") {
        OctantRadiance o;
        const auto& cols = j.at("colors");
        if (cols.size() != 8)
            throw Error("scene: octant radiance needs 8 colours");
        for (std::size_t k = 0; k < 8; ++k)
            o.colors[k] = vec_from_json(cols[k]);
        return o;
    }
    if (type == "neural") {
        NeuralRadianceConfig c;
        c.position_frequencies = get_or(j, "position_frequencies", c.position_frequencies);
        c.direction_frequencies = get_or(j, "direction_frequencies", c.direction_frequencies);
        c.view_dependent = get_or(j, "view_dependent", c.view_dependent);
        c.hidden = get_or(j, "hidden", c.hidden);
        c.layers = get_or(j, "layers", c.layers);
        return NeuralRadiance(c, params, seed);
    }
    throw Error("scene: unknown radiance type '" + type + "'");
}

json radiance_to_json(const RadianceField& f)
{
    const auto& v = f.variant();
    if (const auto* c = std::get_if<ConstantRadiance>(&v))
        return {{"type", "constant"}, {"color", vec_to_json(c->color)}};
    if (const auto* t = std::get_if<TextureRadiance>(&v))
        return {{"type", "texture"},
                {"frequency", t->frequency},
                {"amplitude", t->amplitude},
                {"offset", t->offset},
                {"phases", vec_to_json(t->phases)},
                {"axes", {vec_to_json(t->axes[0]), vec_to_json(t->axes[1]), vec_to_json(t->axes[2])}}};
    if (const auto* o = std::get_if<OctantRadiance>(&v)) {
        json cols = json::array();
        for (const auto& c : o->colors)
            cols.push_back(vec_to_json(c));
        return {{"type", "octant"}, {"colors", cols}};
    }
    const auto& c = std::get<NeuralRadiance>(v).config();
    return {{"type", "neural"},
            {"position_frequencies", c.position_frequencies},
            {"direction_frequencies", c.direction_frequencies},
            {"view_dependent", c.view_dependent},
            {"hidden", c.hidden},
            {"layers", c.layers}};
}

ScatteringField scattering_from_json(const json& j, ParamStore& params, std::uint64_t seed)
{
    const auto type = j.at("type").get<std::string>();
    if (type == "zero")
        return ZeroScattering{};
    if (type == "constant") {
        const double s = j.at("sigma").get<double>();
        if (s < 0.0)
            throw Error("scene: negative scattering coefficient");
        return ConstantScattering{s};
    }
    if (type == "blobs") {
        BlobScattering b;
        for (const auto& e : j.at("blobs")) {
            GaussianBlob g{vec_from_json(e.at("center")), e.at("stddev").get<double>(), e.at("amplitude").get<double>()};
            if (!(g.stddev > 0.0) || g.amplitude < 0.0)
                throw Error("scene: blob needs stddev > 0 and amplitude >= 0");
            b.blobs.push_back(g);
        }
        return b;
    }
    if (type == "scalar")
        return ScalarScattering(j.at("init_sigma").get<double>(), params);
    if (type == "band_limited") {
        BandLimitedConfig c;
        c.max_frequency = get_or(j, "max_frequency", c.max_frequency);
        c.hidden = get_or(j, "hidden", c.hidden);
        c.layers = get_or(j, "layers", c.layers);
        c.init_sigma = get_or(j, "init_sigma", c.init_sigma);
        return BandLimitedScattering(c, params, seed);
    }
    throw Error("scene: unknown scattering type '" + type + "'");
}

json scattering_to_json(const ScatteringField& f, const ParamStore& params)
{
    const auto& v = f.variant();
    if (std::holds_alternative<ZeroScattering>(v))
        return {{"type", "zero"}};
    if (const auto* c = std::get_if<ConstantScattering>(&v))
        return {{"type", "constant"}, {"sigma", c->sigma}};
    if (const auto* b = std::get_if<BlobScattering>(&v)) {
        json blobs = json::array();
        for (const auto& g : b->blobs)
            blobs.push_back({{"center", vec_to_json(g.center)}, {"stddev", g.stddev}, {"amplitude", g.amplitude}});
        return {{"type", "blobs"}, {"blobs", blobs}};
    }
    if (const auto* s = std::get_if<ScalarScattering>(&v))
        return {{"type", "scalar"}, {"init_sigma", s->value(params)}};
    const auto& c = std::get<BandLimitedScattering>(v).config();
    return {{"type", "band_limited"},
            {"max_frequency", c.max_frequency},
            {"hidden", c.hidden},
            {"layers", c.layers},
            {"init_sigma", c.init_sigma}};
}

}  // namespace

SceneModel scene_from_json(const json& j, std::uint64_t seed)
{
    try {
        const int version = j.at("version").get<int>();
        if (version != kSceneFileVersion)
            throw Error("scene: unsupported version " + std::to_string(version));
        SceneModel s;
        s.sdf = sdf_from_json(j.at("sdf"), s.params, seed);
        s.radiance = radiance_from_json(j.at("radiance"), s.params, seed);
        s.scattering = j.contains("scattering") ? scattering_from_json(j.at("scattering"), s.params, seed)
                                                : ScatteringField{};
        if (j.contains("atmospheric_light")) {
            const auto& a = j.at("atmospheric_light");
            const Vec3 value = vec_from_json(a.at("value"));
            s.airlight = get_or(a, "learnable", false) ? AtmosphericLight(value, s.params) : AtmosphericLight(value);
        }
        if (j.contains("sharpness")) {
            const auto& sh = j.at("sharpness");
            const double value = sh.at("value").get<double>();
            s.sharpness = get_or(sh, "learnable", false) ? Sharpness(value, s.params) : Sharpness(value);
        }
        if (j.contains("background"))
            s.background = vec_from_json(j.at("background"));
        return s;
    } catch (const json::exception& e) {
        throw Error(std::string("scene: malformed description: ") + e.what());
    }
}

SceneModel load_scene_file(const std::filesystem::path& path, std::uint64_t seed)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open scene file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("scene file " + path.string() + ": " + e.what());
    }
    return scene_from_json(j, seed);
}

json scene_to_json(const SceneModel& s)
{
    json j;
    j["version"] = kSceneFileVersion;
    j["sdf"] = sdf_to_json(s.sdf);
    j["radiance"] = radiance_to_json(s.radiance);
    j["scattering"] = scattering_to_json(s.scattering, s.params);
    j["atmospheric_light"] = {{"learnable", s.airlight.learnable()}, {"value", vec_to_json(s.airlight.value(s.params))}};
    j["sharpness"] = {{"learnable", s.sharpness.learnable()}, {"value", s.sharpness.value(s.params)}};
    j["background"] = vec_to_json(s.background);
    return j;
}

}  // namespace hazerf
