#include "hazerf/renderer/ray.hpp"

#include "hazerf/error.hpp"
#include "hazerf/util/rng.hpp"

#include <cmath>

namespace hazerf {

void validate_ray(const Ray& ray)
{
    if (!ray.origin.allFinite() || std::abs(ray.direction.norm() - 1.0) > 1e-12)
        throw Error("ray: direction must be unit length");
    if (!(ray.t_near > 0.0 && ray.t_near < ray.t_far) || !std::isfinite(ray.t_far))
        throw Error("ray: need 0 < t_near < t_far");
}

SampleSet sample_ray(const Ray& ray, int n_samples, bool stratified, std::uint64_t seed)
{
    if (n_samples < 2)
        throw Error("sample_ray: need at least 2 samples");
    validate_ray(ray);
    const auto n = static_cast<std::size_t>(n_samples);
    const double width = (ray.t_far - ray.t_near) / n_samples;
    SampleSet s;
    s.t.resize(n);
    s.delta.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = stratified ? uniform01(hash_key({seed, ray.id, i})) : 0.5;
        s.t[i] = ray.t_near + (static_cast<double>(i) + u) * width;
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
        s.delta[i] = s.t[i + 1] - s.t[i];
    s.delta[n - 1] = ray.t_far - s.t[n - 1];
    return s;
}

}  // namespace hazerf
