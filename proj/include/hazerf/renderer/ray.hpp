#pragma once

#include "hazerf/util/vec.hpp"

#include <cstdint>
#include <vector>

namespace hazerf {

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();
    double t_near = 1e-4;
    double t_far = 1.0;
    /// Key for the stratified jitter stream of this ray.
    std::uint64_t id = 0;
};

/// Throws unless the direction is unit length and 0 < t_near < t_far.
void validate_ray(const Ray& ray);

struct SampleSet {
    std::vector<double> t;
    /// delta[n] = t[n+1] - t[n]; the last one reaches t_far.
    std::vector<double> delta;

    std::size_t size() const { return t.size(); }
};

/// Bin centres of n uniform bins over [t_near, t_far]; with `stratified`
/// each sample is instead drawn uniformly inside its bin from a generator
/// keyed by (seed, ray.id, bin).
SampleSet sample_ray(const Ray& ray, int n_samples, bool stratified, std::uint64_t seed);

}  // namespace hazerf
