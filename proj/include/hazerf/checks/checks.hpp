#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hazerf {

struct CheckResult {
    std::string suite;
    std::string name;
    bool pass = false;
    double worst = 0.0;  // worst observed error
    double limit = 0.0;  // tolerance it was compared against
    double seconds = 0.0;
    std::string detail;
};

// Individual checks. Every check draws its random configuration from `seed`.

/// Zero scattering: hazy render equals clear render bitwise on `cases`
/// random scenes, one random ray each.
CheckResult check_nerf_reduction(std::uint64_t seed, int cases);

/// Opaque sphere in a homogeneous medium against the 2-D closed form, for
/// sigma_s in {0.1, 0.5, 1.0}: one result per sigma at 4096 samples, plus a
/// result asserting that the mean error shrinks for 256 -> 512 -> 1024 -> 2048.
std::vector<CheckResult> check_koschmieder_reduction(std::uint64_t seed, int rays, int threads);

/// hazy - (surface + haze) on random rays through a heterogeneous scene.
CheckResult check_decomposition(std::uint64_t seed, int rays, int threads);

/// Opacity <= 1 and hazy, clear within [0, 1] on random rays.
CheckResult check_energy_bound(std::uint64_t seed, int rays, int threads);

/// One finite-difference check per loss term and for the weighted total,
/// each composed through the renderer on `rays` random 8-sample rays of a
/// small fully learnable scene.
std::vector<CheckResult> check_gradients(std::uint64_t seed, int rays);

/// Suite names accepted by run_checks: all, reductions, gradients, quadrature, fields.
const std::vector<std::string>& check_suites();

/// Runs a suite; throws hazerf::Error on an unknown suite name.
std::vector<CheckResult> run_checks(std::string_view suite, std::uint64_t seed, int threads);

}  // namespace hazerf
