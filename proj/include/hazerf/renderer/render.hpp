#pragma once

#include "hazerf/fields/scene.hpp"
#include "hazerf/renderer/camera.hpp"
#include "hazerf/renderer/composite.hpp"

#include <optional>
#include <span>

namespace hazerf {

struct RenderOptions {
    int n_samples = 64;
    bool stratified = false;
    std::uint64_t seed = 0;
    /// When false the medium is replaced by zero scattering and black airlight.
    bool haze = true;
    /// Overrides the scene background.
    std::optional<Rgb> background;
    /// Analytic scenes only: trace the surface exactly and integrate the
    /// medium with `exact_haze_samples` midpoint steps.
    bool exact = false;
    int exact_haze_samples = 4096;
    /// Exact mode with a constant medium: apply the 2-D Koschmieder law to
    /// the traced clear colour and depth instead of integrating.
    bool koschmieder = false;
};

/// Tape nodes for a batch of K rays.
struct RenderBatch {
    Var hazy;         // K x 3
    Var surface;      // K x 3
    Var haze;         // K x 3
    Var clear;        // K x 3
    Var depth;        // K x 1
    Var opacity;      // K x 1
    Var sigma_s_bar;  // K x 1
    Var c_s_bar;      // K x 3
    Var grad_norm;    // K*N x 1, |grad f| at every sample
    Eigen::Index rays = 0;
};

/// Quadrature render recorded on `tape`. The residual transmittance after
/// the last sample is composited against the background in both the clear
/// and the hazy image, so the background is attenuated by the medium.
RenderBatch render_batch(Tape& tape, const SceneModel& scene, std::span<const Ray> rays, const RenderOptions& opt);

RenderOutput render_pixel(const SceneModel& scene, const Ray& ray, int n_samples, std::uint64_t seed,
                          const Rgb& background);

/// Exact surface tracing for analytic scenes.
RenderOutput render_exact(const SceneModel& scene, const Ray& ray, const RenderOptions& opt);

/// Renders rays in fixed chunks of `chunk` rays, in parallel; the result
/// does not depend on `threads`.
std::vector<RenderOutput> render_rays(const SceneModel& scene, std::span<const Ray> rays, const RenderOptions& opt,
                                      int threads, std::size_t chunk = 256);

/// Row-major, top-left first. Ray ids are the pixel indices.
std::vector<RenderOutput> render_image(const SceneModel& scene, const Camera& cam, const RenderOptions& opt,
                                       int threads);

}  // namespace hazerf
