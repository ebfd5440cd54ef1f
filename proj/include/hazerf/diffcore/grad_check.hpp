#pragma once

#include "hazerf/diffcore/param_store.hpp"
#include "hazerf/diffcore/tape.hpp"

#include <span>
#include <string>
#include <vector>

namespace hazerf {

struct GradCheckReport {
    struct Entry {
        std::string name;
        double max_rel_error = 0.0;
        std::size_t worst_index = 0;
        double analytic = 0.0;
        double numeric = 0.0;
    };
    std::vector<Entry> entries;
    double max_rel_error = 0.0;
    bool pass = false;
};

/// Compares reverse-mode gradients of a scalar program with central
/// differences (f(w+eps) - f(w-eps)) / (2 eps) for every parameter entry.
/// Relative error uses the denominator max(|analytic|, |numeric|, 1e-8).
/// `params` values are restored on return; gradients are left zeroed.
GradCheckReport finite_diff_check(ParamStore& params, const Program& scalar_program, double epsilon,
                                  double tolerance, std::span<const double> input = {});

}  // namespace hazerf
