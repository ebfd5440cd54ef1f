#pragma once

#include "hazerf/diffcore/tape.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace hazerf {

/// Affine layer x W + b with W stored (in x out) and b (out).
struct Dense {
    std::size_t weight = 0;
    std::size_t bias = 0;
    int in = 0;
    int out = 0;

    Var apply(Tape& tape, const ParamStore& params, Var x) const
    {
        return tape.add_row(tape.matmul(x, tape.param(params, weight)), tape.param(params, bias));
    }
    Var apply_linear(Tape& tape, const ParamStore& params, Var x) const
    {
        return tape.matmul(x, tape.param(params, weight));
    }
};

Dense add_dense(ParamStore& params, const std::string& name, int in, int out);

/// Generator for the initial values of one named parameter; independent of
/// the order in which parameters are created.
std::mt19937_64 init_rng(std::uint64_t seed, const std::string& name);

void fill_normal(std::vector<double>& v, std::mt19937_64& rng, double mean, double stddev);
void fill_uniform(std::vector<double>& v, std::mt19937_64& rng, double lo, double hi);

}  // namespace hazerf
