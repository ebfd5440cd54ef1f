#include "hazerf/fields/mlp.hpp"

#include "hazerf/util/rng.hpp"

namespace hazerf {

Dense add_dense(ParamStore& params, const std::string& name, int in, int out)
{
    Dense d;
    d.in = in;
    d.out = out;
    d.weight = params.add(name + ".w", {static_cast<std::size_t>(in), static_cast<std::size_t>(out)});
    d.bias = params.add(name + ".b", {static_cast<std::size_t>(out)});
    return d;
}

std::mt19937_64 init_rng(std::uint64_t seed, const std::string& name)
{
    return std::mt19937_64(hash_key({seed, hash_name(name)}));
}

void fill_normal(std::vector<double>& v, std::mt19937_64& rng, double mean, double stddev)
{
    std::normal_distribution<double> n(mean, stddev);
    for (auto& x : v)
        x = n(rng);
}

void fill_uniform(std::vector<double>& v, std::mt19937_64& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& x : v)
        x = u(rng);
}

}  // namespace hazerf
