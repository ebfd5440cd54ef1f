#include "hazerf/diffcore/param_store.hpp"

#include "hazerf/error.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <numeric>

namespace hazerf {

std::size_t ParamStore::add(std::string name, std::vector<std::size_t> shape, std::vector<double> init)
{
    if (index_.contains(name))
        throw Error("duplicate parameter name: " + name);
    if (shape.empty() || std::any_of(shape.begin(), shape.end(), [](std::size_t d) { return d == 0; }))
        throw Error("parameter '" + name + "' needs a shape of positive extents");
    if (shape.size() > 2)
        throw Error("parameter '" + name + "' has rank > 2");
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    if (init.empty())
        init.assign(n, 0.0);
    if (init.size() != n)
        throw Error("parameter '" + name + "': initial values do not match shape");

    Entry e;
    e.name = name;
    e.shape = std::move(shape);
    e.values = std::move(init);
    e.grad.assign(n, 0.0);
    entries_.push_back(std::move(e));
    index_.emplace(std::move(name), entries_.size() - 1);
    return entries_.size() - 1;
}

bool ParamStore::contains(std::string_view name) const
{
    return index_.find(name) != index_.end();
}

std::size_t ParamStore::index_of(std::string_view name) const
{
    auto it = index_.find(name);
    if (it == index_.end())
        throw Error("unknown parameter: " + std::string(name));
    return it->second;
}

ParamStore::Entry& ParamStore::at(std::string_view name)
{
    return entries_[index_of(name)];
}

const ParamStore::Entry& ParamStore::at(std::string_view name) const
{
    return entries_[index_of(name)];
}

std::size_t ParamStore::total_values() const
{
    std::size_t n = 0;
    for (const auto& e : entries_)
        n += e.size();
    return n;
}

void ParamStore::zero_grad()
{
    for (auto& e : entries_)
        std::fill(e.grad.begin(), e.grad.end(), 0.0);
}

bool ParamStore::operator==(const ParamStore& other) const
{
    if (entries_.size() != other.entries_.size())
        return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& a = entries_[i];
        const auto& b = other.entries_[i];
        if (a.name != b.name || a.shape != b.shape)
            return false;
        // bitwise comparison, so that -0.0 != 0.0 and NaN payloads count
        if (std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

GradientBuffer::GradientBuffer(const ParamStore& params)
{
    grads_.reserve(params.size());
    for (const auto& e : params.entries())
        grads_.emplace_back(e.size(), 0.0);
}

void GradientBuffer::add_into(ParamStore& params, double scale) const
{
    if (grads_.size() != params.size())
        throw Error("gradient buffer does not match parameter store");
    for (std::size_t i = 0; i < grads_.size(); ++i) {
        auto& g = params.at(i).grad;
        for (std::size_t j = 0; j < g.size(); ++j)
            g[j] += scale * grads_[i][j];
    }
}

}  // namespace hazerf
