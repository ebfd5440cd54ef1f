#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hazerf {

/// Flat named collection of trainable reals. Every learnable quantity of a
/// scene model lives here; tapes refer to entries by index.
class ParamStore {
public:
    struct Entry {
        std::string name;
        std::vector<std::size_t> shape;
        std::vector<double> values;
        std::vector<double> grad;

        std::size_t size() const { return values.size(); }
        /// Rows/cols used when the entry is bound to a tape: rank-1 shapes
        /// become row vectors.
        std::size_t rows() const { return shape.size() == 1 ? 1 : shape[0]; }
        std::size_t cols() const { return shape.back(); }
    };

    /// Adds a new entry. `init` may be empty (zero-filled) or of the exact size.
    std::size_t add(std::string name, std::vector<std::size_t> shape, std::vector<double> init = {});

    bool contains(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;

    Entry& at(std::string_view name);
    const Entry& at(std::string_view name) const;
    Entry& at(std::size_t index) { return entries_.at(index); }
    const Entry& at(std::size_t index) const { return entries_.at(index); }

    std::size_t size() const { return entries_.size(); }
    std::size_t total_values() const;
    std::span<Entry> entries() { return entries_; }
    std::span<const Entry> entries() const { return entries_; }

    void zero_grad();

    bool operator==(const ParamStore& other) const;

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// Gradient accumulator shaped like a ParamStore, used by workers that own a
/// private tape. Merging is an ordered summation.
class GradientBuffer {
public:
    GradientBuffer() = default;
    explicit GradientBuffer(const ParamStore& params);

    std::span<double> operator[](std::size_t index) { return grads_.at(index); }
    std::span<const double> operator[](std::size_t index) const { return grads_.at(index); }
    std::size_t size() const { return grads_.size(); }

    void add_into(ParamStore& params, double scale = 1.0) const;

private:
    std::vector<std::vector<double>> grads_;
};

}  // namespace hazerf
