#include "hazerf/diffcore/checkpoint.hpp"

#include "hazerf/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace hazerf {

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'Z', 'R', 'F', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::ostream& out, T v)
{
    static_assert(std::is_integral_v<T>);
    std::array<char, sizeof(T)> b{};
    for (std::size_t i = 0; i < sizeof(T); ++i)
        b[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    out.write(b.data(), b.size());
}

template <typename T>
T get_le(std::istream& in)
{
    std::array<unsigned char, sizeof(T)> b{};
    in.read(reinterpret_cast<char*>(b.data()), b.size());
    if (!in)
        throw Error("checkpoint: unexpected end of data");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return static_cast<T>(v);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParamStore& params)
{
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& e : params.entries()) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape)
            put_le<std::uint64_t>(out, d);
        for (double v : e.values)
            put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out)
        throw Error("checkpoint: write failed");
}

ParamStore read_checkpoint(std::istream& in)
{
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic)
        throw Error("checkpoint: bad magic");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw Error("checkpoint: unsupported version " + std::to_string(version));
    const auto count = get_le<std::uint32_t>(in);
    ParamStore params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = get_le<std::uint32_t>(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        const auto rank = get_le<std::uint32_t>(in);
        if (rank == 0 || rank > 2)
            throw Error("checkpoint: bad rank for '" + name + "'");
        std::vector<std::size_t> shape(rank);
        std::size_t n = 1;
        for (auto& d : shape) {
            d = static_cast<std::size_t>(get_le<std::uint64_t>(in));
            n *= d;
        }
        std::vector<double> values(n);
        for (auto& v : values)
            v = std::bit_cast<double>(get_le<std::uint64_t>(in));
        params.add(std::move(name), std::move(shape), std::move(values));
    }
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot open checkpoint for writing: " + path.string());
    write_checkpoint(out, params);
}

ParamStore load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open checkpoint: " + path.string());
    return read_checkpoint(in);
}

void restore_values(ParamStore& dst, const ParamStore& src)
{
    if (dst.size() != src.size())
        throw Error("checkpoint/scene mismatch: " + std::to_string(src.size()) + " entries, expected " +
                    std::to_string(dst.size()));
    for (const auto& s : src.entries()) {
        if (!dst.contains(s.name))
            throw Error("checkpoint/scene mismatch: unexpected entry '" + s.name + "'");
        auto& d = dst.at(s.name);
        if (d.shape != s.shape)
            throw Error("checkpoint/scene mismatch: shape of '" + s.name + "'");
        d.values = s.values;
    }
}

}  // namespace hazerf
