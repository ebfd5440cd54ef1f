#include <doctest.h>

#include "hazerf/diffcore/checkpoint.hpp"
#include "hazerf/diffcore/grad_check.hpp"
#include "hazerf/diffcore/tape.hpp"
#include "hazerf/error.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

using namespace hazerf;

namespace {

Program unary(std::size_t arity, std::function<Var(Tape&, const ParamStore&, Var)> f)
{
    return Program{arity, std::move(f)};
}

std::vector<double> randoms(std::mt19937_64& rng, std::size_t n, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v)
        x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("forward examples")
{
    ParamStore params;
    params.add("w", {2}, {2.0, 3.0});

    Tape t1;
    auto id = unary(1, [](Tape&, const ParamStore&, Var x) { return x; });
    CHECK(forward(t1, params, id, std::vector<double>{3.0}) == std::vector<double>{3.0});

    Tape t2;
    auto sig = unary(1, [](Tape& t, const ParamStore&, Var x) { return t.sigmoid(x); });
    CHECK(forward(t2, params, sig, std::vector<double>{0.0})[0] == doctest::Approx(0.5).epsilon(1e-15));

    Tape t3;
    auto dot = unary(2, [](Tape& t, const ParamStore& p, Var x) {
        return t.sum(t.mul(t.param(p, "w"), x));
    });
    CHECK(forward(t3, params, dot, std::vector<double>{1.0, 1.0})[0] == 5.0);
}

TEST_CASE("forward errors")
{
    ParamStore params;
    params.add("w", {2}, {2.0, 3.0});
    Tape t;
    auto bad_name = unary(1, [](Tape& t, const ParamStore& p, Var x) { return t.mul(t.param(p, "nope"), x); });
    CHECK_THROWS_AS(forward(t, params, bad_name, std::vector<double>{1.0}), Error);

    auto bad_shape = unary(3, [](Tape& t, const ParamStore& p, Var x) { return t.mul(t.param(p, "w"), x); });
    CHECK_THROWS_AS(forward(t, params, bad_shape, std::vector<double>{1.0, 2.0, 3.0}), Error);

    auto two = unary(2, [](Tape&, const ParamStore&, Var x) { return x; });
    CHECK_THROWS_AS(forward(t, params, two, std::vector<double>{1.0}), Error);
}

TEST_CASE("backward examples")
{
    const double one = 1.0;
    {
        ParamStore params;
        params.add("w", {1}, {2.0});
        Tape t;
        auto p = unary(1, [](Tape& t, const ParamStore& ps, Var x) { return t.mul(t.param(ps, "w"), x); });
        forward(t, params, p, std::vector<double>{3.0});
        backward(t, params, std::span<const double>(&one, 1));
        CHECK(params.at("w").grad[0] == 3.0);
    }
    {
        ParamStore params;
        params.add("w", {1}, {0.0});
        Tape t;
        auto p = unary(0, [](Tape& t, const ParamStore& ps, Var) { return t.exp(t.param(ps, "w")); });
        forward(t, params, p, {});
        backward(t, params, std::span<const double>(&one, 1));
        CHECK(params.at("w").grad[0] == 1.0);
    }
    {
        ParamStore params;
        params.add("w", {1}, {0.0});
        Tape t;
        auto p = unary(0, [](Tape& t, const ParamStore& ps, Var) { return t.sigmoid(t.param(ps, "w")); });
        forward(t, params, p, {});
        backward(t, params, std::span<const double>(&one, 1));
        CHECK(params.at("w").grad[0] == 0.25);

        const std::vector<double> two{1.0, 1.0};
        CHECK_THROWS_AS(backward(t, params, two), Error);
    }
}

TEST_CASE("param store invariants")
{
    ParamStore params;
    params.add("a", {2, 3});
    CHECK(params.at("a").values.size() == 6);
    CHECK(params.at("a").grad.size() == 6);
    CHECK_THROWS_AS(params.add("a", {1}), Error);
    CHECK_THROWS_AS(params.at("missing"), Error);
    CHECK_THROWS_AS(params.add("b", {0}), Error);
    CHECK_THROWS_AS(params.add("c", {2}, {1.0}), Error);
    params.at("a").grad[3] = 7.0;
    params.zero_grad();
    for (double g : params.at("a").grad)
        CHECK(g == 0.0);
}

TEST_CASE("finite_diff_check examples")
{
    ParamStore params;
    params.add("w", {1}, {1.5});
    auto sq = unary(0, [](Tape& t, const ParamStore& p, Var) { return t.square(t.param(p, "w")); });
    auto rep = finite_diff_check(params, sq, 1e-5, 1e-8);
    CHECK(rep.pass);
    CHECK(rep.entries[0].analytic == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(rep.max_rel_error < 1e-8);

    ParamStore p2;
    p2.add("w", {1}, {2.0});
    auto cl = unary(0, [](Tape& t, const ParamStore& p, Var) { return t.clamp(t.param(p, "w"), 0.0, 1.0); });
    auto rep2 = finite_diff_check(p2, cl, 1e-5, 1e-8);
    CHECK(rep2.pass);
    CHECK(rep2.entries[0].analytic == 0.0);
    CHECK(rep2.entries[0].numeric == 0.0);

    ParamStore p3;
    p3.add("w", {2}, {1.0, 2.0});
    auto vec = unary(0, [](Tape& t, const ParamStore& p, Var) { return t.param(p, "w"); });
    CHECK_THROWS_AS(finite_diff_check(p3, vec, 1e-5, 1e-4), Error);
    CHECK_THROWS_AS(finite_diff_check(p3, sq, 0.0, 1e-4), Error);
}

TEST_CASE("clamp boundary subgradient is one")
{
    ParamStore params;
    params.add("w", {1}, {1.0});
    Tape t;
    const Var y = t.clamp(t.param(params, "w"), 0.0, 1.0);
    t.backward(y, Matrix::Ones(1, 1), params);
    CHECK(params.at("w").grad[0] == 1.0);
}

// Every primitive against central differences, away from kinks.
TEST_CASE("primitive gradients match central differences")
{
    std::mt19937_64 rng(7);
    ParamStore params;
    params.add("a", {3, 4}, randoms(rng, 12, 0.3, 1.7));
    params.add("b", {3, 4}, randoms(rng, 12, 0.3, 1.7));
    params.add("row", {4}, randoms(rng, 4, -1.0, 1.0));
    params.add("col", {3, 1}, randoms(rng, 3, -1.0, 1.0));
    params.add("s", {1}, {0.7});
    params.add("m", {4, 2}, randoms(rng, 8, -1.0, 1.0));
    params.add("tall", {6, 4}, randoms(rng, 24, -1.0, 1.0));
    params.add("w", {3, 4}, randoms(rng, 12, 0.1, 0.9));
    params.add("c", {12, 2}, randoms(rng, 24, -1.0, 1.0));

    // weighted sum so every output entry contributes a distinct adjoint
    auto reduce = [](Tape& t, Var v) {
        const Matrix& m = t.value(v);
        Matrix k(m.rows(), m.cols());
        for (Eigen::Index i = 0; i < k.size(); ++i)
            k.data()[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
        return t.sum(t.mul(v, t.constant(k)));
    };

    using Build = std::function<Var(Tape&, const ParamStore&)>;
    const std::vector<std::pair<const char*, Build>> cases = {
        {"add", [](Tape& t, const ParamStore& p) { return t.add(t.param(p, "a"), t.param(p, "b")); }},
        {"sub", [](Tape& t, const ParamStore& p) { return t.sub(t.param(p, "a"), t.param(p, "b")); }},
        {"mul", [](Tape& t, const ParamStore& p) { return t.mul(t.param(p, "a"), t.param(p, "b")); }},
        {"ratio", [](Tape& t, const ParamStore& p) { return t.ratio_or_zero(t.param(p, "a"), t.param(p, "b")); }},
        {"scale", [](Tape& t, const ParamStore& p) { return t.scale(t.param(p, "a"), -2.5); }},
        {"add_scalar", [](Tape& t, const ParamStore& p) { return t.add_scalar(t.param(p, "a"), 4.0); }},
        {"exp", [](Tape& t, const ParamStore& p) { return t.exp(t.param(p, "a")); }},
        {"log", [](Tape& t, const ParamStore& p) { return t.log(t.param(p, "a")); }},
        {"sigmoid", [](Tape& t, const ParamStore& p) { return t.sigmoid(t.param(p, "a")); }},
        {"softplus", [](Tape& t, const ParamStore& p) { return t.softplus(t.param(p, "row"), 3.0); }},
        {"clamp", [](Tape& t, const ParamStore& p) { return t.clamp(t.param(p, "a"), 0.0, 10.0); }},
        {"sin", [](Tape& t, const ParamStore& p) { return t.sin(t.param(p, "a")); }},
        {"cos", [](Tape& t, const ParamStore& p) { return t.cos(t.param(p, "a")); }},
        {"abs", [](Tape& t, const ParamStore& p) { return t.abs(t.param(p, "row")); }},
        {"square", [](Tape& t, const ParamStore& p) { return t.square(t.param(p, "a")); }},
        {"sqrt", [](Tape& t, const ParamStore& p) { return t.sqrt(t.param(p, "a")); }},
        {"add_row", [](Tape& t, const ParamStore& p) { return t.add_row(t.param(p, "a"), t.param(p, "row")); }},
        {"mul_col", [](Tape& t, const ParamStore& p) { return t.mul_col(t.param(p, "a"), t.param(p, "col")); }},
        {"mul_scalar", [](Tape& t, const ParamStore& p) { return t.mul_scalar(t.param(p, "a"), t.param(p, "s")); }},
        {"outer", [](Tape& t, const ParamStore& p) { return t.outer(t.param(p, "col"), t.param(p, "row")); }},
        {"mul_rowtile",
         [](Tape& t, const ParamStore& p) {
             return t.slice_cols(t.reshape(t.mul_rowtile(t.param(p, "tall"), t.param(p, "a")), 3, 8), 0, 4);
         }},
        {"matmul",
         [](Tape& t, const ParamStore& p) {
             return t.concat_cols(t.matmul(t.param(p, "a"), t.param(p, "m")),
                                  t.matmul(t.param(p, "b"), t.param(p, "m")));
         }},
        {"transpose",
         [](Tape& t, const ParamStore& p) { return t.reshape(t.transpose(t.param(p, "a")), 3, 4); }},
        {"slice", [](Tape& t, const ParamStore& p) { return t.concat_cols(t.slice_cols(t.param(p, "a"), 1, 2),
                                                                          t.slice_cols(t.param(p, "b"), 0, 2)); }},
        {"row_sum",
         [](Tape& t, const ParamStore& p) { return t.outer(t.row_sum(t.param(p, "a")), t.param(p, "row")); }},
        {"row_mean",
         [](Tape& t, const ParamStore& p) { return t.outer(t.row_mean(t.param(p, "a")), t.param(p, "row")); }},
        {"row_min",
         [](Tape& t, const ParamStore& p) { return t.outer(t.row_min(t.param(p, "a")), t.param(p, "row")); }},
        {"window_min",
         [](Tape& t, const ParamStore& p) {
             return t.reshape(t.window_min(t.reshape(t.param(p, "a"), 12, 1), 3, 4, 3), 3, 4);
         }},
        {"cumprod",
         [](Tape& t, const ParamStore& p) { return t.slice_cols(t.exclusive_cumprod(t.param(p, "w")), 1, 4); }},
        {"weighted_sum",
         [](Tape& t, const ParamStore& p) {
             return t.concat_cols(t.sample_weighted_sum(t.param(p, "w"), t.param(p, "c")),
                                  t.slice_cols(t.param(p, "w"), 0, 2));
         }},
        {"mean", [](Tape& t, const ParamStore& p) { return t.outer(t.row_sum(t.param(p, "col")),
                                                                   t.mean(t.param(p, "row"))); }},
    };

    for (const auto& [name, build] : cases) {
        CAPTURE(name);
        Program prog{0, [&, b = build](Tape& t, const ParamStore& p, Var) { return reduce(t, b(t, p)); }};
        const auto rep = finite_diff_check(params, prog, 1e-6, 1e-6);
        CHECK(rep.pass);
        CHECK(rep.max_rel_error < 1e-6);
    }
}

TEST_CASE("cumprod gradient with exact zeros")
{
    ParamStore params;
    params.add("x", {1, 4}, {0.5, 0.0, 0.25, 0.0});
    Program prog{0, [](Tape& t, const ParamStore& p, Var) {
                     return t.sum(t.exclusive_cumprod(t.param(p, "x")));
                 }};
    // out = 1 + x0 + x0 x1 + x0 x1 x2 + x0 x1 x2 x3
    const auto rep = finite_diff_check(params, prog, 1e-6, 1e-8);
    CHECK(rep.pass);
    params.zero_grad();
    Tape t;
    forward(t, params, prog, {});
    const double one = 1.0;
    backward(t, params, std::span<const double>(&one, 1));
    const auto& g = params.at("x").grad;
    CHECK(g[0] == doctest::Approx(1.0));             // 1 + x1 + x1 x2 + ...
    CHECK(g[1] == doctest::Approx(0.5 * (1 + 0.25)));  // x0 (1 + x2 + x2 x3)
    CHECK(g[2] == doctest::Approx(0.0));
    CHECK(g[3] == doctest::Approx(0.0));
}

TEST_CASE("window_min routes each output to one input")
{
    Tape t;
    Matrix img(2 * 3 * 3, 1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < img.size(); ++i)
        img(i, 0) = u(rng);
    img(4, 0) = -1.0;  // centre of first patch
    const Var x = t.constant(img);
    const Var dc = t.window_min(x, 3, 3, 3);
    const auto& am = t.argmins(dc);
    REQUIRE(am.size() == 18);
    for (int i = 0; i < 9; ++i) {
        CHECK(am[static_cast<std::size_t>(i)] == 4);
        CHECK(t.value(dc)(i, 0) == -1.0);
    }
    for (int i = 9; i < 18; ++i) {
        CHECK(am[static_cast<std::size_t>(i)] >= 9);
        CHECK(am[static_cast<std::size_t>(i)] < 18);
    }
    CHECK_THROWS_AS(t.window_min(x, 3, 3, 2), Error);
    CHECK_THROWS_AS(t.window_min(x, 3, 3, 5), Error);
}

TEST_CASE("row_min ties resolve to the lowest index")
{
    Tape t;
    Matrix m(1, 3);
    m << 0.2, 0.1, 0.1;
    const Var r = t.row_min(t.constant(m));
    CHECK(t.argmins(r)[0] == 1);
}

TEST_CASE("adjoints are linear and backward is deterministic")
{
    std::mt19937_64 rng(11);
    ParamStore params;
    params.add("w1", {3, 5}, randoms(rng, 15, -1, 1));
    params.add("b1", {5}, randoms(rng, 5, -1, 1));
    params.add("w2", {5, 2}, randoms(rng, 10, -1, 1));
    Program mlp{3, [](Tape& t, const ParamStore& p, Var x) {
                    Var h = t.softplus(t.add_row(t.matmul(x, t.param(p, "w1")), t.param(p, "b1")), 10.0);
                    return t.sigmoid(t.matmul(h, t.param(p, "w2")));
                }};
    const std::vector<double> in{0.3, -0.2, 0.9};
    const std::vector<double> a{0.7, -1.3};
    const std::vector<double> b{2.1, 0.4};
    const std::vector<double> ab{a[0] + b[0], a[1] + b[1]};

    auto grads = [&](const std::vector<double>& adj) {
        params.zero_grad();
        Tape t;
        forward(t, params, mlp, in);
        backward(t, params, adj);
        std::vector<double> all;
        for (const auto& e : params.entries())
            all.insert(all.end(), e.grad.begin(), e.grad.end());
        return all;
    };
    const auto ga = grads(a);
    const auto gb = grads(b);
    const auto gab = grads(ab);
    for (std::size_t i = 0; i < ga.size(); ++i)
        CHECK(gab[i] == doctest::Approx(ga[i] + gb[i]).epsilon(1e-12));

    const auto again = grads(ab);
    CHECK(std::memcmp(again.data(), gab.data(), gab.size() * sizeof(double)) == 0);
}

TEST_CASE("gradient buffers merge by summation")
{
    ParamStore params;
    params.add("w", {2}, {1.0, 2.0});
    GradientBuffer buf(params);
    Tape t;
    const Var y = t.sum(t.square(t.param(params, "w")));
    t.backward(y, Matrix::Ones(1, 1), buf);
    CHECK(params.at("w").grad[0] == 0.0);
    buf.add_into(params, 0.5);
    CHECK(params.at("w").grad[0] == 1.0);
    CHECK(params.at("w").grad[1] == 2.0);
}

TEST_CASE("checkpoint round trip is bit exact")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        ParamStore params;
        const int n = 1 + static_cast<int>(rng() % 5);
        for (int i = 0; i < n; ++i) {
            const std::size_t r = 1 + rng() % 4;
            const std::size_t c = 1 + rng() % 6;
            std::vector<double> v(r * c);
            for (auto& x : v)
                x = std::bit_cast<double>(rng() & 0x7fefffffffffffffULL);  // arbitrary finite bit patterns
            if (trial == 0)
                v[0] = -0.0;
            params.add("p" + std::to_string(i), i % 2 ? std::vector<std::size_t>{r, c} : std::vector<std::size_t>{r * c},
                       v);
        }
        std::stringstream ss;
        write_checkpoint(ss, params);
        const ParamStore back = read_checkpoint(ss);
        CHECK(back == params);
    }
    std::stringstream bad("NOTACKPT");
    CHECK_THROWS_AS(read_checkpoint(bad), Error);
}
