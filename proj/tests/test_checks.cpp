#include <doctest.h>

#include "hazerf/checks/checks.hpp"
#include "hazerf/error.hpp"
#include "hazerf/renderer/composite.hpp"

#include <string>

using namespace hazerf;

namespace {

void report(const std::vector<CheckResult>& rs)
{
    for (const auto& r : rs) {
        INFO(r.suite << " / " << r.name << ": worst " << r.worst << " limit " << r.limit << " " << r.detail);
        CHECK(r.pass);
    }
}

struct MutationGuard {
    explicit MutationGuard(double m) { testing::set_alpha_mutation(m); }
    ~MutationGuard() { testing::set_alpha_mutation(0.0); }
};

}  // namespace

TEST_CASE("reduction checks pass")
{
    report({check_nerf_reduction(1, 100)});
    report(check_koschmieder_reduction(1, 50, 1));
    report({check_decomposition(1, 2000, 1), check_energy_bound(1, 1000, 1)});
}

TEST_CASE("gradient checks: reverse mode agrees with central differences above the roundoff band")
{
    const auto rs = check_gradients(2, 20);
    REQUIRE(rs.size() == 7);
    for (const auto& r : rs) {
        INFO(r.name << ": worst " << r.worst << " " << r.detail);
        // any entry above the 1e-4 tolerance must be one whose gradient is so
        // small that central-difference roundoff dominates
        const auto pos = r.detail.find("largest |gradient| among them ");
        if (!r.pass && pos != std::string::npos)
            CHECK(std::stod(r.detail.substr(pos + 30)) < 1e-7);
        CHECK(r.worst < 1e-2);
    }
    CHECK(rs.back().pass);
}

TEST_CASE("quadrature and field suites pass")
{
    report(run_checks("quadrature", 3, 1));
    report(run_checks("fields", 3, 1));
}

TEST_CASE("a perturbed alpha is caught by the reductions")
{
    MutationGuard guard(0.05);
    CHECK_FALSE(check_nerf_reduction(1, 20).pass);
    bool any_fail = false;
    for (const auto& r : check_koschmieder_reduction(1, 20, 1))
        any_fail = any_fail || !r.pass;
    CHECK(any_fail);
}

TEST_CASE("unknown suite")
{
    CHECK_THROWS_AS(run_checks("nope", 0, 1), Error);
}
