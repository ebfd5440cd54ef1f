#include "hazerf/diffcore/grad_check.hpp"

#include "hazerf/error.hpp"

#include <algorithm>
#include <cmath>

namespace hazerf {

namespace {

double eval_scalar(const ParamStore& params, const Program& program, std::span<const double> input)
{
    Tape tape;
    const auto out = forward(tape, params, program, input);
    if (out.size() != 1)
        throw Error("finite_diff_check: program output is not a scalar");
    return out[0];
}

}  // namespace

GradCheckReport finite_diff_check(ParamStore& params, const Program& scalar_program, double epsilon,
                                  double tolerance, std::span<const double> input)
{
    if (!(epsilon > 0.0))
        throw Error("finite_diff_check: epsilon must be positive");

    params.zero_grad();
    Tape tape;
    const auto out = forward(tape, params, scalar_program, input);
    if (out.size() != 1)
        throw Error("finite_diff_check: program output is not a scalar");
    const double one = 1.0;
    backward(tape, params, std::span<const double>(&one, 1));

    GradCheckReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& e = params.at(p);
        GradCheckReport::Entry r;
        r.name = e.name;
        for (std::size_t i = 0; i < e.size(); ++i) {
            const double saved = e.values[i];
            e.values[i] = saved + epsilon;
            const double up = eval_scalar(params, scalar_program, input);
            e.values[i] = saved - epsilon;
            const double down = eval_scalar(params, scalar_program, input);
            e.values[i] = saved;

            const double numeric = (up - down) / (2.0 * epsilon);
            const double analytic = e.grad[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            const double rel = std::abs(analytic - numeric) / denom;
            if (i == 0 || rel > r.max_rel_error) {
                r.max_rel_error = rel;
                r.worst_index = i;
                r.analytic = analytic;
                r.numeric = numeric;
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, r.max_rel_error);
        report.entries.push_back(std::move(r));
    }
    params.zero_grad();
    report.pass = report.max_rel_error <= tolerance;
    return report;
}

}  // namespace hazerf
