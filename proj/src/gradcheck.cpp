#include "orbitgraph/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "orbitgraph/errors.hpp"

namespace orbitgraph {
namespace {

struct Evaluation {
    double value;
    std::vector<signed char> kinks;
};

Evaluation evaluate(const TapeLossFn& loss, const std::vector<Matrix>& params) {
    Tape tape;
    std::vector<Var> handles;
    handles.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) handles.push_back(tape.parameter(params[i], i));
    const Var root = loss(tape, handles);
    return {tape.scalar(root), tape.l1_sign_pattern()};
}

GradCheckReport run_check(const TapeLossFn& loss, const ReferenceDifferenceFn* reference,
                          const std::vector<Matrix>& params, double eps) {
    if (!(eps > 0.0)) throw ContractError("finite_difference_check: eps must be positive");

    Tape tape;
    std::vector<Var> handles;
    for (std::size_t i = 0; i < params.size(); ++i) handles.push_back(tape.parameter(params[i], i));
    const Var root = loss(tape, handles);
    const Gradients analytic = tape.backward(root);
    const auto base_kinks = tape.l1_sign_pattern();

    const Evaluation again = evaluate(loss, params);
    if (again.value != tape.scalar(root)) {
        throw ContractError("finite_difference_check: loss function is not deterministic");
    }

    GradCheckReport report;
    std::vector<Matrix> probe = params;
    for (std::size_t p = 0; p < params.size(); ++p) {
        const Matrix& grad = analytic.at(p);
        for (std::size_t e = 0; e < params[p].size(); ++e) {
            const double original = params[p][e];
            probe[p][e] = original + eps;
            const Evaluation plus = evaluate(loss, probe);
            probe[p][e] = original - eps;
            const Evaluation minus = evaluate(loss, probe);
            probe[p][e] = original;

            if (plus.kinks != base_kinks || minus.kinks != base_kinks) {
                ++report.entries_skipped;
                continue;
            }
            const double diff =
                reference != nullptr ? (*reference)(p, e, eps) : plus.value - minus.value;
            const double numeric = diff / (2.0 * eps);
            const double err = std::abs(grad[e] - numeric) / std::max(1e-12, std::abs(numeric));
            ++report.entries_checked;
            if (err > report.max_relative_error) {
                report.max_relative_error = err;
                report.worst_param = p;
                report.worst_entry = e;
                report.worst_analytic = grad[e];
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

} // namespace

GradCheckReport finite_difference_check(const TapeLossFn& loss, const std::vector<Matrix>& params,
                                        double eps) {
    return run_check(loss, nullptr, params, eps);
}

GradCheckReport finite_difference_check(const TapeLossFn& loss,
                                        const ReferenceDifferenceFn& reference,
                                        const std::vector<Matrix>& params, double eps) {
    if (!reference) throw ContractError("finite_difference_check: empty reference function");
    return run_check(loss, &reference, params, eps);
}

} // namespace orbitgraph
