#pragma once

#include <functional>
#include <span>
#include <vector>

#include "orbitgraph/tape.hpp"

namespace orbitgraph {

// Builds a scalar loss on `tape` from parameter handles (registered in order).
using TapeLossFn = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t entries_checked = 0;
    // Entries whose +/-eps probes change the sign of some l1 operand.
    std::size_t entries_skipped = 0;
    std::size_t worst_param = 0;
    std::size_t worst_entry = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/**
 * Compares tape gradients against central differences.
 *
 * Relative error per entry is |analytic - fd| / max(1e-12, |fd|). Entries
 * whose probes straddle an l1 kink are excluded and counted. Throws
 * ContractError if eps <= 0 or if two evaluations at the base point differ.
 */
GradCheckReport finite_difference_check(const TapeLossFn& loss, const std::vector<Matrix>& params,
                                        double eps);

// f(p + delta * e) - f(p - delta * e) for the unit vector e of one parameter
// entry, computed by an independent evaluation of the same loss. Lets the
// check run against extended precision when a double central difference
// cannot resolve the smaller gradient entries.
using ReferenceDifferenceFn =
    std::function<double(std::size_t param, std::size_t entry, double delta)>;

// As above, with the central difference taken from `reference`. Kink
// detection and the analytic gradient still come from `loss`.
GradCheckReport finite_difference_check(const TapeLossFn& loss,
                                        const ReferenceDifferenceFn& reference,
                                        const std::vector<Matrix>& params, double eps);

} // namespace orbitgraph
