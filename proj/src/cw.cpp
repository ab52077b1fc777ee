#include "orbitgraph/cw.hpp"

#include <cmath>
#include <numbers>

#include "orbitgraph/errors.hpp"

namespace orbitgraph {

double mean_motion(double semi_major_axis, double mu) {
    if (!(semi_major_axis > 0.0) || !(mu > 0.0)) {
        throw DomainError("mean_motion: semi-major axis and mu must be positive");
    }
    return std::sqrt(mu / (semi_major_axis * semi_major_axis * semi_major_axis));
}

ChiefOrbit ChiefOrbit::circular(double semi_major_axis, double mu) {
    return {semi_major_axis, mu, mean_motion(semi_major_axis, mu)};
}

double ChiefOrbit::period() const { return 2.0 * std::numbers::pi / n; }

RelativeState cw_propagate(const RelativeState& s0, double n, double t) {
    if (!(n > 0.0)) throw DomainError("cw_propagate: mean motion must be positive");
    const double nt = n * t;
    const double c = std::cos(nt);
    const double s = std::sin(nt);

    RelativeState out;
    out.x = (4.0 - 3.0 * c) * s0.x + s / n * s0.vx + 2.0 / n * (1.0 - c) * s0.vy;
    out.y = 6.0 * s0.x * (s - nt) + s0.y - 2.0 / n * (1.0 - c) * s0.vx +
            (4.0 * s - 3.0 * nt) / n * s0.vy;
    out.z = s0.z * c + s / n * s0.vz;
    out.vx = 3.0 * n * s * s0.x + c * s0.vx + 2.0 * s * s0.vy;
    out.vy = 6.0 * n * (c - 1.0) * s0.x - 2.0 * s * s0.vx + (4.0 * c - 3.0) * s0.vy;
    out.vz = -n * s * s0.z + c * s0.vz;
    return out;
}

std::array<double, 36> cw_transition_matrix(double n, double t) {
    std::array<double, 36> phi{};
    for (std::size_t j = 0; j < 6; ++j) {
        std::array<double, 6> unit{};
        unit[j] = 1.0;
        const auto col = cw_propagate(RelativeState::from_array(unit), n, t).to_array();
        for (std::size_t i = 0; i < 6; ++i) phi[i * 6 + j] = col[i];
    }
    return phi;
}

Vec3 cw_acceleration(const RelativeState& s, double n) {
    return {3.0 * n * n * s.x + 2.0 * n * s.vy, -2.0 * n * s.vx, -n * n * s.z};
}

namespace {

std::array<double, 6> derivative(const std::array<double, 6>& y, double n) {
    const auto a = cw_acceleration(RelativeState::from_array(y), n);
    return {y[3], y[4], y[5], a[0], a[1], a[2]};
}

std::array<double, 6> axpy(const std::array<double, 6>& y, double h,
                           const std::array<double, 6>& k) {
    std::array<double, 6> out{};
    for (std::size_t i = 0; i < 6; ++i) out[i] = y[i] + h * k[i];
    return out;
}

} // namespace

RelativeState cw_rk4_propagate(const RelativeState& s0, double n, double t, double step) {
    if (t == 0.0) return s0;
    if (!(step > 0.0) || t < 0.0) {
        throw ContractError("cw_rk4_propagate: need step > 0 and t >= 0");
    }
    if (step > t) throw ContractError("cw_rk4_propagate: step exceeds propagation time");

    auto y = s0.to_array();
    const auto full_steps = static_cast<long>(std::floor(t / step));
    const double remainder = t - static_cast<double>(full_steps) * step;

    auto advance = [&](double h) {
        const auto k1 = derivative(y, n);
        const auto k2 = derivative(axpy(y, 0.5 * h, k1), n);
        const auto k3 = derivative(axpy(y, 0.5 * h, k2), n);
        const auto k4 = derivative(axpy(y, h, k3), n);
        for (std::size_t i = 0; i < 6; ++i) {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    };
    for (long i = 0; i < full_steps; ++i) advance(step);
    if (remainder > 1e-12 * step) advance(remainder);
    return RelativeState::from_array(y);
}

} // namespace orbitgraph
