#pragma once

#include <array>

namespace orbitgraph {

// Earth's gravitational parameter [km^3/s^2].
inline constexpr double kEarthMu = 398600.4418;

using Vec3 = std::array<double, 3>;

/**
 * Deputy state in the chief's LVLH frame.
 * x radial, y in-track, z cross-track [km]; velocities [km/s].
 */
struct RelativeState {
    double x = 0.0, y = 0.0, z = 0.0;
    double vx = 0.0, vy = 0.0, vz = 0.0;

    Vec3 position() const { return {x, y, z}; }
    Vec3 velocity() const { return {vx, vy, vz}; }
    std::array<double, 6> to_array() const { return {x, y, z, vx, vy, vz}; }
    static RelativeState from_array(const std::array<double, 6>& s) {
        return {s[0], s[1], s[2], s[3], s[4], s[5]};
    }

    friend bool operator==(const RelativeState&, const RelativeState&) = default;
};

double mean_motion(double semi_major_axis, double mu = kEarthMu);

struct ChiefOrbit {
    double a = 0.0;   // km
    double mu = kEarthMu;
    double n = 0.0;   // rad/s

    static ChiefOrbit circular(double semi_major_axis, double mu = kEarthMu);
    double period() const;

    friend bool operator==(const ChiefOrbit&, const ChiefOrbit&) = default;
};

// Closed-form Clohessy-Wiltshire solution advanced by t seconds.
RelativeState cw_propagate(const RelativeState& s0, double n, double t);

// Row-major 6x6 state transition matrix of cw_propagate: s(t) = Phi * s0.
std::array<double, 36> cw_transition_matrix(double n, double t);

// (3n^2 x + 2n vy, -2n vx, -n^2 z).
Vec3 cw_acceleration(const RelativeState& s, double n);

// Classical RK4 on p' = v, v' = cw_acceleration. A trailing partial step
// covers any remainder of t / step. Throws ContractError if step <= 0 or
// step > t (t == 0 returns s0).
RelativeState cw_rk4_propagate(const RelativeState& s0, double n, double t, double step);

} // namespace orbitgraph
