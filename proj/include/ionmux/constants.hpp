#pragma once

namespace ionmux::constants {

// CODATA 2018 values, SI units.
inline constexpr double hbar = 1.054571817e-34;                // J s
inline constexpr double coulomb_k = 8.9875517923e9;            // N m^2 / C^2, 1/(4 pi eps0)
inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

} // namespace ionmux::constants

namespace ionmux {

/// Bundle of the fundamental constants used by the chain and transport
/// models. Defaults are the CODATA values above; kept as a value type so
/// simulations can be run in rescaled units if ever needed.
struct PhysicalConstants {
    double hbar = constants::hbar;
    double coulomb_k = constants::coulomb_k;
    double elementary_charge = constants::elementary_charge;
    double atomic_mass_unit = constants::atomic_mass_unit;

    bool valid() const {
        return hbar > 0 && coulomb_k > 0 && elementary_charge > 0 && atomic_mass_unit > 0;
    }
};

} // namespace ionmux
