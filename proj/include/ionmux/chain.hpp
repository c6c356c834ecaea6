#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ionmux/constants.hpp"

namespace ionmux::chain {

/// Static parameters of a single-species linear ion chain in a harmonic
/// axial potential.
struct ChainConfig {
    int n_ions = 1;
    double ion_mass = 40.0 * constants::atomic_mass_unit;  // kg, 40Ca+
    double axial_freq = constants::two_pi * 179e3;         // rad/s
    double charge = constants::elementary_charge;          // C

    /// Natural length unit (k q^2 / (m w0^2))^(1/3): two ions in this trap
    /// sit 2^(1/3) of this apart.
    double length_scale() const;

    bool valid() const { return n_ions >= 1 && ion_mass > 0 && axial_freq > 0 && charge > 0; }
};

/// Stationary point of the trap + Coulomb potential. Positions are
/// ascending and their mean equals the trap center exactly (the center of
/// mass decouples from the Coulomb terms).
struct EquilibriumChain {
    std::vector<double> positions;  // m, ascending
    double center = 0.0;            // m
    ChainConfig config;
};

/// Axial normal modes: frequencies ascending, eigenvector rows orthonormal
/// (mode x ion). Row 0 is the center-of-mass mode at the bare trap
/// frequency.
struct NormalModeSet {
    std::vector<double> frequencies;  // rad/s, ascending
    Eigen::MatrixXd eigenvectors;     // (mode, ion), B * B^T = I
    ChainConfig config;
};

/// Per-mode, per-ion Lamb-Dicke parameters for a probe beam, plus the
/// effective COM value eta_single / sqrt(N) used for global-beam carrier
/// dynamics.
struct LambDickeTable {
    Eigen::MatrixXd eta;  // (mode, ion)
    double probe_wavevector = 0.0;    // rad/m
    double projection_cosine = 1.0;
    double com_eta_effective = 0.0;   // eta_single / sqrt(N) for the COM mode
};

/// Solve for the equilibrium positions by damped Newton iteration on the
/// dimensionless force balance. Throws ConvergenceError with the residual
/// norm if the iteration stalls.
EquilibriumChain equilibrium_positions(const ChainConfig& config, double center = 0.0);

/// Eigen-decomposition of the potential Hessian at equilibrium.
/// Throws NumericError if any eigenvalue is non-positive.
NormalModeSet normal_modes(const EquilibriumChain& chain);

/// Lamb-Dicke parameters: eta[m][i] = cos * (2 pi / wavelength) *
/// sqrt(hbar / (2 m w_m)) * B[m][i].
LambDickeTable lamb_dicke_table(const NormalModeSet& modes, double wavelength,
                                double projection_cosine = 1.0);

/// Nearest-neighbour gaps, length n_ions - 1, all positive.
std::vector<double> chain_spacings(const EquilibriumChain& chain);

/// Max-norm of the potential gradient at `positions`, in units of the
/// characteristic force q^2 k / l^2. Zero at a true equilibrium.
double stationarity_residual(const ChainConfig& config, double center,
                             const std::vector<double>& positions);

} // namespace ionmux::chain
