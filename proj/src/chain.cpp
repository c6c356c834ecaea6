#include "ionmux/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ionmux/errors.hpp"

namespace ionmux::chain {

double ChainConfig::length_scale() const {
    const double kq2 = constants::coulomb_k * charge * charge;
    return std::cbrt(kq2 / (ion_mass * axial_freq * axial_freq));
}

namespace {

// Dimensionless gradient: g_i = u_i - sum_{j != i} sgn(u_i - u_j) / (u_i - u_j)^2.
Eigen::VectorXd reduced_gradient(const Eigen::VectorXd& u) {
    const int n = static_cast<int>(u.size());
    Eigen::VectorXd g = u;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = u[i] - u[j];
            g[i] -= (d > 0 ? 1.0 : -1.0) / (d * d);
        }
    }
    return g;
}

// Dimensionless Hessian of the reduced energy.
Eigen::MatrixXd reduced_hessian(const Eigen::VectorXd& u) {
    const int n = static_cast<int>(u.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        double diag = 1.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double r3 = std::pow(std::abs(u[i] - u[j]), 3);
            diag += 2.0 / r3;
            h(i, j) = -2.0 / r3;
        }
        h(i, i) = diag;
    }
    return h;
}

} // namespace

double stationarity_residual(const ChainConfig& config, double center,
                             const std::vector<double>& positions) {
    const double ell = config.length_scale();
    Eigen::VectorXd u(positions.size());
    for (size_t i = 0; i < positions.size(); ++i) u[static_cast<int>(i)] = (positions[i] - center) / ell;
    return reduced_gradient(u).lpNorm<Eigen::Infinity>();
}

EquilibriumChain equilibrium_positions(const ChainConfig& config, double center) {
    if (!config.valid())
        throw ConfigError("equilibrium_positions: invalid chain configuration");

    const int n = config.n_ions;
    const double ell = config.length_scale();

    if (n == 1)
        return {{center}, center, config};

    // Uniform initial guess spanning 2 N^0.9 length units, damped Newton after.
    Eigen::VectorXd u(n);
    const double half_span = std::pow(n, 0.9);
    for (int i = 0; i < n; ++i)
        u[i] = -half_span + 2.0 * half_span * i / (n - 1);

    constexpr int max_iter = 200;
    constexpr double tol = 1e-13;
    double residual = 0.0;
    bool converged = false;
    for (int iter = 0; iter < max_iter; ++iter) {
        const Eigen::VectorXd g = reduced_gradient(u);
        residual = g.lpNorm<Eigen::Infinity>();
        if (residual < tol) {
            converged = true;
            break;
        }
        const Eigen::VectorXd step = reduced_hessian(u).ldlt().solve(g);
        // damp until the residual shrinks; fall back to the full step if no
        // damping helps (possible only at the numerical floor)
        bool accepted = false;
        double damp = 1.0;
        for (int k = 0; k < 40 && !accepted; ++k, damp *= 0.5) {
            const Eigen::VectorXd cand = u - damp * step;
            if (reduced_gradient(cand).lpNorm<Eigen::Infinity>() < residual) {
                u = cand;
                accepted = true;
            }
        }
        if (!accepted) u -= step;
    }
    if (!converged) {
        std::ostringstream os;
        os << "equilibrium_positions: Newton iteration did not converge for n_ions=" << n
           << " (reduced gradient max-norm " << residual << ")";
        throw ConvergenceError(os.str());
    }

    std::sort(u.begin(), u.end());
    // The reduced gradient sums to sum(u); remove the solver's residual drift
    // so the mean is the trap center exactly.
    u.array() -= u.mean();

    EquilibriumChain chain;
    chain.center = center;
    chain.config = config;
    chain.positions.resize(n);
    for (int i = 0; i < n; ++i) chain.positions[i] = center + ell * u[i];
    return chain;
}

NormalModeSet normal_modes(const EquilibriumChain& chain) {
    const int n = chain.config.n_ions;
    if (static_cast<int>(chain.positions.size()) != n)
        throw ConfigError("normal_modes: positions/config size mismatch");
    if (stationarity_residual(chain.config, chain.center, chain.positions) > 1e-9)
        throw NumericError("normal_modes: chain is not at equilibrium");

    const double ell = chain.config.length_scale();
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i) u[i] = (chain.positions[i] - chain.center) / ell;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(reduced_hessian(u));
    if (solver.info() != Eigen::Success)
        throw NumericError("normal_modes: eigensolver failed");

    NormalModeSet modes;
    modes.config = chain.config;
    modes.frequencies.resize(n);
    modes.eigenvectors = solver.eigenvectors().transpose();  // rows = modes, ascending
    for (int m = 0; m < n; ++m) {
        const double lambda = solver.eigenvalues()[m];
        if (lambda <= 0)
            throw NumericError("normal_modes: non-positive Hessian eigenvalue (unstable configuration)");
        modes.frequencies[m] = chain.config.axial_freq * std::sqrt(lambda);
        // Deterministic sign: largest-magnitude component positive.
        int imax = 0;
        modes.eigenvectors.row(m).cwiseAbs().maxCoeff(&imax);
        if (modes.eigenvectors(m, imax) < 0) modes.eigenvectors.row(m) *= -1.0;
    }
    return modes;
}

LambDickeTable lamb_dicke_table(const NormalModeSet& modes, double wavelength,
                                double projection_cosine) {
    if (!(wavelength > 0))
        throw ConfigError("lamb_dicke_table: wavelength must be positive");
    if (std::abs(projection_cosine) > 1.0)
        throw ConfigError("lamb_dicke_table: |projection_cosine| must be <= 1");

    const int n = modes.config.n_ions;
    const double k = constants::two_pi / wavelength;
    const double mass = modes.config.ion_mass;

    LambDickeTable table;
    table.probe_wavevector = k;
    table.projection_cosine = projection_cosine;
    table.eta.resize(n, n);
    for (int m = 0; m < n; ++m) {
        const double zp = std::sqrt(constants::hbar / (2.0 * mass * modes.frequencies[m]));
        for (int i = 0; i < n; ++i)
            table.eta(m, i) = projection_cosine * k * zp * modes.eigenvectors(m, i);
    }
    const double eta_single =
        projection_cosine * k * std::sqrt(constants::hbar / (2.0 * mass * modes.config.axial_freq));
    table.com_eta_effective = eta_single / std::sqrt(static_cast<double>(n));
    return table;
}

std::vector<double> chain_spacings(const EquilibriumChain& chain) {
    if (chain.positions.size() < 2)
        throw ConfigError("chain_spacings: need at least two ions");
    std::vector<double> gaps(chain.positions.size() - 1);
    for (size_t i = 0; i + 1 < chain.positions.size(); ++i)
        gaps[i] = chain.positions[i + 1] - chain.positions[i];
    return gaps;
}

} // namespace ionmux::chain
