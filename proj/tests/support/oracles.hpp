#pragma once

// Test-only reference implementations, deliberately independent of the
// library's computation paths: derivative-free energy minimization for the
// chain equilibrium, a quadrature solution of the driven oscillator for
// transport excitation, and dense-operator linear algebra for the
// Fock-space coupling factors.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "ionmux/chain.hpp"
#include "ionmux/constants.hpp"

namespace oracles {

// ----- chain: cyclic coordinate descent with golden-section line search ---

inline double chain_energy(const std::vector<double>& u) {
    double e = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        e += 0.5 * u[i] * u[i];
        for (size_t j = i + 1; j < u.size(); ++j) e += 1.0 / std::abs(u[i] - u[j]);
    }
    return e;
}

// Minimize the reduced chain energy without derivatives. Returns positions
// in units of the chain length scale.
inline std::vector<double> equilibrium_coordinate_descent(int n) {
    std::vector<double> u(n);
    const double half = std::pow(n, 0.9);
    for (int i = 0; i < n; ++i)
        u[i] = n == 1 ? 0.0 : -half + 2.0 * half * i / (n - 1);

    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int sweep = 0; sweep < 3000; ++sweep) {
        double moved = 0.0;
        for (int i = 0; i < n; ++i) {
            // keep the ordering: the slab between the neighbours is the
            // domain on which the one-dimensional energy slice is convex
            double a = u[i] - 2.0, b = u[i] + 2.0;
            if (i > 0) a = std::max(a, u[i - 1] + 1e-3);
            if (i + 1 < n) b = std::min(b, u[i + 1] - 1e-3);
            auto f = [&](double x) {
                const double keep = u[i];
                u[i] = x;
                const double e = chain_energy(u);
                u[i] = keep;
                return e;
            };
            double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
            double f1 = f(x1), f2 = f(x2);
            while (b - a > 1e-12) {
                if (f1 < f2) {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - gr * (b - a);
                    f1 = f(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + gr * (b - a);
                    f2 = f(x2);
                }
            }
            const double next = 0.5 * (a + b);
            moved = std::max(moved, std::abs(next - u[i]));
            u[i] = next;
        }
        if (moved < 1e-11) break;
    }
    std::sort(u.begin(), u.end());
    return u;
}

// ----- transport: driven-oscillator quadrature --------------------------

// |alpha| of a harmonic oscillator (mass m, frequency w) after its trap
// center followed center(t) over [0, duration], starting at rest:
// |alpha| = sqrt(m w / 2 hbar) |D e^{-i w T} + i w Int_0^T center(t) e^{-i w t} dt|
// (boundary terms use center(0) = 0 and a static tail). Simpson quadrature.
inline double alpha_from_center_quadrature(const std::function<double(double)>& center,
                                           double duration, double mass, double omega,
                                           int n_panels = 400000) {
    const int n = 2 * n_panels;  // even sample count for Simpson
    const double h = duration / n;
    std::complex<double> integral = 0.0;
    const std::complex<double> iw(0.0, omega);
    for (int k = 0; k <= n; ++k) {
        const double t = k * h;
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        integral += w * center(t) * std::exp(-iw * t);
    }
    integral *= h / 3.0;
    const double D = center(duration);
    const std::complex<double> amplitude = D * std::exp(-iw * duration) + iw * integral;
    return std::sqrt(mass * omega / (2.0 * ionmux::constants::hbar)) * std::abs(amplitude);
}

// ----- spectroscopy: dense Fock-space operators --------------------------

// |<m| exp(i eta (a + a^dag)) |n>| from an eigendecomposition of the
// position quadrature on a dim-dimensional truncation.
class DisplacementOracle {
public:
    explicit DisplacementOracle(int dim) : dim_(dim) {
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(dim, dim);
        for (int n = 0; n + 1 < dim; ++n) x(n, n + 1) = x(n + 1, n) = std::sqrt(n + 1.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(x);
        evals_ = solver.eigenvalues();
        evecs_ = solver.eigenvectors();
    }

    double element_abs(int m, int n, double eta) const {
        std::complex<double> acc = 0.0;
        for (int k = 0; k < dim_; ++k)
            acc += evecs_(m, k) * evecs_(n, k) *
                   std::exp(std::complex<double>(0.0, eta * evals_[k]));
        return std::abs(acc);
    }

    int dim() const { return dim_; }

private:
    int dim_;
    Eigen::VectorXd evals_;
    Eigen::MatrixXd evecs_;
};

// Diagonal of D(alpha) rho_th D(alpha)^dag for real alpha, built from the
// dense displacement operator exp(alpha (a^dag - a)).
inline std::vector<double> displaced_thermal_diagonal(double n_thermal, double alpha, int dim,
                                                      int n_out) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (int n = 0; n + 1 < dim; ++n) {
        // i (a^dag - a) is Hermitian
        m(n + 1, n) = std::complex<double>(0.0, std::sqrt(n + 1.0));
        m(n, n + 1) = std::complex<double>(0.0, -std::sqrt(n + 1.0));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m);
    const auto& v = solver.eigenvectors();
    const auto& lam = solver.eigenvalues();
    // D = exp(alpha (a^dag - a)) = exp(-i alpha M) = V e^{-i alpha lam} V^dag
    Eigen::VectorXcd phase(dim);
    for (int k = 0; k < dim; ++k)
        phase[k] = std::exp(std::complex<double>(0.0, -alpha * lam[k]));
    const Eigen::MatrixXcd d = v * phase.asDiagonal() * v.adjoint();

    const double r = n_thermal / (1.0 + n_thermal);
    std::vector<double> out(n_out, 0.0);
    for (int n = 0; n < n_out; ++n) {
        double p = 0.0;
        double rho_k = 1.0 / (1.0 + n_thermal);
        for (int k = 0; k < dim; ++k) {
            p += rho_k * std::norm(d(n, k));
            rho_k *= r;
        }
        out[n] = p;
    }
    return out;
}

} // namespace oracles
