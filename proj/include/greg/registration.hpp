#pragma once

#include <vector>

#include "greg/algebroid.hpp"
#include "greg/groupoid.hpp"

namespace greg {

enum class SimKind { lncc, ssd };

/// Largest normal-trace jump tolerated for a velocity in the fiber.
inline constexpr double kFiberTolerance = 1e-8;

struct RegistrationProblem {
    ScalarField moving;
    ScalarField fixed;
    /// Null means smooth LDDMM.
    InterfacePtr interface;
    InertiaOperator inertia;
    int steps = 10;
    SimKind sim = SimKind::lncc;
    /// Gaussian window std in pixels.
    double lncc_window = 5.0;
    double reg_weight = 1.0;

    void validate() const;
};

struct RegistrationOptions {
    int iters = 100;
    /// Scale of the first trial step: 1 moves the velocity by at most one
    /// grid cell per unit time.
    double step_size = 1.0;
    bool line_search = true;
    double tol = 1e-5;
    int max_halvings = 30;
    double armijo_c = 1e-4;
};

struct EnergyTerms {
    double total = 0.0;
    double similarity = 0.0;
    double regularizer = 0.0;
};

struct RegistrationResult {
    GroupoidElement element;
    ScalarField warped;
    std::vector<DVectField> velocities;
    std::vector<EnergyTerms> energy_trace;
    bool converged = false;
    int iterations = 0;
    /// Largest normal-trace jump over the velocities of all accepted iterates.
    double max_normal_jump = 0.0;
};

double ssd(const ScalarField &a, const ScalarField &b);
/// 1 - mean of the local correlation coefficient under a Gaussian window
/// (std `window` pixels).
double lncc(const ScalarField &a, const ScalarField &b, double window);

double similarity(SimKind kind, const ScalarField &warped, const ScalarField &fixed, double window);
/// Derivative of `similarity` with respect to the node values of `warped`.
ScalarField similarity_gradient(SimKind kind, const ScalarField &warped, const ScalarField &fixed, double window);

/// Energy of a velocity series: similarity of the flowed image plus
/// reg_weight * 1/2 sum_t |v_t|^2 dt in the inertia metric.
EnergyTerms energy(const std::vector<DVectField> &v, const RegistrationProblem &problem);
/// Gradient of `energy` for the inertia metric (a velocity series in the
/// fiber). Mask changes of the advected interface are not differentiated.
std::vector<DVectField> energy_gradient(const std::vector<DVectField> &v, const RegistrationProblem &problem);

/// The same energy parametrized by momenta (v_t = I^-1 m_t) together with its
/// gradient for the trapezoid-weighted pairing. This is what the optimizer
/// works with. `grad` may be null.
EnergyTerms momentum_energy(const std::vector<VectorField> &m, const RegistrationProblem &problem,
                            std::vector<VectorField> *grad = nullptr);

/// Relaxation over per-step momenta with inertia-preconditioned gradient
/// descent and Armijo backtracking. Handles both the sliding and the smooth
/// case.
RegistrationResult register_images(const RegistrationProblem &problem, const RegistrationOptions &opt = {});
/// Smooth LDDMM baseline; a self-contained implementation that ignores
/// `problem.interface`.
RegistrationResult register_lddmm(const RegistrationProblem &problem, const RegistrationOptions &opt = {});
/// Same momentum energy on the LDDMM path, used by the reduction check.
EnergyTerms lddmm_energy(const std::vector<VectorField> &m, const RegistrationProblem &problem,
                         std::vector<VectorField> *grad = nullptr);

} // namespace greg
