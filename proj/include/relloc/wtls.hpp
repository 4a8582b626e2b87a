#pragma once

#include <array>
#include <optional>
#include <vector>

#include "relloc/linear_localizer.hpp"
#include "relloc/manifold_opt.hpp"

namespace relloc {

// Constrained least squares on one triangle: shifts the measured
// magnitudes uniformly so they sum to pi exactly, preserving signs.
std::array<double, 3> refine_angles(const std::array<double, 3>& measured);

// Applies refine_angles to the two projected triangles, the only
// triangles whose three interior angles all appear in the set.
TetraAngleSet refine_angle_set(const TetraAngleSet& a);

// x from the right-singular vector of the smallest singular value of
// c_tilde = [A | b]. Throws ZeroLastComponent / RepeatedSmallestSingularValue.
Vector15 tls_closed_form(const Eigen::MatrixXd& c_tilde);

// Measured inputs for one d-step window (angles.size() = d >= 2,
// disps.size() = d - 1, own-frame displacements).
struct MeasurementWindow {
    std::vector<TetraAngleSet> angles;
    std::vector<TetraDisplacements> disps;

    int steps() const { return static_cast<int>(angles.size()); }
};

// [A | b] of the stacked system, optionally after angle refinement.
Eigen::MatrixXd build_c_tilde(const MeasurementWindow& w, bool refine = true);

// First-order propagation of the per-measurement noise onto vec(C~)
// (column-major): J diag(sigma^2) J' with J from central differences.
// With row_block_diagonal the cross-row covariance entries are dropped.
Eigen::MatrixXd build_noise_covariance(const MeasurementWindow& w,
                                       double sigma_angle, double sigma_disp,
                                       bool refine = true,
                                       bool row_block_diagonal = false);

struct NoisyLinearSystem {
    Eigen::MatrixXd c_tilde;  // 6d x 16
    Eigen::MatrixXd p_dc;     // (6d*16)^2 covariance of vec(dC)
};

NoisyLinearSystem build_noisy_system(const MeasurementWindow& w,
                                     double sigma_angle, double sigma_disp,
                                     bool refine = true,
                                     bool row_block_diagonal = false);

struct WtlsConfig {
    bool init_from_tls = true;
    std::optional<RelativeState> init;  // used when init_from_tls is false
    double weight_floor = 1e-12;        // ridge added to P' before inversion
    bool gauss_newton_model = true;     // false: finite-difference Hessian
    TrustRegionConfig tr;
};

struct WtlsEstimate {
    RelativeState x;
    Eigen::Matrix<double, 15, 15> crlb;
    std::array<std::pair<double, double>, 15> ci;  // 95% intervals
    double cost = 0;
    double init_cost = 0;
    int iterations = 0;
    bool weight_regularized = false;
};

// Algorithm 2 core: minimizes 0.5 ||C~ z||^2 weighted by the inverse of
// P'(z) = (z' (x) I) P_dC (z' (x) I)', over x in R^9 x (S^1)^3 with
// z = (x, -1), reweighting at every iterate; CRLB and 95% confidence
// intervals come from the Fisher matrix C~' P'^-1 C~ at the solution.
WtlsEstimate wtls_solve(const NoisyLinearSystem& sys,
                        const WtlsConfig& cfg = {});

// Conversions between the 15-dimensional state and the product-manifold
// representation (9 Euclidean coordinates + 3 circle factors).
ManifoldPoint state_to_point(const RelativeState& x);
RelativeState point_to_state(const ManifoldPoint& p);

// Manifold projection of an unconstrained 15-vector (positions kept,
// orientation pairs normalized).
RelativeState project_state(const Vector15& v);

}  // namespace relloc
