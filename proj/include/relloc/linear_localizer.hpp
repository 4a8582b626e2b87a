#pragma once

#include <span>
#include <utility>

#include "relloc/geometry.hpp"

namespace relloc {

using Mat63 = Eigen::Matrix<double, 6, 3>;
using Vector15 = Eigen::Matrix<double, 15, 1>;

// The three 6x3 coefficient matrices of the angle-induced linear equation
// A_j p_ji + A_m p_mi + A_s p_si = 0.
struct CoefficientTriple {
    Mat63 a_j, a_m, a_s;
};

// Populates the coefficient matrices from one instant's angles. Throws
// AssumptionViolated when a sine/cosine required to be nonzero vanishes.
CoefficientTriple build_coefficients(const TetraAngleSet& a);

// Relative positions and planar orientations of the tetrahedron in robot
// i's frame. p_ji holds p_i - p_j (the vector from robot j to robot i)
// so that p_ji[k+1] = p_ji[k] + dp_i - dp_j; r_ji = (cos, sin) of the
// rotation from frame j to frame i.
struct RelativeState {
    Vec3 p_ji = Vec3::Zero(), p_mi = Vec3::Zero(), p_si = Vec3::Zero();
    Vec2 r_ji = Vec2(1, 0), r_mi = Vec2(1, 0), r_si = Vec2(1, 0);

    Vector15 to_vector() const;
    static RelativeState from_vector(const Vector15& v);
    RelativeState normalized() const;
};

// Per-robot self-displacements over one step. For the aligned solver all
// four live in the common frame; for the unaligned solver each robot's
// displacement is expressed in its own local frame (robot i's frame is
// the reference, so d_i is common to both views).
struct TetraDisplacements {
    Vec3 d_i = Vec3::Zero(), d_j = Vec3::Zero(), d_m = Vec3::Zero(),
         d_s = Vec3::Zero();
};

struct DegeneracyReport {
    bool coplanar = false;           // Assumption 1 detector (epsilon_1)
    bool strong_similarity = false;  // Assumption 3 detector (epsilon_2)
    bool c1_similar_projection_j = false, c1_similar_projection_m = false;
    bool c2_zero_ratio_j = false, c2_zero_ratio_m = false;
    double z_spread_k = 0, z_spread_k1 = 0;
    double angle_change = 0;
    double c2_value_j = 0, c2_value_m = 0;

    // Theorem 1 needs condition (a) or (b): not C1 and not C2 on at least
    // one branch.
    bool theorem1_ok() const {
        return (!c1_similar_projection_j && !c2_zero_ratio_j) ||
               (!c1_similar_projection_m && !c2_zero_ratio_m);
    }
    bool ok() const { return !coplanar && !strong_similarity && theorem1_ok(); }
};

// eps1/eps2 are the Assumption-1/3 detector thresholds; c_zero is the
// much tighter tolerance for the exact-degeneracy conditions C1/C2 (the
// solver's condition-number guard handles near misses).
DegeneracyReport detect_degeneracy(const TetraAngleSet& a_k,
                                   const TetraAngleSet& a_k1,
                                   double eps1 = 0.02, double eps2 = 0.01,
                                   double c_zero = 1e-4);

// Theorem 1: relative positions at k and k+1 with aligned frames.
struct AlignedSolution {
    Vec3 p_ji, p_mi, p_si;     // at k
    Vec3 p_ji1, p_mi1, p_si1;  // at k+1
};

AlignedSolution solve_aligned(const TetraAngleSet& a_k,
                              const TetraAngleSet& a_k1,
                              const TetraDisplacements& d_k,
                              double cond_threshold = 1e10);

// Theorem 2: state at k plus the raw 12x9 coefficient pair for WTLS use.
struct UnalignedSolution {
    RelativeState state;
    Eigen::Matrix<double, 12, 9> q2;
    Eigen::Matrix<double, 12, 1> q2_rhs;
};

UnalignedSolution solve_unaligned(const TetraAngleSet& a_k,
                                  const TetraAngleSet& a_k1,
                                  const TetraAngleSet& a_k2,
                                  const TetraDisplacements& d_k,
                                  const TetraDisplacements& d_k1,
                                  double cond_threshold = 1e10);

// Dead-reckoning transition: positions advance by displacement
// differences, orientations stay fixed.
RelativeState propagate_state(const RelativeState& x,
                              const TetraDisplacements& d);

// Stacks the angle-induced equations over d consecutive instants into
// A x = b with x in R^15 (d = angles.size() >= 2, disps.size() == d-1).
// Instant t > 0 uses cumulative own-frame displacements from instant 0.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> build_stacked_system(
    std::span<const TetraAngleSet> angles,
    std::span<const TetraDisplacements> disps);

}  // namespace relloc
