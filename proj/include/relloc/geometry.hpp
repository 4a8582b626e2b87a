#pragma once

#include <Eigen/Dense>

#include <array>
#include <optional>

#include "relloc/errors.hpp"

namespace relloc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kParallelTol = 1e-12;

// Wraps an angle into [-pi, pi); pi maps to -pi.
double wrap_angle(double a);

// 2-D rotation matrix R(theta).
Mat2 rot2(double theta);

// Rotation about the Z axis.
Mat3 rotz(double theta);

// Signed angle from bearing b1 to bearing b2, counterclockwise positive
// about the Z axis. Both inputs must be unit vectors. Throws
// DegenerateAngle when the bearings are parallel or anti-parallel within
// kParallelTol (the sign test is meaningless there).
double signed_angle(const Vec3& b1, const Vec3& b2);

// Unsigned angle between two (not necessarily unit) vectors, in [0, pi].
double unsigned_angle(const Vec3& a, const Vec3& b);

// Block matrix [[v_x, 0], [0, v(3)]] with v_x = [[v1, -v2], [v2, v1]],
// chosen so that planar_lift(v) * (cos t, sin t, 1) == rotz(t) * v.
Mat3 planar_lift(const Vec3& v);

// The 13 angles of one tetrahedron (i, j, m, s) at one time instant.
// Surface angles and projected-triangle angles are interior angles in
// [0, pi]; the two angles at the projected vertex i are signed; Z-axis
// angles are in [0, pi]. Primed vertices are orthogonal projections of
// j, m, s onto the horizontal plane through i.
struct TetraAngleSet {
    double mji = 0, sji = 0, jmi = 0, jsi = 0;      // surface triangles
    double pj_s = 0, pm_s = 0, ps_j = 0, ps_m = 0;  // s'j'i, s'm'i, j's'i, m's'i
    double i_sm = 0, i_sj = 0;                      // signed: s'im', s'ij'
    double miz = 0, siz = 0, jiz = 0;               // Z-axis angles

    static constexpr int kCount = 13;

    Eigen::Matrix<double, kCount, 1> to_vector() const;
    static TetraAngleSet from_vector(const Eigen::Matrix<double, kCount, 1>& v);
};

// All 13 angles from exact positions. Throws CoplanarConfiguration when
// the four robots are coplanar and CollinearProjection when i, j', s' or
// i, m', s' are collinear (Assumption-1 degeneracies).
TetraAngleSet tetra_angles(const Vec3& p_i, const Vec3& p_j, const Vec3& p_m,
                           const Vec3& p_s);

// Same angles expressed through relative positions in robot i's frame
// (i sits at the origin; the common Z axis is preserved by the frame yaw).
TetraAngleSet tetra_angles_relative(const Vec3& p_ji, const Vec3& p_mi,
                                    const Vec3& p_si);

// Jacobian of the 13-angle vector with respect to (p_ji, p_mi, p_si).
Eigen::Matrix<double, TetraAngleSet::kCount, 9> tetra_angle_jacobian(
    const Vec3& p_ji, const Vec3& p_mi, const Vec3& p_si);

struct AzimuthElevation {
    double azimuth = 0;    // in [-pi, pi)
    double elevation = 0;  // in [-pi/2, pi/2]
};

// Bearing (cos b cos g, sin b cos g, sin g) in the sensor's local frame.
Vec3 aoa_bearing(const AzimuthElevation& ae);

// Azimuth/elevation readings among the four robots of one tetrahedron.
// obs[a][b] is robot a's reading of robot b.
struct AoaPanel {
    enum Vertex { I = 0, J = 1, M = 2, S = 3 };
    std::array<std::array<std::optional<AzimuthElevation>, 4>, 4> obs;

    const AzimuthElevation& reading(int observer, int target) const;
};

// Reconstructs the 13 angles from azimuth/elevation readings under the
// common-Z-axis assumption. Throws MissingReading when a required entry
// is absent; DegenerateAngle propagates from the signed-angle evaluation.
TetraAngleSet aoa_to_interior(const AoaPanel& readings);

// Pairwise distances within one tetrahedron.
struct PairwiseDistances {
    double ij = 0, im = 0, is = 0, jm = 0, js = 0, ms = 0;
};

struct Heights {
    double i = 0, j = 0, m = 0, s = 0;
};

// Reconstructs the 13 angles from distances and per-robot heights. The
// distances determine the configuration only up to a reflection about a
// vertical plane, so the caller fixes the sign of the angle from i->s'
// to i->j' via `chirality` (+1 or -1); the sign of the companion angle
// at m' is resolved from the projected edge lengths.
TetraAngleSet distances_to_angles(const PairwiseDistances& d, const Heights& h,
                                  int chirality = +1);

}  // namespace relloc
