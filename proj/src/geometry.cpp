#include "relloc/geometry.hpp"

#include <cmath>

namespace relloc {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clamp_unit(double t) { return t < -1.0 ? -1.0 : (t > 1.0 ? 1.0 : t); }

// Planar signed angle from a to b via atan2 on the XY components.
double planar_signed(const Vec3& a, const Vec3& b) {
    const double cross = a.x() * b.y() - a.y() * b.x();
    const double dot = a.x() * b.x() + a.y() * b.y();
    if (cross == 0.0 && dot == 0.0) {
        throw DegenerateAngle("planar signed angle undefined for zero vector");
    }
    return wrap_angle(std::atan2(cross, dot));
}

}  // namespace

double wrap_angle(double a) {
    double w = std::remainder(a, 2.0 * kPi);
    if (w >= kPi) w -= 2.0 * kPi;  // remainder returns (-pi, pi]; map pi to -pi
    return w;
}

Mat2 rot2(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat2 r;
    r << c, -s, s, c;
    return r;
}

Mat3 rotz(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat3 r;
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

double signed_angle(const Vec3& b1, const Vec3& b2) {
    const double dot = clamp_unit(b1.dot(b2));
    if (std::abs(std::abs(dot) - 1.0) < kParallelTol) {
        throw DegenerateAngle("bearings parallel or anti-parallel");
    }
    // b2' * Rz(pi/2) * b1 restricted to the horizontal plane the rotation
    // acts in; the counterclockwise direction is measured about +Z.
    const double sign_test = b1.x() * b2.y() - b1.y() * b2.x();
    const double mag = std::acos(dot);
    return sign_test > 0.0 ? mag : wrap_angle(-mag);
}

double unsigned_angle(const Vec3& a, const Vec3& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        throw DegenerateAngle("angle undefined for zero vector");
    }
    return std::acos(clamp_unit(a.dot(b) / (na * nb)));
}

Mat3 planar_lift(const Vec3& v) {
    Mat3 m;
    m << v.x(), -v.y(), 0,
         v.y(),  v.x(), 0,
         0,      0,     v.z();
    return m;
}

Eigen::Matrix<double, TetraAngleSet::kCount, 1> TetraAngleSet::to_vector() const {
    Eigen::Matrix<double, kCount, 1> v;
    v << mji, sji, jmi, jsi, pj_s, pm_s, ps_j, ps_m, i_sm, i_sj, miz, siz, jiz;
    return v;
}

TetraAngleSet TetraAngleSet::from_vector(
    const Eigen::Matrix<double, kCount, 1>& v) {
    TetraAngleSet a;
    a.mji = v(0);
    a.sji = v(1);
    a.jmi = v(2);
    a.jsi = v(3);
    a.pj_s = v(4);
    a.pm_s = v(5);
    a.ps_j = v(6);
    a.ps_m = v(7);
    a.i_sm = v(8);
    a.i_sj = v(9);
    a.miz = v(10);
    a.siz = v(11);
    a.jiz = v(12);
    return a;
}

TetraAngleSet tetra_angles(const Vec3& p_i, const Vec3& p_j, const Vec3& p_m,
                           const Vec3& p_s) {
    return tetra_angles_relative(p_j - p_i, p_m - p_i, p_s - p_i);
}

TetraAngleSet tetra_angles_relative(const Vec3& p_ji, const Vec3& p_mi,
                                    const Vec3& p_si) {
    const double scale =
        std::max({p_ji.norm(), p_mi.norm(), p_si.norm(), 1e-300});
    const double vol = std::abs(p_ji.cross(p_mi).dot(p_si));
    if (vol < 1e-12 * scale * scale * scale) {
        throw CoplanarConfiguration("four robots are coplanar");
    }

    const Vec3 pj(p_ji.x(), p_ji.y(), 0.0);  // projections, i at the origin
    const Vec3 pm(p_mi.x(), p_mi.y(), 0.0);
    const Vec3 ps(p_si.x(), p_si.y(), 0.0);
    const auto collinear = [&](const Vec3& a, const Vec3& b) {
        const double cr = std::abs(a.x() * b.y() - a.y() * b.x());
        return cr < 1e-12 * scale * scale || a.norm() < 1e-12 * scale ||
               b.norm() < 1e-12 * scale;
    };
    if (collinear(pj, ps)) {
        throw CollinearProjection("i, j', s' are collinear");
    }
    if (collinear(pm, ps)) {
        throw CollinearProjection("i, m', s' are collinear");
    }

    TetraAngleSet a;
    a.mji = unsigned_angle(p_mi - p_ji, -p_ji);
    a.sji = unsigned_angle(p_si - p_ji, -p_ji);
    a.jmi = unsigned_angle(p_ji - p_mi, -p_mi);
    a.jsi = unsigned_angle(p_ji - p_si, -p_si);
    a.pj_s = unsigned_angle(ps - pj, -pj);
    a.pm_s = unsigned_angle(ps - pm, -pm);
    a.ps_j = unsigned_angle(pj - ps, -ps);
    a.ps_m = unsigned_angle(pm - ps, -ps);
    a.i_sm = planar_signed(ps, pm);
    a.i_sj = planar_signed(ps, pj);
    a.miz = std::acos(clamp_unit(p_mi.z() / p_mi.norm()));
    a.siz = std::acos(clamp_unit(p_si.z() / p_si.norm()));
    a.jiz = std::acos(clamp_unit(p_ji.z() / p_ji.norm()));
    return a;
}

Eigen::Matrix<double, TetraAngleSet::kCount, 9> tetra_angle_jacobian(
    const Vec3& p_ji, const Vec3& p_mi, const Vec3& p_si) {
    using Jac = Eigen::Matrix<double, TetraAngleSet::kCount, 9>;
    Jac jac = Jac::Zero();

    // d/du of arccos(u^ . v^).
    const auto d_unsigned = [](const Vec3& u, const Vec3& v) -> Vec3 {
        const double nu = u.norm(), nv = v.norm();
        const Vec3 uh = u / nu, vh = v / nv;
        const double t = clamp_unit(uh.dot(vh));
        const double denom = std::max(std::sqrt(1.0 - t * t), 1e-12);
        return -(vh - t * uh) / (nu * denom);
    };
    // d/du of atan2(ux vy - uy vx, ux vx + uy vy); third component unused.
    const auto d_signed = [](const Vec3& u, const Vec3& v) -> Vec3 {
        const double c = u.x() * v.y() - u.y() * v.x();
        const double d = u.x() * v.x() + u.y() * v.y();
        const double den = std::max(c * c + d * d, 1e-24);
        return Vec3((d * v.y() - c * v.x()) / den,
                    (-d * v.x() - c * v.y()) / den, 0.0);
    };

    // Angle arguments are affine in q = (p_ji, p_mi, p_si); cj/cm/cs are
    // the scalar coefficients of each block, with an optional horizontal
    // projection applied to both argument and derivative.
    struct Arg {
        double cj, cm, cs;
        bool project;
        bool z_axis;  // v = e_z (fixed)
    };
    const auto eval = [&](const Arg& g) -> Vec3 {
        Vec3 w = g.cj * p_ji + g.cm * p_mi + g.cs * p_si;
        if (g.project) w.z() = 0.0;
        return w;
    };
    const auto scatter = [&](int row, const Arg& g, Vec3 d) {
        if (g.project) d.z() = 0.0;
        jac.block<1, 3>(row, 0) += g.cj * d.transpose();
        jac.block<1, 3>(row, 3) += g.cm * d.transpose();
        jac.block<1, 3>(row, 6) += g.cs * d.transpose();
    };
    const auto add_unsigned = [&](int row, const Arg& gu, const Arg& gv) {
        const Vec3 u = eval(gu), v = eval(gv);
        scatter(row, gu, d_unsigned(u, v));
        scatter(row, gv, d_unsigned(v, u));
    };
    const auto add_signed = [&](int row, const Arg& gu, const Arg& gv) {
        const Vec3 u = eval(gu), v = eval(gv);
        scatter(row, gu, d_signed(u, v));
        // datan2 wrt v mirrors the u formula with the cross sign flipped.
        const double c = u.x() * v.y() - u.y() * v.x();
        const double d = u.x() * v.x() + u.y() * v.y();
        const double den = std::max(c * c + d * d, 1e-24);
        Vec3 dv((d * -u.y() - c * u.x()) / den, (d * u.x() - c * u.y()) / den,
                0.0);
        scatter(row, gv, dv);
    };
    const auto add_zaxis = [&](int row, const Arg& gu) {
        const Vec3 u = eval(gu);
        scatter(row, gu, d_unsigned(u, Vec3::UnitZ()));
    };

    const Arg ji{1, 0, 0, false, false}, mi{0, 1, 0, false, false},
        si{0, 0, 1, false, false};
    const Arg nji{-1, 0, 0, false, false}, nmi{0, -1, 0, false, false},
        nsi{0, 0, -1, false, false};
    const Arg mj{-1, 1, 0, false, false}, sj{-1, 0, 1, false, false},
        jm{1, -1, 0, false, false}, js{1, 0, -1, false, false};
    const Arg pji{1, 0, 0, true, false}, pmi{0, 1, 0, true, false},
        psi{0, 0, 1, true, false};
    const Arg npji{-1, 0, 0, true, false}, npmi{0, -1, 0, true, false},
        npsi{0, 0, -1, true, false};
    const Arg psj{-1, 0, 1, true, false}, psm{0, -1, 1, true, false},
        pjs{1, 0, -1, true, false}, pms{0, 1, -1, true, false};

    add_unsigned(0, mj, nji);    // mji: at j, rays to m and i
    add_unsigned(1, sj, nji);    // sji
    add_unsigned(2, jm, nmi);    // jmi
    add_unsigned(3, js, nsi);    // jsi
    add_unsigned(4, psj, npji);  // s'j'i: at j'
    add_unsigned(5, psm, npmi);  // s'm'i: at m'
    add_unsigned(6, pjs, npsi);  // j's'i: at s'
    add_unsigned(7, pms, npsi);  // m's'i: at s'
    add_signed(8, psi, pmi);     // s'im'
    add_signed(9, psi, pji);     // s'ij'
    add_zaxis(10, mi);           // miz
    add_zaxis(11, si);           // siz
    add_zaxis(12, ji);           // jiz
    (void)ji;
    (void)mi;
    (void)si;
    return jac;
}

Vec3 aoa_bearing(const AzimuthElevation& ae) {
    const double cb = std::cos(ae.azimuth), sb = std::sin(ae.azimuth);
    const double cg = std::cos(ae.elevation), sg = std::sin(ae.elevation);
    return Vec3(cb * cg, sb * cg, sg);
}

const AzimuthElevation& AoaPanel::reading(int observer, int target) const {
    const auto& r = obs[observer][target];
    if (!r.has_value()) {
        throw MissingReading("missing azimuth/elevation reading");
    }
    return *r;
}

TetraAngleSet aoa_to_interior(const AoaPanel& readings) {
    using V = AoaPanel;
    const auto bear = [&](int a, int b) {
        return aoa_bearing(readings.reading(a, b));
    };
    // Projection of the bearing onto the horizontal plane, renormalized.
    // The azimuth alone determines it, which stays defined as the
    // elevation approaches +-pi/2.
    const auto pbear = [&](int a, int b) {
        const auto& r = readings.reading(a, b);
        return Vec3(std::cos(r.azimuth), std::sin(r.azimuth), 0.0);
    };

    TetraAngleSet a;
    a.mji = unsigned_angle(bear(V::J, V::M), bear(V::J, V::I));
    a.sji = unsigned_angle(bear(V::J, V::S), bear(V::J, V::I));
    a.jmi = unsigned_angle(bear(V::M, V::J), bear(V::M, V::I));
    a.jsi = unsigned_angle(bear(V::S, V::J), bear(V::S, V::I));
    // Projected-triangle angles: the XOY planes of all local frames are
    // parallel, so each robot evaluates its own projected bearings.
    a.pj_s = unsigned_angle(pbear(V::J, V::S), pbear(V::J, V::I));
    a.pm_s = unsigned_angle(pbear(V::M, V::S), pbear(V::M, V::I));
    a.ps_j = unsigned_angle(pbear(V::S, V::J), pbear(V::S, V::I));
    a.ps_m = unsigned_angle(pbear(V::S, V::M), pbear(V::S, V::I));
    a.i_sm = signed_angle(pbear(V::I, V::S), pbear(V::I, V::M));
    a.i_sj = signed_angle(pbear(V::I, V::S), pbear(V::I, V::J));
    a.miz = kPi / 2.0 - readings.reading(V::I, V::M).elevation;
    a.siz = kPi / 2.0 - readings.reading(V::I, V::S).elevation;
    a.jiz = kPi / 2.0 - readings.reading(V::I, V::J).elevation;
    return a;
}

TetraAngleSet distances_to_angles(const PairwiseDistances& d, const Heights& h,
                                  int chirality) {
    const auto check_triangle = [](double a, double b, double c) {
        if (a <= 0 || b <= 0 || c <= 0) {
            throw TriangleInequalityViolation("nonpositive distance");
        }
        if (a >= b + c || b >= a + c || c >= a + b) {
            throw TriangleInequalityViolation("face violates triangle inequality");
        }
    };
    check_triangle(d.ij, d.im, d.jm);
    check_triangle(d.ij, d.is, d.js);
    check_triangle(d.im, d.is, d.ms);
    check_triangle(d.jm, d.js, d.ms);

    // Projected edge length sqrt(l^2 - dz^2) = l cos(arcsin(|dz|/l)).
    const auto proj_len = [](double l, double dz) {
        if (std::abs(dz) > l) {
            throw HeightExceedsDistance("height difference exceeds distance");
        }
        return std::sqrt(l * l - dz * dz);
    };
    const double lij = proj_len(d.ij, h.j - h.i);
    const double lim = proj_len(d.im, h.m - h.i);
    const double lis = proj_len(d.is, h.s - h.i);
    const double ljs = proj_len(d.js, h.s - h.j);
    const double lms = proj_len(d.ms, h.s - h.m);
    const double ljm = proj_len(d.jm, h.m - h.j);
    if (lij < 1e-12 || lim < 1e-12 || lis < 1e-12) {
        throw CollinearProjection("projected point coincides with i");
    }

    const auto cosine_angle = [](double adj1, double adj2, double opp) {
        const double c = (adj1 * adj1 + adj2 * adj2 - opp * opp) /
                         (2.0 * adj1 * adj2);
        return std::acos(clamp_unit(c));
    };

    TetraAngleSet a;
    a.mji = cosine_angle(d.jm, d.ij, d.im);
    a.sji = cosine_angle(d.js, d.ij, d.is);
    a.jmi = cosine_angle(d.jm, d.im, d.ij);
    a.jsi = cosine_angle(d.js, d.is, d.ij);
    a.pj_s = cosine_angle(ljs, lij, lis);
    a.pm_s = cosine_angle(lms, lim, lis);
    a.ps_j = cosine_angle(ljs, lis, lij);
    a.ps_m = cosine_angle(lms, lis, lim);

    // Magnitudes of the signed angles at i, then side resolution: j' and
    // m' sit on the same side of the ray i->s' iff |phi_j - phi_m|
    // reproduces the projected angle between i->j' and i->m'.
    const double phi_j = cosine_angle(lis, lij, ljs);
    const double phi_m = cosine_angle(lis, lim, lms);
    const double jim = cosine_angle(lij, lim, ljm);
    const double same = std::abs(phi_j - phi_m);
    double opp = phi_j + phi_m;
    if (opp > kPi) opp = 2.0 * kPi - opp;
    const bool same_side = std::abs(jim - same) <= std::abs(jim - opp);
    const double sign = chirality >= 0 ? 1.0 : -1.0;
    a.i_sj = sign * phi_j;
    a.i_sm = (same_side ? sign : -sign) * phi_m;

    a.jiz = std::acos(clamp_unit((h.j - h.i) / d.ij));
    a.miz = std::acos(clamp_unit((h.m - h.i) / d.im));
    a.siz = std::acos(clamp_unit((h.s - h.i) / d.is));
    return a;
}

}  // namespace relloc
