#include "relloc/linear_localizer.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace relloc {

namespace {

// 2x2 matrix v_x = [[v1, -v2], [v2, v1]] from the displacement's XY part.
Mat2 planar_cross(const Vec3& v) {
    Mat2 m;
    m << v.x(), -v.y(), v.y(), v.x();
    return m;
}

// Normal equations are declared singular when the factor matrix either
// vanishes outright or its squared condition number passes the cutoff.
void check_solvable(const Eigen::MatrixXd& m, double cond_threshold,
                    const char* what) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    const double smax = s(0), smin = s(s.size() - 1);
    if (smin < 1e-12 || (smax / smin) * (smax / smin) > cond_threshold) {
        throw SingularNormalEquations(what);
    }
}

Eigen::Matrix<double, 6, 6> jm_concat(const CoefficientTriple& c) {
    Eigen::Matrix<double, 6, 6> m;
    m << c.a_j, c.a_m;
    return m;
}

}  // namespace

CoefficientTriple build_coefficients(const TetraAngleSet& a) {
    const double s_pj = std::sin(a.pj_s), s_pm = std::sin(a.pm_s);
    const double s_psj = std::sin(a.ps_j), s_psm = std::sin(a.ps_m);
    const double c_miz = std::cos(a.miz), c_siz = std::cos(a.siz),
                 c_jiz = std::cos(a.jiz);
    const double s_mji = std::sin(a.mji), s_sji = std::sin(a.sji),
                 s_jmi = std::sin(a.jmi), s_jsi = std::sin(a.jsi);
    for (double v : {s_pj, s_pm, c_miz, c_siz, c_jiz, s_mji, s_sji, s_jmi,
                     s_jsi}) {
        if (std::abs(v) < 1e-12) {
            throw AssumptionViolated("angle set violates Assumption 1");
        }
    }

    CoefficientTriple c;
    c.a_j.setZero();
    c.a_m.setZero();
    c.a_s.setZero();

    c.a_j.block<2, 2>(0, 0) = s_pj * Mat2::Identity();
    c.a_j(2, 2) = c_miz * s_mji;
    c.a_j(5, 2) = c_siz * s_sji;

    c.a_m(2, 2) = -c_jiz * s_jmi;
    c.a_m.block<2, 2>(3, 0) = s_pm * Mat2::Identity();

    c.a_s.block<2, 2>(0, 0) = -s_psj * rot2(a.i_sj);
    c.a_s.block<2, 2>(3, 0) = -s_psm * rot2(a.i_sm);
    c.a_s(5, 2) = -c_jiz * s_jsi;
    return c;
}

Vector15 RelativeState::to_vector() const {
    Vector15 v;
    v << p_ji, p_mi, p_si, r_ji, r_mi, r_si;
    return v;
}

RelativeState RelativeState::from_vector(const Vector15& v) {
    RelativeState x;
    x.p_ji = v.segment<3>(0);
    x.p_mi = v.segment<3>(3);
    x.p_si = v.segment<3>(6);
    x.r_ji = v.segment<2>(9);
    x.r_mi = v.segment<2>(11);
    x.r_si = v.segment<2>(13);
    return x;
}

RelativeState RelativeState::normalized() const {
    RelativeState x = *this;
    x.r_ji.normalize();
    x.r_mi.normalize();
    x.r_si.normalize();
    return x;
}

DegeneracyReport detect_degeneracy(const TetraAngleSet& a_k,
                                   const TetraAngleSet& a_k1, double eps1,
                                   double eps2, double c_zero) {
    DegeneracyReport r;
    const auto z_spread = [](const TetraAngleSet& a) {
        return std::max({std::abs(a.miz - a.jiz), std::abs(a.miz - a.siz),
                         std::abs(a.jiz - a.siz)});
    };
    r.z_spread_k = z_spread(a_k);
    r.z_spread_k1 = z_spread(a_k1);
    r.coplanar = r.z_spread_k < eps1 || r.z_spread_k1 < eps1;

    r.angle_change = (a_k1.to_vector() - a_k.to_vector()).norm();
    r.strong_similarity = r.angle_change < eps2;

    // Appendix II condition C1: the projected triangle is similar at the
    // two instants, visible as vanishing changes of its three angles.
    const auto c1 = [&](double d1, double d2, double d3) {
        return std::max({std::abs(d1), std::abs(d2), std::abs(d3)}) < c_zero;
    };
    r.c1_similar_projection_j =
        c1(a_k1.ps_j - a_k.ps_j, a_k1.pj_s - a_k.pj_s, a_k1.i_sj - a_k.i_sj);
    r.c1_similar_projection_m =
        c1(a_k1.ps_m - a_k.ps_m, a_k1.pm_s - a_k.pm_s, a_k1.i_sm - a_k.i_sm);

    // Appendix II condition C2: the determinant ratio of Theorem 1.
    const auto ratio = [](double num, double den) {
        return den == 0.0 ? std::numeric_limits<double>::infinity()
                          : num / den;
    };
    r.c2_value_j =
        ratio(std::sin(a_k.jsi) * std::cos(a_k.jiz),
              std::sin(a_k1.jsi) * std::cos(a_k1.jiz)) -
        ratio(std::sin(a_k.sji) * std::cos(a_k.siz),
              std::sin(a_k1.sji) * std::cos(a_k1.siz));
    r.c2_value_m =
        ratio(std::sin(a_k.jmi) * std::cos(a_k.jiz),
              std::sin(a_k1.jmi) * std::cos(a_k1.jiz)) -
        ratio(std::sin(a_k.mji) * std::cos(a_k.miz),
              std::sin(a_k1.mji) * std::cos(a_k1.miz));
    r.c2_zero_ratio_j = std::abs(r.c2_value_j) < c_zero;
    r.c2_zero_ratio_m = std::abs(r.c2_value_m) < c_zero;
    return r;
}

AlignedSolution solve_aligned(const TetraAngleSet& a_k,
                              const TetraAngleSet& a_k1,
                              const TetraDisplacements& d_k,
                              double cond_threshold) {
    const CoefficientTriple c0 = build_coefficients(a_k);
    const CoefficientTriple c1 = build_coefficients(a_k1);

    const Eigen::Matrix<double, 6, 6> m0 = jm_concat(c0);
    Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(m0);
    if (!lu.isInvertible()) {
        throw SingularNormalEquations("[A_j, A_m] is singular");
    }

    Eigen::Matrix<double, 6, 6> m1;
    m1 << c1.a_j, c1.a_m;
    const Mat63 q1 = c1.a_s - m1 * lu.solve(c0.a_s);

    const Vec3 dp_ji = d_k.d_i - d_k.d_j;
    const Vec3 dp_mi = d_k.d_i - d_k.d_m;
    const Vec3 dp_si = d_k.d_i - d_k.d_s;
    const Eigen::Matrix<double, 6, 1> rhs =
        -c1.a_j * dp_ji - c1.a_m * dp_mi - c1.a_s * dp_si;

    check_solvable(q1, cond_threshold, "Q1' Q1 is ill conditioned");

    AlignedSolution sol;
    sol.p_si = (q1.transpose() * q1).ldlt().solve(q1.transpose() * rhs);
    const Eigen::Matrix<double, 6, 1> jm = -lu.solve(c0.a_s * sol.p_si);
    sol.p_ji = jm.head<3>();
    sol.p_mi = jm.tail<3>();
    sol.p_ji1 = sol.p_ji + dp_ji;
    sol.p_mi1 = sol.p_mi + dp_mi;
    sol.p_si1 = sol.p_si + dp_si;
    return sol;
}

UnalignedSolution solve_unaligned(const TetraAngleSet& a_k,
                                  const TetraAngleSet& a_k1,
                                  const TetraAngleSet& a_k2,
                                  const TetraDisplacements& d_k,
                                  const TetraDisplacements& d_k1,
                                  double cond_threshold) {
    const CoefficientTriple c0 = build_coefficients(a_k);
    const CoefficientTriple c1 = build_coefficients(a_k1);
    const CoefficientTriple c2 = build_coefficients(a_k2);

    Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(jm_concat(c0));
    if (!lu.isInvertible()) {
        throw SingularNormalEquations("[A_j, A_m] is singular");
    }

    const auto block_row = [&](const CoefficientTriple& ct, const Vec3& cum_i,
                               const Vec3& cum_j, const Vec3& cum_m,
                               const Vec3& cum_s) {
        Eigen::Matrix<double, 6, 9> q;
        q.block<6, 3>(0, 0) = ct.a_s - (Eigen::Matrix<double, 6, 6>() << ct.a_j,
                                        ct.a_m).finished() *
                                           lu.solve(c0.a_s);
        q.block<6, 2>(0, 3) = -ct.a_j.leftCols<2>() * planar_cross(cum_j);
        q.block<6, 2>(0, 5) = -ct.a_m.leftCols<2>() * planar_cross(cum_m);
        q.block<6, 2>(0, 7) = -ct.a_s.leftCols<2>() * planar_cross(cum_s);
        Eigen::Matrix<double, 6, 1> rhs =
            -(ct.a_j + ct.a_m + ct.a_s) * cum_i + ct.a_j.col(2) * cum_j.z() +
            ct.a_m.col(2) * cum_m.z() + ct.a_s.col(2) * cum_s.z();
        return std::make_pair(q, rhs);
    };

    const auto [q21, rhs21] =
        block_row(c1, d_k.d_i, d_k.d_j, d_k.d_m, d_k.d_s);
    const auto [q22, rhs22] =
        block_row(c2, d_k.d_i + d_k1.d_i, d_k.d_j + d_k1.d_j,
                  d_k.d_m + d_k1.d_m, d_k.d_s + d_k1.d_s);

    UnalignedSolution sol;
    sol.q2.topRows<6>() = q21;
    sol.q2.bottomRows<6>() = q22;
    sol.q2_rhs.head<6>() = rhs21;
    sol.q2_rhs.tail<6>() = rhs22;

    check_solvable(sol.q2, cond_threshold, "Q2' Q2 is ill conditioned");

    const Eigen::Matrix<double, 9, 1> y =
        (sol.q2.transpose() * sol.q2)
            .ldlt()
            .solve(sol.q2.transpose() * sol.q2_rhs);

    RelativeState& x = sol.state;
    x.p_si = y.head<3>();
    x.r_ji = y.segment<2>(3);
    x.r_mi = y.segment<2>(5);
    x.r_si = y.segment<2>(7);
    for (const Vec2* r : {&x.r_ji, &x.r_mi, &x.r_si}) {
        if (r->norm() < 1e-8) {
            throw SingularNormalEquations("orientation estimate collapsed");
        }
    }
    x = x.normalized();
    const Eigen::Matrix<double, 6, 1> jm = -lu.solve(c0.a_s * x.p_si);
    x.p_ji = jm.head<3>();
    x.p_mi = jm.tail<3>();
    return sol;
}

RelativeState propagate_state(const RelativeState& x,
                              const TetraDisplacements& d) {
    const auto shift = [&](const Vec3& p, const Vec2& r, const Vec3& dp_other) {
        return Vec3(p + d.d_i -
                    planar_lift(dp_other) * Vec3(r.x(), r.y(), 1.0));
    };
    RelativeState out = x;
    out.p_ji = shift(x.p_ji, x.r_ji, d.d_j);
    out.p_mi = shift(x.p_mi, x.r_mi, d.d_m);
    out.p_si = shift(x.p_si, x.r_si, d.d_s);
    return out;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> build_stacked_system(
    std::span<const TetraAngleSet> angles,
    std::span<const TetraDisplacements> disps) {
    const int d = static_cast<int>(angles.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(6 * d, 15);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(6 * d);

    Vec3 cum_i = Vec3::Zero(), cum_j = Vec3::Zero(), cum_m = Vec3::Zero(),
         cum_s = Vec3::Zero();
    for (int t = 0; t < d; ++t) {
        if (t > 0) {
            cum_i += disps[t - 1].d_i;
            cum_j += disps[t - 1].d_j;
            cum_m += disps[t - 1].d_m;
            cum_s += disps[t - 1].d_s;
        }
        const CoefficientTriple ct = build_coefficients(angles[t]);
        a.block<6, 3>(6 * t, 0) = ct.a_j;
        a.block<6, 3>(6 * t, 3) = ct.a_m;
        a.block<6, 3>(6 * t, 6) = ct.a_s;
        a.block<6, 2>(6 * t, 9) = -ct.a_j.leftCols<2>() * planar_cross(cum_j);
        a.block<6, 2>(6 * t, 11) = -ct.a_m.leftCols<2>() * planar_cross(cum_m);
        a.block<6, 2>(6 * t, 13) = -ct.a_s.leftCols<2>() * planar_cross(cum_s);
        b.segment<6>(6 * t) = -(ct.a_j + ct.a_m + ct.a_s) * cum_i +
                              ct.a_j.col(2) * cum_j.z() +
                              ct.a_m.col(2) * cum_m.z() +
                              ct.a_s.col(2) * cum_s.z();
    }
    return {a, b};
}

}  // namespace relloc
