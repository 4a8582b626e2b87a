#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "relloc/geometry.hpp"
#include "relloc/linear_localizer.hpp"
#include "test_scenes.hpp"

using namespace relloc;
using relloc::testing::random_scene;
using relloc::testing::scene_angles;
using relloc::testing::TetraScene;

namespace {
constexpr double kPi = 3.14159265358979323846;

Vec3 planar_unit(double phi) { return Vec3(std::cos(phi), std::sin(phi), 0); }

AoaPanel panel_from_scene(const TetraScene& s) {
    AoaPanel p;
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            if (a == b) continue;
            const Vec3 bear =
                rotz(-s.yaw[a]) * (s.pos[b] - s.pos[a]).normalized();
            AzimuthElevation ae;
            ae.azimuth = std::atan2(bear.y(), bear.x());
            ae.elevation = std::asin(std::clamp(bear.z(), -1.0, 1.0));
            p.obs[a][b] = ae;
        }
    }
    return p;
}
}  // namespace

TEST_CASE("wrap_angle maps into [-pi, pi) with pi going to -pi") {
    CHECK(wrap_angle(kPi) == doctest::Approx(-kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(-kPi));
    CHECK(wrap_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
    CHECK(wrap_angle(0.25) == doctest::Approx(0.25));
}

TEST_CASE("signed_angle orthogonal pairs") {
    CHECK(signed_angle(Vec3(1, 0, 0), Vec3(0, 1, 0)) ==
          doctest::Approx(kPi / 2));
    CHECK(signed_angle(Vec3(0, 1, 0), Vec3(1, 0, 0)) ==
          doctest::Approx(-kPi / 2));
}

TEST_CASE("signed_angle matches planar atan2 oracle") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    int checked = 0;
    while (checked < 1000) {
        const double a = u(rng), b = u(rng);
        const Vec3 b1 = planar_unit(a), b2 = planar_unit(b);
        if (std::abs(std::abs(b1.dot(b2)) - 1.0) < 1e-9) continue;
        const double oracle = wrap_angle(b - a);
        CHECK(signed_angle(b1, b2) == doctest::Approx(oracle).epsilon(1e-10));
        ++checked;
    }
}

TEST_CASE("signed_angle antisymmetry and frame invariance") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 200; ++t) {
        Vec3 b1(u(rng), u(rng), u(rng)), b2(u(rng), u(rng), u(rng));
        if (b1.norm() < 0.1 || b2.norm() < 0.1) continue;
        b1.normalize();
        b2.normalize();
        if (std::abs(std::abs(b1.dot(b2)) - 1.0) < 1e-6) continue;
        const double fwd = signed_angle(b1, b2);
        CHECK(signed_angle(b2, b1) == doctest::Approx(-fwd).epsilon(1e-12));
        const Mat3 rz = rotz(u(rng) * kPi);
        CHECK(signed_angle(rz * b1, rz * b2) ==
              doctest::Approx(fwd).epsilon(1e-12));
    }
}

TEST_CASE("signed_angle rejects parallel bearings") {
    CHECK_THROWS_AS(signed_angle(Vec3(1, 0, 0), Vec3(1, 0, 0)),
                    DegenerateAngle);
    CHECK_THROWS_AS(signed_angle(Vec3(1, 0, 0), Vec3(-1, 0, 0)),
                    DegenerateAngle);
}

TEST_CASE("planar_lift acts as a Z rotation on the lifted vector") {
    const Vec3 v1(1, 0, 0);
    CHECK((planar_lift(v1) * Vec3(1, 0, 1) - Vec3(1, 0, 0)).norm() == 0.0);
    const Vec3 v2(1, 0, 5);
    CHECK((planar_lift(v2) * Vec3(0, 1, 1) - Vec3(0, 1, 5)).norm() <= 1e-15);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int t = 0; t < 200; ++t) {
        const Vec3 v(u(rng), u(rng), u(rng));
        const double theta = u(rng);
        const Vec3 lhs =
            planar_lift(v) * Vec3(std::cos(theta), std::sin(theta), 1.0);
        CHECK((lhs - rotz(theta) * v).norm() <= 1e-12);
    }
}

TEST_CASE("tetra_angles on a regular tetrahedron") {
    // Unit edge, apex above the base centroid.
    const Vec3 p_i(0, 0, 0), p_j(1, 0, 0), p_m(0.5, std::sqrt(3.0) / 2, 0);
    const Vec3 p_s(0.5, std::sqrt(3.0) / 6, std::sqrt(2.0 / 3.0));
    const TetraAngleSet a = tetra_angles(p_i, p_j, p_m, p_s);
    CHECK(a.mji == doctest::Approx(kPi / 3).epsilon(1e-12));
    CHECK(a.sji == doctest::Approx(kPi / 3).epsilon(1e-12));
    CHECK(a.jmi == doctest::Approx(kPi / 3).epsilon(1e-12));
    CHECK(a.jsi == doctest::Approx(kPi / 3).epsilon(1e-12));
}

TEST_CASE("tetra_angles Z angle vanishes for a neighbor overhead") {
    const Vec3 p_i(0, 0, 0);
    const Vec3 p_j(1e-9, 0, 2.0);  // just off the axis to keep j' distinct
    const Vec3 p_m(1.5, 0.2, 0.4), p_s(0.3, 1.4, -0.6);
    const TetraAngleSet a = tetra_angles(p_i, p_j, p_m, p_s);
    CHECK(std::abs(a.jiz) < 1e-9);
}

TEST_CASE("tetra_angles degenerate configurations throw") {
    CHECK_THROWS_AS(tetra_angles(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0),
                                 Vec3(1, 1, 0)),
                    CoplanarConfiguration);
    // s directly above i puts s' on top of i.
    CHECK_THROWS_AS(tetra_angles(Vec3(0, 0, 0), Vec3(1, 0, 0.2),
                                 Vec3(0, 1, 0.3), Vec3(0, 0, 1)),
                    CollinearProjection);
}

TEST_CASE("projected triangle sum rule") {
    std::mt19937_64 rng(19);
    for (int t = 0; t < 100; ++t) {
        const TetraScene s = random_scene(rng);
        const TetraAngleSet a = scene_angles(s);
        CHECK(std::abs(a.pj_s) + std::abs(a.ps_j) + std::abs(a.i_sj) ==
              doctest::Approx(kPi).epsilon(1e-12));
        CHECK(std::abs(a.pm_s) + std::abs(a.ps_m) + std::abs(a.i_sm) ==
              doctest::Approx(kPi).epsilon(1e-12));
    }
}

TEST_CASE("tetra angles are invariant to a common yaw") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int t = 0; t < 50; ++t) {
        const TetraScene s = random_scene(rng);
        const Mat3 rz = rotz(u(rng));
        const TetraAngleSet a = scene_angles(s);
        const TetraAngleSet b = tetra_angles(rz * s.pos[0], rz * s.pos[1],
                                             rz * s.pos[2], rz * s.pos[3]);
        CHECK((a.to_vector() - b.to_vector()).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("tetra_angle_jacobian matches finite differences") {
    std::mt19937_64 rng(29);
    for (int t = 0; t < 20; ++t) {
        const TetraScene s = random_scene(rng);
        const Vec3 p_ji = s.pos[1] - s.pos[0];
        const Vec3 p_mi = s.pos[2] - s.pos[0];
        const Vec3 p_si = s.pos[3] - s.pos[0];
        const auto jac = tetra_angle_jacobian(p_ji, p_mi, p_si);
        const double h = 1e-6;
        Eigen::Matrix<double, 9, 1> q;
        q << p_ji, p_mi, p_si;
        for (int c = 0; c < 9; ++c) {
            Eigen::Matrix<double, 9, 1> qp = q, qm = q;
            qp(c) += h;
            qm(c) -= h;
            const auto ap = tetra_angles_relative(qp.segment<3>(0),
                                                  qp.segment<3>(3),
                                                  qp.segment<3>(6));
            const auto am = tetra_angles_relative(qm.segment<3>(0),
                                                  qm.segment<3>(3),
                                                  qm.segment<3>(6));
            Eigen::Matrix<double, 13, 1> fd =
                ap.to_vector() - am.to_vector();
            for (int r = 0; r < 13; ++r) fd(r) = wrap_angle(fd(r));
            fd /= 2 * h;
            CHECK((jac.col(c) - fd).cwiseAbs().maxCoeff() <= 1e-5);
        }
    }
}

TEST_CASE("aoa_to_interior reproduces direct angles") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 50; ++t) {
        const TetraScene s = random_scene(rng);
        const TetraAngleSet direct = scene_angles(s);
        const TetraAngleSet conv = aoa_to_interior(panel_from_scene(s));
        CHECK((direct.to_vector() - conv.to_vector()).cwiseAbs().maxCoeff() <=
              1e-10);
    }
}

TEST_CASE("aoa_to_interior straight-up bearing") {
    std::mt19937_64 rng(37);
    TetraScene s = random_scene(rng);
    AoaPanel p = panel_from_scene(s);
    p.obs[AoaPanel::I][AoaPanel::J] = AzimuthElevation{0.0, kPi / 2};
    const TetraAngleSet a = aoa_to_interior(p);
    CHECK(a.jiz == doctest::Approx(0.0));
}

TEST_CASE("aoa_to_interior orthogonal planar bearings") {
    std::mt19937_64 rng(41);
    TetraScene s = random_scene(rng);
    AoaPanel p = panel_from_scene(s);
    p.obs[AoaPanel::I][AoaPanel::J] = AzimuthElevation{0.0, 0.0};
    p.obs[AoaPanel::I][AoaPanel::M] = AzimuthElevation{kPi / 2, 0.0};
    const TetraAngleSet a = aoa_to_interior(p);
    // angle between the projected bearings to j' and m'
    CHECK(std::abs(wrap_angle(a.i_sj - a.i_sm)) ==
          doctest::Approx(kPi / 2).epsilon(1e-12));
}

TEST_CASE("aoa_to_interior requires all readings") {
    std::mt19937_64 rng(43);
    TetraScene s = random_scene(rng);
    AoaPanel p = panel_from_scene(s);
    p.obs[AoaPanel::J][AoaPanel::I].reset();
    CHECK_THROWS_AS(aoa_to_interior(p), MissingReading);
}

namespace {
PairwiseDistances scene_distances(const TetraScene& s) {
    PairwiseDistances d;
    d.ij = (s.pos[1] - s.pos[0]).norm();
    d.im = (s.pos[2] - s.pos[0]).norm();
    d.is = (s.pos[3] - s.pos[0]).norm();
    d.jm = (s.pos[2] - s.pos[1]).norm();
    d.js = (s.pos[3] - s.pos[1]).norm();
    d.ms = (s.pos[3] - s.pos[2]).norm();
    return d;
}

Heights scene_heights(const TetraScene& s) {
    return Heights{s.pos[0].z(), s.pos[1].z(), s.pos[2].z(), s.pos[3].z()};
}
}  // namespace

TEST_CASE("distances_to_angles flat equal-height case") {
    // Equal heights: projected lengths equal raw lengths, Z angles are
    // pi/2 (alpha_jij' = 0).
    const Vec3 p_i(0, 0, 1), p_j(1, 0, 1), p_m(0.5, std::sqrt(3.0) / 2, 1);
    TetraScene s;
    s.pos = {p_i, p_j, p_m, Vec3(0.5, 0.3, 2.4)};
    PairwiseDistances d = scene_distances(s);
    Heights h = scene_heights(s);
    const TetraAngleSet a = distances_to_angles(d, h);
    CHECK(a.jiz == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK(a.miz == doctest::Approx(kPi / 2).epsilon(1e-12));
    // projected i-j edge keeps its raw length: interior angle of the
    // equilateral base is exact
    CHECK(a.mji == doctest::Approx(kPi / 3).epsilon(1e-12));
}

TEST_CASE("distances_to_angles arcsin(1/2) height offset") {
    const double lij = 2.0;
    // h_i - h_j = l_ij / 2 gives alpha_jij' = pi/6, pointing down.
    const Vec3 p_i(0, 0, 1), p_j(std::sqrt(3.0), 0, 0);
    TetraScene s;
    s.pos = {p_i, p_j, Vec3(0.3, 1.7, 0.4), Vec3(-1.2, 0.8, 1.9)};
    PairwiseDistances d = scene_distances(s);
    Heights h = scene_heights(s);
    CHECK(d.ij == doctest::Approx(lij));
    const TetraAngleSet a = distances_to_angles(d, h);
    CHECK(a.jiz == doctest::Approx(kPi / 2 + kPi / 6).epsilon(1e-12));
}

TEST_CASE("distances_to_angles round trip against tetra_angles") {
    std::mt19937_64 rng(47);
    for (int t = 0; t < 100; ++t) {
        const TetraScene s = random_scene(rng);
        const TetraAngleSet direct = scene_angles(s);
        const int chirality = direct.i_sj >= 0 ? +1 : -1;
        const TetraAngleSet conv = distances_to_angles(
            scene_distances(s), scene_heights(s), chirality);
        CHECK((direct.to_vector() - conv.to_vector()).cwiseAbs().maxCoeff() <=
              1e-9);
    }
}

TEST_CASE("distances_to_angles input validation") {
    PairwiseDistances d{1.0, 1.0, 1.0, 3.5, 1.0, 1.0};  // jm too long
    Heights h{0, 0, 0, 0.5};
    CHECK_THROWS_AS(distances_to_angles(d, h), TriangleInequalityViolation);

    PairwiseDistances d2{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    Heights h2{0, 2.5, 0, 0.5};  // |h_i - h_j| > l_ij
    CHECK_THROWS_AS(distances_to_angles(d2, h2), HeightExceedsDistance);
}
