#include "relloc/wtls.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <memory>

namespace relloc {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::array<double, 3> refine_angles(const std::array<double, 3>& measured) {
    std::array<double, 3> mag{std::abs(measured[0]), std::abs(measured[1]),
                              std::abs(measured[2])};
    const double shift = (kPi - (mag[0] + mag[1] + mag[2])) / 3.0;
    for (auto& m : mag) m += shift;
    // pin the magnitude sum to pi exactly
    mag[2] = kPi - (mag[0] + mag[1]);
    while ((mag[0] + mag[1]) + mag[2] != kPi) {
        mag[2] = std::nextafter(mag[2], kPi - (mag[0] + mag[1]));
    }
    const auto sgn = [](double v) { return v < 0 ? -1.0 : 1.0; };
    return {sgn(measured[0]) * mag[0], sgn(measured[1]) * mag[1],
            sgn(measured[2]) * mag[2]};
}

TetraAngleSet refine_angle_set(const TetraAngleSet& a) {
    TetraAngleSet out = a;
    const auto j_tri = refine_angles({a.pj_s, a.ps_j, a.i_sj});
    out.pj_s = j_tri[0];
    out.ps_j = j_tri[1];
    out.i_sj = j_tri[2];
    const auto m_tri = refine_angles({a.pm_s, a.ps_m, a.i_sm});
    out.pm_s = m_tri[0];
    out.ps_m = m_tri[1];
    out.i_sm = m_tri[2];
    return out;
}

Vector15 tls_closed_form(const Eigen::MatrixXd& c_tilde) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c_tilde, Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const int last = static_cast<int>(s.size()) - 1;
    if (last != 15) {
        throw Error("c_tilde must have 16 columns");
    }
    if (s(last - 1) - s(last) <= 1e-12) {
        throw RepeatedSmallestSingularValue(
            "smallest singular value of C~ is not simple");
    }
    const Eigen::VectorXd v = svd.matrixV().col(last);
    if (std::abs(v(15)) < 1e-12) {
        throw ZeroLastComponent("defective TLS direction: v(16,16) ~ 0");
    }
    return -v.head<15>() / v(15);
}

Eigen::MatrixXd build_c_tilde(const MeasurementWindow& w, bool refine) {
    std::vector<TetraAngleSet> angles = w.angles;
    if (refine) {
        for (auto& a : angles) a = refine_angle_set(a);
    }
    const auto [a, b] = build_stacked_system(angles, w.disps);
    Eigen::MatrixXd c(a.rows(), 16);
    c << a, b;
    return c;
}

Eigen::MatrixXd build_noise_covariance(const MeasurementWindow& w,
                                       double sigma_angle, double sigma_disp,
                                       bool refine, bool row_block_diagonal) {
    const int d = w.steps();
    const int rows = 6 * d;
    const int n_angle = TetraAngleSet::kCount * d;
    const int n_disp = 12 * (d - 1);
    const int m = n_angle + n_disp;

    const auto assemble = [&](const MeasurementWindow& win) {
        return Eigen::MatrixXd(build_c_tilde(win, refine));
    };
    const auto perturb = [&](int idx, double h) {
        MeasurementWindow win = w;
        if (idx < n_angle) {
            const int t = idx / TetraAngleSet::kCount;
            const int c = idx % TetraAngleSet::kCount;
            auto v = win.angles[t].to_vector();
            v(c) += h;
            win.angles[t] = TetraAngleSet::from_vector(v);
        } else {
            const int off = idx - n_angle;
            const int t = off / 12;
            const int c = off % 12;
            Vec3* d_ptr[4] = {&win.disps[t].d_i, &win.disps[t].d_j,
                              &win.disps[t].d_m, &win.disps[t].d_s};
            (*d_ptr[c / 3])(c % 3) += h;
        }
        return assemble(win);
    };

    const double h = 1e-5;
    Eigen::MatrixXd jac(rows * 16, m);
    for (int idx = 0; idx < m; ++idx) {
        const Eigen::MatrixXd cp = perturb(idx, h);
        const Eigen::MatrixXd cm = perturb(idx, -h);
        const Eigen::MatrixXd dc = (cp - cm) / (2 * h);
        jac.col(idx) = Eigen::Map<const Eigen::VectorXd>(dc.data(), rows * 16);
    }

    Eigen::VectorXd var(m);
    var.head(n_angle).setConstant(sigma_angle * sigma_angle);
    var.tail(n_disp).setConstant(sigma_disp * sigma_disp);

    Eigen::MatrixXd p = jac * var.asDiagonal() * jac.transpose();
    if (row_block_diagonal) {
        for (int i = 0; i < p.rows(); ++i) {
            for (int j = 0; j < p.cols(); ++j) {
                if (i % rows != j % rows) p(i, j) = 0.0;
            }
        }
    }
    return 0.5 * (p + p.transpose());
}

NoisyLinearSystem build_noisy_system(const MeasurementWindow& w,
                                     double sigma_angle, double sigma_disp,
                                     bool refine, bool row_block_diagonal) {
    NoisyLinearSystem sys;
    sys.c_tilde = build_c_tilde(w, refine);
    sys.p_dc = build_noise_covariance(w, sigma_angle, sigma_disp, refine,
                                      row_block_diagonal);
    return sys;
}

ManifoldPoint state_to_point(const RelativeState& x) {
    ManifoldPoint p;
    p.euclid = Eigen::VectorXd(9);
    p.euclid << x.p_ji, x.p_mi, x.p_si;
    p.circles = {x.r_ji, x.r_mi, x.r_si};
    return p;
}

RelativeState point_to_state(const ManifoldPoint& p) {
    RelativeState x;
    x.p_ji = p.euclid.segment<3>(0);
    x.p_mi = p.euclid.segment<3>(3);
    x.p_si = p.euclid.segment<3>(6);
    x.r_ji = p.circles[0];
    x.r_mi = p.circles[1];
    x.r_si = p.circles[2];
    return x;
}

RelativeState project_state(const Vector15& v) {
    RelativeState x = RelativeState::from_vector(v);
    const auto fix = [](Vec2& r) {
        const double n = r.norm();
        r = n < 1e-12 ? Vec2(1, 0) : Vec2(r / n);
    };
    fix(x.r_ji);
    fix(x.r_mi);
    fix(x.r_si);
    return x;
}

namespace {

// Weighted-TLS cost with the weight recomputed at every point. Caches the
// per-point factorization and the 16 partial sums S_a = sum_b z_b P_ab so
// value, gradient, and Gauss-Newton products share one preparation pass.
class WtlsCost {
  public:
    WtlsCost(const NoisyLinearSystem& sys, double floor)
        : c_(sys.c_tilde), p_(sys.p_dc), rows_(static_cast<int>(c_.rows())),
          floor_(floor) {}

    double value(const ManifoldPoint& pt) {
        prepare(pt);
        return 0.5 * e_.dot(u_);
    }

    TangentVector gradient(const ManifoldPoint& pt) {
        prepare(pt);
        Eigen::VectorXd g(15);
        for (int k = 0; k < 15; ++k) {
            g(k) = c_.col(k).dot(u_) - u_.dot(s_[k] * u_);
        }
        ambient_grad_ = g;
        return to_tangent(pt, g);
    }

    TangentVector hess_vec(const ManifoldPoint& pt, const TangentVector& v) {
        prepare(pt);
        if (ambient_grad_.size() == 0) gradient(pt);
        Eigen::VectorXd va(15);
        va << v.euclid, v.circles[0], v.circles[1], v.circles[2];
        Eigen::VectorXd ha = gn_ * va;
        // circle curvature correction: -(grad_amb . r) v on each factor
        TangentVector out = to_tangent(pt, ha);
        for (int cidx = 0; cidx < 3; ++cidx) {
            const double radial =
                ambient_grad_.segment<2>(9 + 2 * cidx).dot(pt.circles[cidx]);
            out.circles[cidx] -= radial * v.circles[cidx];
        }
        return out;
    }

    bool regularized() const { return regularized_; }

    // Fisher information of z at the point (Lemma 4).
    Eigen::Matrix<double, 16, 16> fisher(const ManifoldPoint& pt) {
        prepare(pt);
        return c_.transpose() * solver_.solve(c_);
    }

  private:
    void prepare(const ManifoldPoint& pt) {
        Eigen::VectorXd z(16);
        z << pt.euclid, pt.circles[0], pt.circles[1], pt.circles[2], -1.0;
        if (z_.size() == 16 && (z - z_).cwiseAbs().maxCoeff() == 0.0) return;
        z_ = z;
        ambient_grad_.resize(0);

        for (int a = 0; a < 16; ++a) {
            s_[a].setZero(rows_, rows_);
            for (int b = 0; b < 16; ++b) {
                s_[a].noalias() +=
                    z(b) * p_.block(rows_ * a, rows_ * b, rows_, rows_);
            }
        }
        Eigen::MatrixXd pw = Eigen::MatrixXd::Zero(rows_, rows_);
        for (int a = 0; a < 16; ++a) pw.noalias() += z(a) * s_[a];
        pw = 0.5 * (pw + pw.transpose());

        const double scale = std::max(pw.diagonal().maxCoeff(), 0.0);
        regularized_ = regularized_ || scale < 1e3 * floor_;
        pw.diagonal().array() += floor_;

        solver_.compute(pw);
        e_ = c_ * z;
        u_ = solver_.solve(e_);
        gn_ = c_.leftCols<15>().transpose() *
              solver_.solve(c_.leftCols<15>());
    }

    static TangentVector to_tangent(const ManifoldPoint& pt,
                                    const Eigen::VectorXd& ambient) {
        TangentVector t = TangentVector::zero_like(pt);
        t.euclid = ambient.head<9>();
        t.circles[0] = ambient.segment<2>(9);
        t.circles[1] = ambient.segment<2>(11);
        t.circles[2] = ambient.segment<2>(13);
        return project_tangent(pt, t);
    }

    Eigen::MatrixXd c_;
    Eigen::MatrixXd p_;
    int rows_;
    double floor_;
    bool regularized_ = false;

    Eigen::VectorXd z_;
    std::array<Eigen::MatrixXd, 16> s_;
    Eigen::LDLT<Eigen::MatrixXd> solver_;
    Eigen::VectorXd e_, u_;
    Eigen::MatrixXd gn_;
    Eigen::VectorXd ambient_grad_;
};

}  // namespace

WtlsEstimate wtls_solve(const NoisyLinearSystem& sys, const WtlsConfig& cfg) {
    RelativeState init;
    if (cfg.init_from_tls) {
        init = project_state(tls_closed_form(sys.c_tilde));
    } else if (cfg.init) {
        init = cfg.init->normalized();
    } else {
        throw Error("wtls_solve needs an initializer");
    }

    auto cost_impl = std::make_shared<WtlsCost>(sys, cfg.weight_floor);
    CostFunction cost;
    cost.value = [cost_impl](const ManifoldPoint& p) {
        return cost_impl->value(p);
    };
    cost.gradient = [cost_impl](const ManifoldPoint& p) {
        return cost_impl->gradient(p);
    };
    if (cfg.gauss_newton_model) {
        cost.hess_vec = [cost_impl](const ManifoldPoint& p,
                                    const TangentVector& v) {
            return cost_impl->hess_vec(p, v);
        };
    }

    TrustRegionConfig tr = cfg.tr;
    tr.throw_on_collapse = false;  // a collapsed region at a stationary
                                   // point is normal termination here
    const ManifoldPoint p0 = state_to_point(init);
    const double f0 = cost.value(p0);
    TrustRegionResult res;
    try {
        res = trust_region_minimize(cost, p0, tr);
    } catch (const NoProgress&) {
        throw SolverNoProgress("WTLS trust region made no progress");
    }

    WtlsEstimate est;
    est.x = point_to_state(res.point);
    est.cost = res.cost;
    est.init_cost = f0;
    est.iterations = res.iterations;
    est.weight_regularized = cost_impl->regularized();

    // z's last entry is pinned at -1, so the Fisher information of the
    // free parameters is the leading 15x15 block; the full 16x16 matrix
    // is singular in the noiseless limit (C~ z = 0).
    const Eigen::Matrix<double, 15, 15> fx =
        cost_impl->fisher(res.point).topLeftCorner<15, 15>();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 15, 15>> eig(fx);
    const double lmax = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
    Eigen::Matrix<double, 15, 15> inv = Eigen::Matrix<double, 15, 15>::Zero();
    for (int i = 0; i < 15; ++i) {
        const double l = std::max(eig.eigenvalues()(i), lmax * 1e-14);
        inv += eig.eigenvectors().col(i) *
               eig.eigenvectors().col(i).transpose() / l;
    }
    est.crlb = inv;

    const Vector15 xv = est.x.to_vector();
    for (int i = 0; i < 15; ++i) {
        const double half = 1.96 * std::sqrt(std::max(est.crlb(i, i), 0.0));
        est.ci[i] = {xv(i) - half, xv(i) + half};
    }
    return est;
}

}  // namespace relloc
