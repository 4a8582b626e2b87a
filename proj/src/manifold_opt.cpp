#include "relloc/manifold_opt.hpp"

#include <cmath>
#include <random>

namespace relloc {

ManifoldPoint ManifoldPoint::zero_like(const ManifoldPoint& p) {
    ManifoldPoint z;
    z.euclid = Eigen::VectorXd::Zero(p.euclid.size());
    z.circles.assign(p.circles.size(), Vec2::Zero());
    return z;
}

ManifoldPoint& ManifoldPoint::operator+=(const ManifoldPoint& o) {
    euclid += o.euclid;
    for (size_t i = 0; i < circles.size(); ++i) circles[i] += o.circles[i];
    return *this;
}

ManifoldPoint& ManifoldPoint::operator*=(double a) {
    euclid *= a;
    for (auto& c : circles) c *= a;
    return *this;
}

double dot(const TangentVector& a, const TangentVector& b) {
    double s = a.euclid.dot(b.euclid);
    for (size_t i = 0; i < a.circles.size(); ++i) {
        s += a.circles[i].dot(b.circles[i]);
    }
    return s;
}

double norm(const TangentVector& a) { return std::sqrt(dot(a, a)); }

TangentVector axpy(double a, const TangentVector& x, const TangentVector& y) {
    TangentVector r = y;
    r.euclid += a * x.euclid;
    for (size_t i = 0; i < r.circles.size(); ++i) {
        r.circles[i] += a * x.circles[i];
    }
    return r;
}

TangentVector project_tangent(const ManifoldPoint& point,
                              const TangentVector& ambient) {
    TangentVector t = ambient;
    for (size_t i = 0; i < point.circles.size(); ++i) {
        const Vec2& r = point.circles[i];
        t.circles[i] -= t.circles[i].dot(r) * r;
    }
    return t;
}

ManifoldPoint retract(const ManifoldPoint& point, const TangentVector& v) {
    ManifoldPoint p = point;
    p.euclid += v.euclid;
    for (size_t i = 0; i < p.circles.size(); ++i) {
        Vec2 r = p.circles[i] + v.circles[i];
        const double n = r.norm();
        if (n < 1e-12) {
            throw RetractUndefined("circle retraction through the origin");
        }
        p.circles[i] = r / n;
    }
    return p;
}

namespace {

TangentVector fd_hess_vec(const CostFunction& cost, const ManifoldPoint& x,
                          const TangentVector& g, const TangentVector& v) {
    const double vn = norm(v);
    if (vn == 0.0) return TangentVector::zero_like(x);
    const double h = 1e-6 / vn;
    TangentVector step = v;
    step *= h;
    TangentVector diff = axpy(-1.0, g, cost.gradient(retract(x, step)));
    diff *= 1.0 / h;
    return project_tangent(x, diff);
}

struct CgOutcome {
    TangentVector step;
    double model_decrease = 0;
    double cauchy_decrease = 0;
    bool hit_boundary = false;
};

// Steihaug truncated CG on the trust-region subproblem
//   min <g, s> + 0.5 <s, H s>,  ||s|| <= radius.
CgOutcome truncated_cg(const CostFunction& cost, const ManifoldPoint& x,
                       const TangentVector& g, double radius,
                       const TrustRegionConfig& cfg) {
    const auto hv = [&](const TangentVector& v) {
        TangentVector out = cost.hess_vec ? cost.hess_vec(x, v)
                                          : fd_hess_vec(cost, x, g, v);
        return project_tangent(x, out);
    };

    CgOutcome out;
    out.step = TangentVector::zero_like(x);
    TangentVector r = g;
    TangentVector d = g;
    d *= -1.0;

    const double g_norm = norm(g);
    double r_sq = g_norm * g_norm;
    const double stop = g_norm * std::min(cfg.cg_kappa, g_norm);

    // Cauchy-point decrease for the diagnostics: the first CG direction
    // is steepest descent, so any returned step must do at least this well.
    {
        const TangentVector hg = hv(g);
        const double ghg = dot(g, hg);
        double t;
        if (ghg <= 0) {
            t = radius / g_norm;
        } else {
            t = std::min(g_norm * g_norm / ghg, radius / g_norm);
        }
        out.cauchy_decrease = t * g_norm * g_norm - 0.5 * t * t * ghg;
    }

    const int max_cg =
        cfg.cg_max_iters > 0 ? cfg.cg_max_iters : x.ambient_dim();
    for (int j = 0; j < max_cg; ++j) {
        const TangentVector hd = hv(d);
        const double dhd = dot(d, hd);
        const double s_d = dot(out.step, d);
        const double d_sq = dot(d, d);
        const double s_sq = dot(out.step, out.step);
        if (dhd <= 0) {
            // negative curvature: follow d to the boundary
            const double disc = s_d * s_d + d_sq * (radius * radius - s_sq);
            const double tau = (-s_d + std::sqrt(std::max(disc, 0.0))) / d_sq;
            out.step = axpy(tau, d, out.step);
            out.hit_boundary = true;
            break;
        }
        const double alpha = r_sq / dhd;
        const double next_sq = s_sq + 2 * alpha * s_d + alpha * alpha * d_sq;
        if (next_sq >= radius * radius) {
            const double disc = s_d * s_d + d_sq * (radius * radius - s_sq);
            const double tau = (-s_d + std::sqrt(std::max(disc, 0.0))) / d_sq;
            out.step = axpy(tau, d, out.step);
            out.hit_boundary = true;
            break;
        }
        out.step = axpy(alpha, d, out.step);
        r = axpy(alpha, hd, r);
        const double r_sq_new = dot(r, r);
        if (std::sqrt(r_sq_new) <= stop) break;
        const double beta = r_sq_new / r_sq;
        r_sq = r_sq_new;
        TangentVector nd = r;
        nd *= -1.0;
        d = axpy(beta, d, nd);
    }
    // model decrease evaluated exactly for the returned step
    const TangentVector hs = hv(out.step);
    out.model_decrease = -(dot(g, out.step) + 0.5 * dot(out.step, hs));
    return out;
}

}  // namespace

TrustRegionResult trust_region_minimize(const CostFunction& cost,
                                        const ManifoldPoint& init,
                                        const TrustRegionConfig& cfg) {
    TrustRegionResult res;
    res.point = init;
    res.cost = cost.value(init);
    double radius = cfg.initial_radius;

    TangentVector g = cost.gradient(res.point);
    res.gradient_norm = norm(g);

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        if (res.gradient_norm <= cfg.grad_tol) {
            res.converged = true;
            break;
        }
        res.iterations = iter + 1;

        const CgOutcome sub = truncated_cg(cost, res.point, g, radius, cfg);
        if (sub.cauchy_decrease > 1e-300) {
            res.min_cauchy_ratio = std::min(
                res.min_cauchy_ratio, sub.model_decrease / sub.cauchy_decrease);
        }

        ManifoldPoint trial;
        double f_trial = std::numeric_limits<double>::infinity();
        bool retract_ok = true;
        try {
            trial = retract(res.point, sub.step);
            f_trial = cost.value(trial);
        } catch (const RetractUndefined&) {
            retract_ok = false;
        }

        const double actual = res.cost - f_trial;
        const double predicted = sub.model_decrease;
        const double rho =
            predicted > 0 ? actual / predicted
                          : (actual > 0 ? 1.0 : -1.0);

        if (!retract_ok || rho < 0.25 || !std::isfinite(f_trial)) {
            radius *= 0.25;
        } else if (rho > 0.75 && sub.hit_boundary) {
            radius = std::min(2.0 * radius, cfg.max_radius);
        }

        if (retract_ok && std::isfinite(f_trial) && rho > cfg.accept_ratio &&
            actual > 0) {
            res.point = trial;
            res.cost = f_trial;
            g = cost.gradient(res.point);
            res.gradient_norm = norm(g);
        }

        if (radius < cfg.min_radius) {
            if (res.gradient_norm <= cfg.grad_tol) {
                res.converged = true;
            } else if (cfg.throw_on_collapse) {
                throw NoProgress("trust region collapsed below min_radius");
            }
            break;
        }
    }
    if (res.gradient_norm <= cfg.grad_tol) res.converged = true;
    return res;
}

double check_gradient(const CostFunction& cost, const ManifoldPoint& point,
                      int n_dirs, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double f0 = cost.value(point);
    const TangentVector g = cost.gradient(point);

    double worst = 0;
    for (int t = 0; t < n_dirs; ++t) {
        TangentVector v = TangentVector::zero_like(point);
        for (int i = 0; i < v.euclid.size(); ++i) v.euclid(i) = gauss(rng);
        for (auto& c : v.circles) c = Vec2(gauss(rng), gauss(rng));
        v = project_tangent(point, v);
        const double vn = norm(v);
        if (vn < 1e-12) continue;
        v *= 1.0 / vn;

        const double h = 1e-6 * (1.0 + norm(point));
        TangentVector hp = v;
        hp *= h;
        TangentVector hm = v;
        hm *= -h;
        const double fp = cost.value(retract(point, hp));
        const double fm = cost.value(retract(point, hm));
        const double fd = (fp - fm) / (2 * h);
        const double an = dot(g, v);
        const double denom =
            std::max({std::abs(fd), std::abs(an), 1e-8 * (1 + std::abs(f0))});
        worst = std::max(worst, std::abs(fd - an) / denom);
    }
    return worst;
}

}  // namespace relloc
