#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "relloc/errors.hpp"
#include "relloc/geometry.hpp"

namespace relloc {

// Point on the product manifold R^n x (S^1)^m. Tangent vectors use the
// same storage; their circle components live in the tangent line of the
// corresponding factor.
struct ManifoldPoint {
    Eigen::VectorXd euclid;
    std::vector<Vec2> circles;

    int ambient_dim() const {
        return static_cast<int>(euclid.size() + 2 * circles.size());
    }
    static ManifoldPoint zero_like(const ManifoldPoint& p);

    ManifoldPoint& operator+=(const ManifoldPoint& o);
    ManifoldPoint& operator*=(double a);
};

using TangentVector = ManifoldPoint;

double dot(const TangentVector& a, const TangentVector& b);
double norm(const TangentVector& a);
TangentVector axpy(double a, const TangentVector& x, const TangentVector& y);

// Orthogonal projection of an ambient vector onto the tangent space:
// Euclidean components pass through, each circle component v becomes
// v - (v.r) r.
TangentVector project_tangent(const ManifoldPoint& point,
                              const TangentVector& ambient);

// Euclidean add plus renormalization of the circle factors. Throws
// RetractUndefined when r + v nearly cancels.
ManifoldPoint retract(const ManifoldPoint& point, const TangentVector& v);

struct CostFunction {
    std::function<double(const ManifoldPoint&)> value;
    // Riemannian gradient (already projected to the tangent space).
    std::function<TangentVector(const ManifoldPoint&)> gradient;
    // Optional model Hessian-vector product; when absent the solver falls
    // back to finite differences of the gradient.
    std::function<TangentVector(const ManifoldPoint&, const TangentVector&)>
        hess_vec;
};

struct TrustRegionConfig {
    double initial_radius = 1.0;
    double max_radius = 1e3;
    double grad_tol = 1e-8;
    double min_radius = 1e-12;
    int max_iters = 200;
    int cg_max_iters = 0;      // 0: ambient dimension
    double cg_kappa = 1e-8;    // near-exact inner solves; CG terminates in
                               // at most dim steps on quadratic models
    double accept_ratio = 0.01;
    bool throw_on_collapse = true;
};

struct TrustRegionResult {
    ManifoldPoint point;
    double cost = 0;
    double gradient_norm = 0;
    int iterations = 0;
    bool converged = false;
    // smallest ratio of achieved model decrease to the Cauchy-point
    // decrease across iterations (>= 1 up to roundoff for tCG steps)
    double min_cauchy_ratio = 1.0;
};

// Riemannian trust region with a truncated-CG subproblem solver. The cost
// sequence over accepted steps is non-increasing; returns when the
// gradient norm reaches cfg.grad_tol or the iteration budget is spent.
// Throws NoProgress if the region collapses below cfg.min_radius while
// the gradient is still large (unless throw_on_collapse is off).
TrustRegionResult trust_region_minimize(const CostFunction& cost,
                                        const ManifoldPoint& init,
                                        const TrustRegionConfig& cfg = {});

// Worst relative deviation between the supplied gradient and central
// finite differences along n_dirs random tangent directions.
double check_gradient(const CostFunction& cost, const ManifoldPoint& point,
                      int n_dirs = 10, uint64_t seed = 12345);

}  // namespace relloc
