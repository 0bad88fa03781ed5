#pragma once

#include <ostream>
#include <vector>

#include <Eigen/Core>

#include "bethe/free_energy.hpp"
#include "bethe/gmrf.hpp"

namespace bethe {

struct MinOptions {
    Eigen::VectorXd v0;          // initial variances, > 0; empty means all-ones
    double tol_grad = 1e-9;      // infinity norm of the variance gradient
    int max_iters = 200;
    double backtrack_shrink = 0.5;
    int max_halvings = 60;
    double divergence_v = 1e12;  // Diverging once any v exceeds this
    double divergence_f = -1e12; // ... or the energy drops below this
};

enum class MinStatus { Converged, Diverging, MaxIters };

const char* to_string(MinStatus status);

struct MinTraceRow {
    int iter = 0;
    double f = 0.0;
    double grad_inf = 0.0;
    double step_size = 0.0;
    double min_v = 0.0;
};

struct MinResult {
    MinStatus status = MinStatus::MaxIters;
    Eigen::VectorXd v_star;
    Eigen::VectorXd m_star;  // Q^-1 h, solved once
    double f_value = 0.0;
    double grad_norm = 0.0;
    bool hessian_pd = false;
    std::vector<MinTraceRow> trace;
};

// Newton minimization of f_alpha_constrained over the node variances. The
// step solves with the absolute-eigenvalue modification of the Schur-
// complement Hessian (negative curvature is flipped, tiny curvature floored),
// which is always a descent direction; a plain gradient step is retried if
// its line search fails. Backtracking enforces v > 0 and strict energy
// decrease.
MinResult newton_minimize(const GmrfModel& model, const AlphaAssignment& alpha,
                          const MinOptions& options);

struct ProfilePoint {
    double sigma = 0.0;
    double f = 0.0;
};

struct ProfileResult {
    std::vector<ProfilePoint> points;
    std::vector<int> interior_minima;  // indices with f[k] < f[k-1] and f[k] < f[k+1]
};

// Energy profile along the ray sqrt(v) = sigma * direction with an entrywise
// positive direction (typically the Perron vector or all-ones). Minima are
// reported at grid resolution only.
ProfileResult symmetric_profile(const GmrfModel& model, const AlphaAssignment& alpha,
                                const Eigen::VectorXd& sigma_grid,
                                const Eigen::VectorXd& direction);

// CSV: iter,f,grad_inf,step_size,min_v
void write_minimize_trace_csv(std::ostream& out, const MinResult& result);

}  // namespace bethe
