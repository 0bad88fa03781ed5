#include "bethe/direct_min.hpp"

#include <cmath>
#include <limits>
#include <cstdio>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "bethe/stability.hpp"

namespace bethe {

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

double energy(const GmrfModel& model, const Eigen::VectorXd& m, const Eigen::VectorXd& v,
              const AlphaAssignment& alpha) {
    return f_alpha_constrained(model, m, v, alpha).value;
}

// backtracking from t = 1: first step with v + t d > 0 and a strict decrease
struct LineSearch {
    bool accepted = false;
    double step = 0.0;
    double f_new = 0.0;
};

LineSearch backtrack(const GmrfModel& model, const Eigen::VectorXd& m,
                     const AlphaAssignment& alpha, const Eigen::VectorXd& v, double f,
                     const Eigen::VectorXd& dir, const MinOptions& options) {
    LineSearch ls;
    double t = 1.0;
    for (int k = 0; k <= options.max_halvings; ++k) {
        const Eigen::VectorXd v_new = v + t * dir;
        if (v_new.minCoeff() > 0.0) {
            const double f_new = energy(model, m, v_new, alpha);
            if (f_new < f) {
                ls.accepted = true;
                ls.step = t;
                ls.f_new = f_new;
                return ls;
            }
        }
        t *= options.backtrack_shrink;
    }
    return ls;
}

}  // namespace

const char* to_string(MinStatus status) {
    switch (status) {
        case MinStatus::Converged: return "Converged";
        case MinStatus::Diverging: return "Diverging";
        case MinStatus::MaxIters: return "MaxIters";
    }
    return "?";
}

MinResult newton_minimize(const GmrfModel& model, const AlphaAssignment& alpha,
                          const MinOptions& options) {
    alpha.validate(model);
    Eigen::VectorXd v =
        options.v0.size() ? options.v0 : Eigen::VectorXd::Ones(model.n);
    if (v.size() != model.n) throw DimensionMismatchError("newton_minimize: v0 length mismatch");
    if (!(v.minCoeff() > 0.0))
        throw NonpositiveVarianceError("newton_minimize: v0 must be positive");
    if (options.max_iters < 1 || !(options.tol_grad > 0.0))
        throw Error("newton_minimize: bad options");

    MinResult result;
    {
        Eigen::LLT<Eigen::MatrixXd> llt(model.q_dense());
        if (llt.info() != Eigen::Success)
            throw NotPositiveDefiniteError("newton_minimize: Q factorization failed");
        result.m_star = llt.solve(model.h);
    }

    double f = energy(model, result.m_star, v, alpha);
    for (int it = 1; it <= options.max_iters; ++it) {
        const ConstrainedGradient grad =
            grad_f_alpha_constrained(model, result.m_star, v, alpha);
        const double grad_inf = grad.v.lpNorm<Eigen::Infinity>();
        if (grad_inf <= options.tol_grad) {
            result.status = MinStatus::Converged;
            break;
        }

        // Newton direction from the Schur-complement Hessian at the induced
        // inner minimizer, with |eigenvalue| modification
        MomentMarginals at_star;
        at_star.m = result.m_star;
        at_star.v = v;
        at_star.v_edge.resize(model.edge_count());
        for (int e = 0; e < model.edge_count(); ++e)
            at_star.v_edge[e] = pair_covariance_star(alpha.values[e], model.r[e],
                                                     v[model.edges[e].i], v[model.edges[e].j]);
        const Eigen::MatrixXd hess = hessian_schur(model, at_star, alpha);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
        // relative floor: an absolute one would cap steps along the nearly
        // flat unbounded directions and stall divergence detection
        const double floor = std::max(1e-12 * es.eigenvalues().cwiseAbs().maxCoeff(),
                                      std::numeric_limits<double>::min());
        Eigen::VectorXd inv_abs(model.n);
        for (int i = 0; i < model.n; ++i)
            inv_abs[i] = 1.0 / std::max(std::abs(es.eigenvalues()[i]), floor);
        const Eigen::VectorXd newton_dir =
            -(es.eigenvectors() * inv_abs.asDiagonal() * es.eigenvectors().transpose() * grad.v);

        Eigen::VectorXd dir = newton_dir;
        LineSearch ls = backtrack(model, result.m_star, alpha, v, f, dir, options);
        if (!ls.accepted) {
            dir = -grad.v;
            ls = backtrack(model, result.m_star, alpha, v, f, dir, options);
        }
        if (!ls.accepted) {
            result.status = MinStatus::MaxIters;  // no resolvable decrease left
            break;
        }

        v += ls.step * dir;
        f = ls.f_new;

        MinTraceRow row;
        row.iter = it;
        row.f = f;
        row.grad_inf = grad_inf;
        row.step_size = ls.step;
        row.min_v = v.minCoeff();
        result.trace.push_back(row);

        if (v.maxCoeff() > options.divergence_v || f < options.divergence_f) {
            result.status = MinStatus::Diverging;
            break;
        }
    }

    result.v_star = v;
    result.f_value = f;
    result.grad_norm =
        grad_f_alpha_constrained(model, result.m_star, v, alpha).v.lpNorm<Eigen::Infinity>();
    if (result.status != MinStatus::Diverging) {
        // at diverged scales the induced v* saturates the normalizability
        // margin below double resolution; the flag is meaningless there
        MomentMarginals at_star;
        at_star.m = result.m_star;
        at_star.v = v;
        at_star.v_edge.resize(model.edge_count());
        for (int e = 0; e < model.edge_count(); ++e)
            at_star.v_edge[e] = pair_covariance_star(alpha.values[e], model.r[e],
                                                     v[model.edges[e].i], v[model.edges[e].j]);
        Eigen::LLT<Eigen::MatrixXd> llt(hessian_schur(model, at_star, alpha));
        result.hessian_pd = llt.info() == Eigen::Success;
    }
    return result;
}

ProfileResult symmetric_profile(const GmrfModel& model, const AlphaAssignment& alpha,
                                const Eigen::VectorXd& sigma_grid,
                                const Eigen::VectorXd& direction) {
    alpha.validate(model);
    if (direction.size() != model.n)
        throw DimensionMismatchError("symmetric_profile: direction length mismatch");
    if (!(direction.minCoeff() > 0.0))
        throw Error("symmetric_profile: direction must be entrywise positive");
    if (sigma_grid.size() == 0 || !(sigma_grid.minCoeff() > 0.0))
        throw Error("symmetric_profile: sigma grid must be positive");

    const Eigen::VectorXd m = Eigen::VectorXd::Zero(model.n);
    ProfileResult out;
    out.points.reserve(static_cast<std::size_t>(sigma_grid.size()));
    for (Eigen::Index k = 0; k < sigma_grid.size(); ++k) {
        const double sigma = sigma_grid[k];
        const Eigen::VectorXd v =
            (sigma * direction.array()).square().matrix();
        out.points.push_back({sigma, f_alpha_constrained(model, m, v, alpha).value});
    }
    for (std::size_t k = 1; k + 1 < out.points.size(); ++k)
        if (out.points[k].f < out.points[k - 1].f && out.points[k].f < out.points[k + 1].f)
            out.interior_minima.push_back(static_cast<int>(k));
    return out;
}

void write_minimize_trace_csv(std::ostream& out, const MinResult& result) {
    out << "iter,f,grad_inf,step_size,min_v\n";
    for (const MinTraceRow& row : result.trace)
        out << row.iter << "," << fmt(row.f) << "," << fmt(row.grad_inf) << ","
            << fmt(row.step_size) << "," << fmt(row.min_v) << "\n";
}

}  // namespace bethe
