#pragma once

#include <utility>

#include <Eigen/Core>

#include "bethe/gmrf.hpp"

namespace bethe {

// Per-undirected-edge fractional parameters, all strictly positive.
struct AlphaAssignment {
    Eigen::VectorXd values;

    static AlphaAssignment uniform(const GmrfModel& model, double alpha);
    void validate(const GmrfModel& model) const;
};

// All energies drop the additive constants; only differences and locations of
// minima are meaningful. `value` equals the sum of the components.
struct EnergyComponents {
    double quadratic = 0.0;  // -h'm + m'Qm/2
    double trace = 0.0;
    double edge_log = 0.0;
    double node_log = 0.0;   // -sum log(v_k)/2
};

struct EnergyValue {
    double value = 0.0;
    EnergyComponents components;
};

// Mean-field energy: -h'm + m'Qm/2 + sum Q_kk v_k/2 - sum log(v_k)/2.
EnergyValue f_mf(const GmrfModel& model, const Eigen::VectorXd& m, const Eigen::VectorXd& v);

// Minimizer of f_mf: m = Q^-1 h, v_k = 1/Q_kk (= 1 for unit diagonal).
std::pair<Eigen::VectorXd, Eigen::VectorXd> mf_minimum(const GmrfModel& model);

// Optimal pair covariance at fixed node variances,
//   v* = -sign(R) (sqrt(1 + (2 a R)^2 v_i v_j) - 1) / (2 a |R|),
// computed in the cancellation-free form -2 a R v_i v_j / (1 + S) with
// S = sqrt(1 + 4 a^2 R^2 v_i v_j); R = 0 gives the limit 0.
double pair_covariance_star(double alpha, double r, double v_i, double v_j);

// Fractional Bethe free energy in moment parameters:
//   -h'm + m'Qm/2 + tr(Q'V)/2
//   - sum_{i~j} log(1 - v_ij^2/(v_i v_j)) / (2 a_ij) - sum_k log(v_k)/2.
// alpha = 1 everywhere gives the Bethe free energy.
EnergyValue f_alpha(const GmrfModel& model, const MomentMarginals& marginals,
                    const AlphaAssignment& alpha);

// f_alpha with each v_ij replaced by its closed-form inner minimizer v*;
// evaluated directly from the node variances.
EnergyValue f_alpha_constrained(const GmrfModel& model, const Eigen::VectorXd& m,
                                const Eigen::VectorXd& v, const AlphaAssignment& alpha);

// f_mf - sqrt(v)' |R| sqrt(v) / 2, the alpha -> infinity limit of the
// constrained energy.
EnergyValue lower_bound(const GmrfModel& model, const Eigen::VectorXd& m,
                        const Eigen::VectorXd& v);

struct ConstrainedGradient {
    Eigen::VectorXd m;  // Qm - h
    Eigen::VectorXd v;
};

// Analytic gradient of f_alpha_constrained. The v-component per node is
//   1/2 - 1/(2 v_i) - sum_{j in di} a R^2 v_j / (1 + S_ij).
ConstrainedGradient grad_f_alpha_constrained(const GmrfModel& model, const Eigen::VectorXd& m,
                                             const Eigen::VectorXd& v,
                                             const AlphaAssignment& alpha);

struct MomentGradient {
    Eigen::VectorXd v;
    Eigen::VectorXd v_edge;
};

// Gradient of f_alpha in the unconstrained moment parameters (v, v_edge);
// the v_edge component is Q_ij + v_ij / (a_ij (v_i v_j - v_ij^2)). Stationarity
// gate for the minimum/stability verdicts.
MomentGradient grad_f_alpha_moments(const GmrfModel& model, const MomentMarginals& marginals,
                                    const AlphaAssignment& alpha);

}  // namespace bethe
