#pragma once

#include "bethe/gmrf.hpp"

namespace bethe {

// Symmetric K-regular model realized as the circulant C_n(1, ..., K/2) with
// equal couplings R_ij = r. lambda_max(|R|) = K|r| with Perron vector
// proportional to the all-ones vector.
struct KRegularSpec {
    int n = 8;
    int k = 4;  // even, k < n
    double r = 0.27;
};

GmrfModel build_k_regular(const KRegularSpec& spec);

// Critical coupling below which the fractional energy keeps a finite local
// minimum in the non-pairwise-normalizable regime: r_c = 1/(2 sqrt(a(K-a))),
// defined for 0 < alpha < K.
double critical_r(int k, double alpha);

// Critical fractional parameter for Kr > 1:
// alpha_c = K(1 - sqrt(1 - 1/(Kr)^2))/2.
double critical_alpha(int k, double r);

// Supremum of r > 0 keeping I + rA positive definite, from the circulant
// eigenvalues of the adjacency A of C_n(1, ..., K/2).
double r_valid(int n, int k);

}  // namespace bethe
