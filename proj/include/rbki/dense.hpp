#pragma once

#include "rbki/common.hpp"

#include <vector>

namespace rbki::dense {

inline constexpr double kEpsMach = 2.220446049250313e-16;

// Default column-drop tolerance, relative to the scale of the block being
// orthonormalized.
inline constexpr double kDefaultDropTol = 1e-12;

void require_finite(const Matrix& M, const std::string& context);

struct OrthoResult {
    Matrix Q;     // rows x rank, numerically orthonormal columns
    Index rank;   // columns kept after dependent directions were dropped
};

// Incremental blocked Gram-Schmidt with exactly one full re-orthogonalization
// pass per column ("twice is enough"). Used standalone via orthonormalize()
// and incrementally by the Krylov basis builders. New directions whose
// post-projection residual is <= drop_tol * scale are discarded; scale defaults
// to the Frobenius norm of the incoming block.
class BlockOrthonormalizer {
public:
    explicit BlockOrthonormalizer(Index rows, double drop_tol = kDefaultDropTol);

    // Returns the number of columns of W that were kept.
    Index push_block(const Matrix& W);
    Index push_block(const Matrix& W, double scale);

    const Matrix& basis() const { return Q_; }
    Index rank() const { return cols_; }
    Index rows() const { return rows_; }

private:
    Index rows_;
    Index cols_;
    double drop_tol_;
    Matrix Q_;  // rows_ x capacity, first cols_ columns valid
};

OrthoResult orthonormalize(const Matrix& M, double drop_tol = kDefaultDropTol);

struct SvdResult {
    Matrix U;   // m x r left singular vectors
    Vector s;   // r singular values, nonincreasing
    Matrix V;   // n x r right singular vectors
};

// Thin SVD with all min(m,n) triplets, deterministic sign convention: the
// largest-magnitude entry of each left singular vector is made positive
// (first such index on ties), with the matching right vector flipped.
SvdResult svd(const Matrix& M);

Vector singular_values(const Matrix& M);
double sigma_min(const Matrix& M);
double sigma_max(const Matrix& M);

// Columns spanning the orthogonal complement of range(M) in R^rows.
// Rank is decided by sigma > rank_tol_factor * eps_mach * sigma_max.
Matrix orthonormal_complement(const Matrix& M, double rank_tol_factor);

// Angles in [0, pi/2], nondecreasing, min(cols(Q1), cols(Q2)) of them.
std::vector<double> principal_angles(const Matrix& Q1, const Matrix& Q2);

struct VandermondeMatrix {
    VandermondeMatrix(std::vector<double> nodes_in, int degree_in);

    std::vector<double> nodes;  // strictly decreasing, in [0,1]
    int degree;                 // number of columns

    // entry (i,j) = nodes[i]^j, j = 0..degree-1
    Matrix build() const;
};

struct VandermondeInverseNorm {
    // Largest absolute coefficient sum of a single Lagrange polynomial: the
    // infinity norm of the inverse of the coefficients-to-values Vandermonde
    // (equivalently the 1-norm of the inverse of the node-per-row W).
    double exact;
    double gautschi_product;  // max_i prod_{j!=i} (1+mu_j)/|mu_i-mu_j|
    double gap_power;         // (2/eta)^{t-1}, eta = min adjacent node gap
};

// Square Vandermonde on the given nodes; t <= 30. The three values satisfy
// exact <= gautschi_product <= gap_power (checked internally).
VandermondeInverseNorm vandermonde_inverse_inf_norm(const std::vector<double>& nodes);

}  // namespace rbki::dense
