#pragma once

#include "rbki/dense.hpp"
#include "rbki/operator.hpp"

#include <vector>

namespace rbki::core {

struct KrylovConfig {
    int k = 0;
    int b = 1;
    int q = 0;
    double epsilon = 0.25;
    double delta = 0.05;
    std::uint64_t seed = 0;
    double drop_tol = dense::kDefaultDropTol;

    // Requires 1 <= b <= k <= min(n,d), q >= ceil(k/b), epsilon and delta
    // in (0,1). Throws config_error otherwise.
    void validate(Index n, Index d) const;
};

struct KrylovBasis {
    Matrix Z;                // ambient_dim x m, orthonormal columns
    int b = 0;
    int q_requested = 0;
    int q_used = 0;          // blocks actually processed (after capping)
    std::uint64_t seed = 0;
    long long matvec_cost = 0;
    bool capped = false;          // q*b exceeded the ambient dimension
    bool converged_early = false; // a whole block was dropped as dependent
};

// Factored rank-r approximation left * diag(core_singulars) * right^T with
// orthonormal left (n x r) and right (d x r). Never materialized densely
// except on demand.
struct LowRankApprox {
    KrylovBasis basis;
    Matrix core_coeff;       // m x r combiner: Z * core_coeff recovers the basis-side factor
    Vector core_singulars;   // nonincreasing
    Matrix left_vectors;     // n x r
    Matrix right_vectors;    // d x r; column i is the derived right vector q_i
    Vector sigma_sq;         // squared singular value estimates, per index
    long long matvec_cost = 0;

    Index rank() const { return core_singulars.size(); }
    Matrix materialize() const;
};

// Seeded standard Gaussian start block, n x b, deterministic for fixed
// (n, b, seed) no matter what else has used the generator machinery.
Matrix gaussian_start_block(Index n, int b, std::uint64_t seed);

// Basis for the right-side Krylov space span{A^T G, (A^T A) A^T G, ...} with q
// blocks of width b. Each new block is the operator applied to the previous
// orthonormalized block, so dropped directions narrow the recurrence. If
// q*b exceeds the ambient dimension, q is capped and the basis is flagged.
KrylovBasis build_krylov_basis(const LinearOperator& op, const Matrix& G, int q,
                               double drop_tol = dense::kDefaultDropTol,
                               std::uint64_t seed = 0);

// Basis for span{G, M G, ..., M^{q-1} G} of a symmetric operator M.
KrylovBasis build_symmetric_krylov_basis(const SymmetricOperator& op, const Matrix& G,
                                         int q,
                                         double drop_tol = dense::kDefaultDropTol,
                                         std::uint64_t seed = 0);

// Randomized block Krylov iteration: basis Z from the right-side Krylov space,
// then the best rank-k approximation of A restricted to range(Z^T), via an
// exact SVD of A Z.
LowRankApprox rbki(const LinearOperator& op, const KrylovConfig& cfg);

struct PerturbationConfig {
    double gamma = 0.0;  // diagonal entries drawn uniform from [-gamma, gamma]
    std::uint64_t seed = 0;
};

// Diagonal smoothing perturbation S = A A^T + D for spectra with vanishing
// gaps. The returned operator references op; keep op alive while using it.
SmoothedNormalOperator smooth_perturb(const LinearOperator& op,
                                      const PerturbationConfig& pcfg);

// Krylov iteration on the smoothed operator S = A A^T + D; the basis lives on
// the left (R^n) and the final approximation is of the original, unperturbed A.
LowRankApprox rbki_smoothed(const LinearOperator& op, const KrylovConfig& cfg,
                            const PerturbationConfig& pcfg);

struct ErrorMetrics {
    double frobenius_error = 0.0;
    double spectral_error = 0.0;
    double frobenius_ratio = 0.0;        // vs best rank-k, +inf sentinel possible
    double spectral_ratio = 0.0;
    std::vector<double> index_residuals; // |  ||A q_i||^2 - sigma_i^2 | / sigma_k^2
    double max_index_residual = 0.0;
};

// Desk-scale quality report against a trusted reference SVD of A. The
// residual norms are computed on the materialized difference so near-optimal
// approximations are not lost to cancellation.
ErrorMetrics error_metrics(const LinearOperator& op, const LowRankApprox& approx,
                           const dense::SvdResult& reference, int k);

struct GapStats {
    std::vector<double> lambdas;   // eigenvalues of A A^T, nonincreasing
    int k = 0;
    double min_relative_gap = 0.0; // min over i<k of (lambda_i - lambda_{i+1})/lambda_i
    double condition_number = 0.0; // lambda_1 / lambda_{k-1}
    double additive_gap = 0.0;     // min over i<k of lambda_i - lambda_{i+1}

    // (lambda_k - lambda_ell)/lambda_k for ell > k, both 1-based.
    double relative_gap_to(int ell) const;
};

GapStats gap_stats(const std::vector<double>& singular_values, int k);
GapStats gap_stats_from_eigenvalues(const std::vector<double>& lambdas, int k);

enum class QMode { gap_independent, gap_dependent };

struct QRecommendation {
    int q = 0;
    int t = 0;        // ceil(k/b), or ceil(ell/b) in gap-dependent mode
    int k_prime = 0;  // b*t, the padded index the gap statistics use
    double term_subspace = 0.0;  // pre-ceiling contribution scaling with t
    double term_tail = 0.0;      // pre-ceiling dimension/failure-probability term
    bool inputs_clamped = false; // epsilon or delta was pulled down to 1
};

// Iteration count sufficient for the (1+eps) guarantees, scaled by the
// calibration constant c1. Gap-dependent mode aims past index k at index ell
// and replaces the eps dependence with the k->ell spectral gap.
QRecommendation recommend_q(const std::vector<double>& singular_values, int k, int b,
                            double epsilon, double delta, Index n, double c1 = 1.0,
                            QMode mode = QMode::gap_independent, int ell = 0);

// B = [G, M G, ..., M^{t-1} G] with M = A A^T; the raw wide start block that
// makes a width-bt iteration equivalent to a shorter width-b one.
Matrix simulated_block(const LinearOperator& op, const Matrix& G, int t);

struct GoodnessEstimate {
    double L = 0.0;              // +inf when the projection is rank deficient
    double sigma_min_proj = 0.0; // sigma_min(U_k^T B)
    bool rank_deficient = false;
};

// Iterations sufficient for a start block B to capture the top-k left
// subspace U_k, assuming the spectrum is normalized to sigma_1 = 1.
GoodnessEstimate goodness_estimate(const Matrix& U_k, const Matrix& B, int t,
                                   double delta);

// Restriction of a good rank-k' basis to a k-dimensional one that is at least
// as well aligned: Q = Q' V with V an orthonormal basis for the first k
// columns of (U_{k'}^T Q')^{-1}.
Matrix goodness_restrict(const Matrix& Q_prime, const Matrix& U_k_prime, int k);

}  // namespace rbki::core
