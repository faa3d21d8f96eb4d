#pragma once

#include "rbki/dense.hpp"
#include "rbki/rbki.hpp"

#include <vector>

namespace rbki::lab {

// Rank threshold used throughout the lab when deciding whether a k-column
// matrix is numerically full rank.
inline double rank_tolerance(int k, double sigma_max) {
    return static_cast<double>(k) * dense::kEpsMach * sigma_max * 1e3;
}

// Eigenvalue model for the diagonalized iteration matrix: lambda_1 = 1,
// strictly decreasing, nonnegative. These are the Vandermonde nodes.
class SpectrumModel {
public:
    static SpectrumModel geometric(int k, double ratio);
    static SpectrumModel polynomial(int k, double power);
    // Cluster c has counts[c] members near base_ratio^c, separated by `width`
    // relative spacing so the sequence stays strictly decreasing.
    static SpectrumModel clustered(const std::vector<int>& counts, double base_ratio,
                                   double width);
    static SpectrumModel custom(std::vector<double> lambdas, bool normalize = true);

    const std::vector<double>& lambdas() const { return lambdas_; }
    int k() const { return static_cast<int>(lambdas_.size()); }
    core::GapStats gap_stats() const;
    std::string describe() const { return label_; }

private:
    SpectrumModel(std::vector<double> lambdas, std::string label);
    std::vector<double> lambdas_;
    std::string label_;
};

// K = [diag(g_1) V | ... | diag(g_b) V], the Vandermonde form of the Krylov
// matrix after diagonalization; g_j is the j-th column of the k x b Gaussian
// start block H and V is k x t on the eigenvalue nodes, with b*t = k.
struct VandermondeKrylov {
    int k = 0, b = 0, t = 0;
    Matrix H;  // k x b
    Matrix V;  // k x t
    Matrix K;  // k x k
    std::vector<double> lambdas;
};

VandermondeKrylov sample_krylov(const SpectrumModel& spectrum, int b,
                                std::uint64_t seed);

// Raw original-coordinates Krylov matrix [H, Lambda H, ..., Lambda^{t-1} H].
// No validation of the eigenvalue list; duplicates are allowed on purpose so
// singular cases can be constructed.
Matrix krylov_from_blocks(const std::vector<double>& lambdas, const Matrix& H, int t);

// Start block certifying nonsingularity for any strictly decreasing spectrum:
// column j indicates the j-th group of t consecutive eigenvalues.
Matrix witness_start_block(int k, int b);

// Probability >= 1-delta lower bound on log sigma_min(K), in natural-log
// space: log C + 5 log delta - 14 log k + 6(t-1) log(Delta_k/(6 kappa_k)).
// Returns -inf when the spectrum has a vanishing gap.
double theorem41_bound(const SpectrumModel& spectrum, int b, double delta,
                       double calibration_C);

// Same bound from a raw nonincreasing eigenvalue list; ties are allowed here
// and produce the -inf sentinel.
double theorem41_bound_from_lambdas(const std::vector<double>& lambdas, int b,
                                    double delta, double calibration_C);

// Leave-one-block-out split: Q_j spans the orthogonal complement of the span
// of all blocks except j. Nondegenerate trials have every complement of
// dimension exactly t.
struct PVDecomposition {
    std::vector<Matrix> Q;           // each k x t when nondegenerate
    std::vector<double> piece_sigma; // sigma_min(Q_j^T diag(g_j) V)
    double min_piece = 0.0;
    bool degenerate = false;
};

PVDecomposition pv_decompose(const VandermondeKrylov& kry);

// sigma_min(K) >= min_piece / sqrt(b), up to `slack * sigma_max(K)`.
bool pv_inequality_holds(const VandermondeKrylov& kry, const PVDecomposition& pv,
                         double sigma_min_K, double sigma_max_K,
                         double slack = 1e-10);

struct SigmaMinTrial {
    std::uint64_t seed = 0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    double log_sigma_min = 0.0;
    double log_bound = 0.0;
    bool violated = false;    // sigma_min fell below the bound
    bool degenerate = false;  // leave-one-out complement had unexpected dimension
    double pv_min_piece = 0.0;
    bool pv_holds = true;
};

struct SigmaMinExperiment {
    std::vector<SigmaMinTrial> trials;
    int violations = 0;
    double violation_fraction = 0.0;
    double median_log_inv_sigma_min = 0.0;
    double log_bound = 0.0;
};

SigmaMinExperiment sigma_min_experiment(const SpectrumModel& spectrum, int b,
                                        int trials, std::uint64_t seed, double delta,
                                        double calibration_C, bool with_pv);

// Var(x^T Q_j^T diag(g) V y | Q_j) over standard Gaussian g, computed from the
// closed form sum_i [Q_j x]_i^2 [V y]_i^2. x must be unit.
double bilinear_variance(const Matrix& Qj, const dense::VandermondeMatrix& V,
                         const Vector& x, const Vector& y);

struct NonsparseCount {
    int count = 0;
    int needed = 0;
    double log_threshold = 0.0;
    double threshold = 0.0;  // exp(log_threshold), may underflow to 0
    bool holds = false;
};

// Deterministic anti-concentration of V y: at least k-(t-1) entries of |V y|
// reach ||y||_inf (Delta/(6 kappa))^{2(t-1)}.
NonsparseCount vandermonde_nonsparse_count(const dense::VandermondeMatrix& V,
                                           const Vector& y);

// Coefficients of prod_{j=2..t} (x - lambda_j): the polynomial that zeroes
// the most Vandermonde rows a degree-(t-1) polynomial can.
Vector adversarial_y(const SpectrumModel& spectrum, int t);

// Probabilistic anti-concentration of Q_j x: at least t+1 entries reach
// delta log^{-1/2}(2/delta) / (14 k^3) * (Delta/(2 kappa))^{t-1}, with
// probability 1-delta over the Krylov draw.
NonsparseCount subspace_nonsparse_check(const Matrix& Qj,
                                        const SpectrumModel& spectrum, const Vector& x,
                                        double delta);

// Abstract certificate that a matrix Gamma witnesses non-sparsification:
// orthogonality to Q_j, bounded norm, and injectivity on s-sparse vectors.
struct Certificate {
    Matrix Gamma;  // k x t
    int s = 0;
    double eta = 0.0;
    double log_eta = 0.0;
    double M = 0.0;

    double p1_residual = 0.0;       // max |Gamma^T Q_j|
    double gamma_norm = 0.0;        // sigma_max(Gamma)
    double min_support_sigma = 0.0; // min over tested supports of sigma_min(Gamma_S)
    bool exhaustive = false;        // all C(k,s) supports enumerated
    bool p1 = false, p2 = false, p3 = false;
    bool valid() const { return p1 && p2 && p3; }
};

// Build and validate the concrete certificate Gamma = diag(g_i) V against the
// complement Q_j, i != j. Exhaustive support enumeration when C(k,s) is
// small enough, otherwise `samples` random supports.
Certificate certify(const VandermondeKrylov& kry, int j, int i, double delta,
                    long exhaustive_limit = 25000, int samples = 2000,
                    std::uint64_t seed = 0);

struct AbstractBound {
    double gamma = 0.0;       // eta / (3 M sqrt(k))
    double log_gamma = 0.0;
    int needed = 0;           // s + 1 entries must reach gamma
};

// Requires eta <= M (otherwise the certificate is inconsistent).
AbstractBound abstract_nonsparse_bound(const Certificate& cert, int k);

// Entries of |v| at or above gamma.
int entries_at_least(const Vector& v, double gamma);

struct NonsingularityResult {
    int trials = 0;
    int rank_failures = 0;
    std::vector<double> sigma_mins;
};

// Gaussian start blocks keep the square Krylov matrix nonsingular almost
// surely when the spectrum is strictly decreasing.
NonsingularityResult nonsingularity_check(const SpectrumModel& spectrum, int b,
                                          int trials, std::uint64_t seed);

}  // namespace rbki::lab
