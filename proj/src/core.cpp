#include "rbki/rbki.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rbki::core {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int capped_blocks(int q, int b, Index ambient) {
    const long long want = static_cast<long long>(q) * b;
    if (want <= static_cast<long long>(ambient)) return q;
    return static_cast<int>((ambient + b - 1) / b);
}

}  // namespace

void KrylovConfig::validate(Index n, Index d) const {
    const Index minnd = std::min(n, d);
    if (k < 1) throw config_error("config: k must be at least 1");
    if (b < 1 || b > k) throw config_error("config: need 1 <= b <= k");
    if (static_cast<Index>(k) > minnd)
        throw config_error("config: k exceeds min(n, d)");
    const int t = (k + b - 1) / b;
    if (q < t) {
        std::ostringstream msg;
        msg << "config: q = " << q << " gives fewer than k basis columns; need q >= " << t;
        throw config_error(msg.str());
    }
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw config_error("config: epsilon must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0))
        throw config_error("config: delta must lie in (0,1)");
    if (!(drop_tol >= 0.0)) throw config_error("config: drop_tol must be nonnegative");
}

Matrix LowRankApprox::materialize() const {
    if (rank() == 0) return Matrix::Zero(left_vectors.rows(), right_vectors.rows());
    return left_vectors * core_singulars.asDiagonal() * right_vectors.transpose();
}

Matrix gaussian_start_block(Index n, int b, std::uint64_t seed) {
    if (n < 1 || b < 1) throw config_error("start block: dimensions must be positive");
    auto rng = make_rng(seed, 0x6A55u);
    return gaussian_matrix(n, b, rng);
}

KrylovBasis build_krylov_basis(const LinearOperator& op, const Matrix& G, int q,
                               double drop_tol, std::uint64_t seed) {
    if (q < 1) throw config_error("krylov basis: q must be at least 1");
    if (G.rows() != op.rows())
        throw config_error("krylov basis: start block rows must match operator rows");
    if (G.cols() < 1) throw config_error("krylov basis: start block is empty");
    dense::require_finite(G, "krylov basis start block");

    KrylovBasis out;
    out.b = static_cast<int>(G.cols());
    out.q_requested = q;
    out.seed = seed;
    const Index d = op.cols();
    const int q_used = capped_blocks(q, out.b, d);
    out.capped = q_used < q;

    const long long count_before = op.matvec_count();
    dense::BlockOrthonormalizer ortho(d, drop_tol);

    Matrix W = op.apply_transpose(G);
    Index block_lo = ortho.rank();
    Index kept = ortho.push_block(W);
    int blocks = 1;
    for (int i = 1; i < q_used && kept > 0; ++i) {
        Matrix prev = ortho.basis().middleCols(block_lo, kept);
        W = op.apply_transpose(op.apply(prev));
        block_lo = ortho.rank();
        kept = ortho.push_block(W);
        ++blocks;
    }
    if (kept == 0 && blocks < q_used) out.converged_early = true;
    if (kept == 0 && blocks == q_used && q_used > 1) out.converged_early = true;

    out.q_used = blocks;
    out.Z = ortho.basis().leftCols(ortho.rank());
    out.matvec_cost = op.matvec_count() - count_before;
    return out;
}

KrylovBasis build_symmetric_krylov_basis(const SymmetricOperator& op, const Matrix& G,
                                         int q, double drop_tol, std::uint64_t seed) {
    if (q < 1) throw config_error("krylov basis: q must be at least 1");
    if (G.rows() != op.dim())
        throw config_error("krylov basis: start block rows must match operator dimension");
    if (G.cols() < 1) throw config_error("krylov basis: start block is empty");
    dense::require_finite(G, "krylov basis start block");

    KrylovBasis out;
    out.b = static_cast<int>(G.cols());
    out.q_requested = q;
    out.seed = seed;
    const int q_used = capped_blocks(q, out.b, op.dim());
    out.capped = q_used < q;

    dense::BlockOrthonormalizer ortho(op.dim(), drop_tol);
    Index block_lo = ortho.rank();
    Index kept = ortho.push_block(G);
    int blocks = 1;
    for (int i = 1; i < q_used && kept > 0; ++i) {
        Matrix prev = ortho.basis().middleCols(block_lo, kept);
        Matrix W = op.apply(prev);
        block_lo = ortho.rank();
        kept = ortho.push_block(W);
        ++blocks;
    }
    if (kept == 0 && blocks <= q_used && q_used > 1) out.converged_early = true;

    out.q_used = blocks;
    out.Z = ortho.basis().leftCols(ortho.rank());
    out.matvec_cost = 0;  // cost is tracked by the underlying instrumented operator
    return out;
}

LowRankApprox rbki(const LinearOperator& op, const KrylovConfig& cfg) {
    cfg.validate(op.rows(), op.cols());
    Matrix G = gaussian_start_block(op.rows(), cfg.b, cfg.seed);

    const long long count_before = op.matvec_count();
    LowRankApprox out;
    out.basis = build_krylov_basis(op, G, cfg.q, cfg.drop_tol, cfg.seed);
    if (out.basis.Z.cols() == 0) throw numeric_error("rbki: basis collapsed to rank 0");

    Matrix Y = op.apply(out.basis.Z);  // n x m
    dense::SvdResult core = dense::svd(Y);
    const Index r = std::min<Index>(cfg.k, core.s.size());

    out.core_coeff = core.V.leftCols(r);
    out.core_singulars = core.s.head(r);
    out.left_vectors = core.U.leftCols(r);
    out.right_vectors = out.basis.Z * out.core_coeff;
    out.sigma_sq = out.core_singulars.array().square();
    out.matvec_cost = op.matvec_count() - count_before;
    return out;
}

SmoothedNormalOperator smooth_perturb(const LinearOperator& op,
                                      const PerturbationConfig& pcfg) {
    if (!(pcfg.gamma > 0.0) || !std::isfinite(pcfg.gamma))
        throw config_error("smoothing: gamma must be positive and finite");
    auto rng = make_rng(pcfg.seed, 0xD1A6u);
    std::uniform_real_distribution<double> unif(-pcfg.gamma, pcfg.gamma);
    Vector d(op.rows());
    for (Index i = 0; i < d.size(); ++i) d(i) = unif(rng);
    return SmoothedNormalOperator(op, std::move(d));
}

LowRankApprox rbki_smoothed(const LinearOperator& op, const KrylovConfig& cfg,
                            const PerturbationConfig& pcfg) {
    cfg.validate(op.rows(), op.cols());
    SmoothedNormalOperator S = smooth_perturb(op, pcfg);
    Matrix G = gaussian_start_block(op.rows(), cfg.b, cfg.seed);

    const long long count_before = op.matvec_count();
    LowRankApprox out;
    out.basis = build_symmetric_krylov_basis(S, G, cfg.q, cfg.drop_tol, cfg.seed);
    if (out.basis.Z.cols() == 0) throw numeric_error("rbki: basis collapsed to rank 0");

    // Core uses the original operator: best rank-k approximation of Z^T A.
    Matrix C = op.apply_transpose(out.basis.Z).transpose();  // m x d
    dense::SvdResult core = dense::svd(C);
    const Index r = std::min<Index>(cfg.k, core.s.size());

    out.core_coeff = core.U.leftCols(r);
    out.core_singulars = core.s.head(r);
    out.left_vectors = out.basis.Z * out.core_coeff;
    out.right_vectors = core.V.leftCols(r);
    out.sigma_sq = out.core_singulars.array().square();
    out.matvec_cost = op.matvec_count() - count_before;
    out.basis.matvec_cost = out.matvec_cost - out.basis.Z.cols();
    return out;
}

namespace {

// Spectral norm by power iteration on R^T R; relative tolerance 1e-6 with an
// iteration cap of ceil(10 log(max(n,d))).
double spectral_norm_estimate(const Matrix& R) {
    if (R.size() == 0) return 0.0;
    const Index n = R.rows(), d = R.cols();
    auto rng = make_rng(0xC0FFEEu, 17);
    Vector v = gaussian_matrix(d, 1, rng).col(0);
    double nv = v.norm();
    if (nv == 0.0) return 0.0;
    v /= nv;
    const int cap = static_cast<int>(
        std::ceil(10.0 * std::log(static_cast<double>(std::max<Index>(std::max(n, d), 2)))));
    double est = (R * v).norm();
    for (int it = 0; it < cap; ++it) {
        Vector w = R.transpose() * (R * v);
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        v = w / nw;
        const double next = (R * v).norm();
        if (std::abs(next - est) <= 1e-6 * std::max(next, 1e-300)) {
            est = next;
            break;
        }
        est = next;
    }
    return est;
}

}  // namespace

ErrorMetrics error_metrics(const LinearOperator& op, const LowRankApprox& approx,
                           const dense::SvdResult& reference, int k) {
    if (k < 1) throw config_error("error metrics: k must be positive");
    if (approx.rank() > k)
        throw config_error("error metrics: approximation rank exceeds k");
    if (reference.s.size() < k)
        throw config_error("error metrics: reference SVD has fewer than k values");

    const Matrix A = op.materialize();
    if (A.rows() != op.rows() || A.cols() != op.cols())
        throw numeric_error("error metrics: materialized operator has wrong shape");

    ErrorMetrics out;
    Matrix R = A;
    if (approx.rank() > 0) R -= approx.materialize();
    out.frobenius_error = R.norm();
    out.spectral_error = spectral_norm_estimate(R);

    double tail_sq = 0.0;
    for (Index i = k; i < reference.s.size(); ++i) tail_sq += reference.s(i) * reference.s(i);
    const double opt_f = std::sqrt(tail_sq);
    const double opt_2 = (reference.s.size() > k) ? reference.s(k) : 0.0;
    const double scale = A.norm();

    auto ratio = [&](double err, double opt) {
        if (opt > 0.0) return err / opt;
        // Exactly rank-k input: the approximation must recover it to near
        // machine precision for the ratio to count as 1.
        return (err <= 1e-8 * std::max(scale, 1e-300)) ? 1.0 : kInf;
    };
    out.frobenius_ratio = ratio(out.frobenius_error, opt_f);
    out.spectral_ratio = ratio(out.spectral_error, opt_2);

    const double sigk = reference.s(k - 1);
    const double lamk = sigk * sigk;
    const double lam1 = reference.s(0) * reference.s(0);
    out.index_residuals.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        double achieved_sq = 0.0;
        if (i < approx.rank()) achieved_sq = (A * approx.right_vectors.col(i)).squaredNorm();
        const double want_sq = reference.s(i) * reference.s(i);
        const double num = std::abs(achieved_sq - want_sq);
        double res;
        if (lamk > 0.0) {
            res = num / lamk;
        } else {
            res = (num <= 1e-8 * std::max(lam1, 1e-300)) ? 0.0 : kInf;
        }
        out.index_residuals[static_cast<std::size_t>(i)] = res;
        out.max_index_residual = std::max(out.max_index_residual, res);
    }
    return out;
}

GapStats gap_stats_from_eigenvalues(const std::vector<double>& lambdas, int k) {
    if (k < 2) throw config_error("gap stats: k must be at least 2");
    if (static_cast<int>(lambdas.size()) < k)
        throw config_error("gap stats: need at least k eigenvalues");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!std::isfinite(lambdas[i]) || lambdas[i] < 0.0)
            throw config_error("gap stats: eigenvalues must be finite and nonnegative");
        if (i > 0 && lambdas[i] > lambdas[i - 1])
            throw config_error("gap stats: eigenvalues must be nonincreasing");
    }
    if (!(lambdas[static_cast<std::size_t>(k - 2)] > 0.0))
        throw config_error("gap stats: eigenvalue at index k-1 must be positive");

    GapStats out;
    out.lambdas = lambdas;
    out.k = k;
    out.min_relative_gap = kInf;
    out.additive_gap = kInf;
    for (int i = 1; i <= k - 1; ++i) {
        const double hi = lambdas[static_cast<std::size_t>(i - 1)];
        const double lo = lambdas[static_cast<std::size_t>(i)];
        out.min_relative_gap = std::min(out.min_relative_gap, (hi - lo) / hi);
        out.additive_gap = std::min(out.additive_gap, hi - lo);
    }
    out.condition_number = lambdas[0] / lambdas[static_cast<std::size_t>(k - 2)];
    return out;
}

GapStats gap_stats(const std::vector<double>& singular_values, int k) {
    std::vector<double> lambdas(singular_values.size());
    for (std::size_t i = 0; i < singular_values.size(); ++i) {
        if (!std::isfinite(singular_values[i]) || singular_values[i] < 0.0)
            throw config_error("gap stats: singular values must be finite and nonnegative");
        lambdas[i] = singular_values[i] * singular_values[i];
    }
    return gap_stats_from_eigenvalues(lambdas, k);
}

double GapStats::relative_gap_to(int ell) const {
    if (ell <= k || ell > static_cast<int>(lambdas.size()))
        throw config_error("gap stats: ell must satisfy k < ell <= spectrum length");
    const double lk = lambdas[static_cast<std::size_t>(k - 1)];
    if (!(lk > 0.0)) throw config_error("gap stats: eigenvalue at index k must be positive");
    return (lk - lambdas[static_cast<std::size_t>(ell - 1)]) / lk;
}

QRecommendation recommend_q(const std::vector<double>& singular_values, int k, int b,
                            double epsilon, double delta, Index n, double c1,
                            QMode mode, int ell) {
    if (k < 2) throw config_error("recommend_q: k must be at least 2");
    if (b < 1 || b > k) throw config_error("recommend_q: need 1 <= b <= k");
    if (n < k) throw config_error("recommend_q: n must be at least k");
    if (!(c1 > 0.0)) throw config_error("recommend_q: calibration constant must be positive");
    if (!(epsilon > 0.0)) throw config_error("recommend_q: epsilon must be positive");
    if (!(delta > 0.0)) throw config_error("recommend_q: delta must be positive");

    QRecommendation out;
    if (epsilon > 1.0) {
        epsilon = 1.0;
        out.inputs_clamped = true;
    }
    if (delta > 1.0) {
        delta = 1.0;
        out.inputs_clamped = true;
    }

    int aim = k;
    double rate = epsilon;  // the sqrt dependence in both terms of the bound
    if (mode == QMode::gap_dependent) {
        if (ell <= k) throw config_error("recommend_q: gap-dependent mode needs ell > k");
        aim = ell;
        GapStats forgap = gap_stats(singular_values, k);
        rate = forgap.relative_gap_to(ell);
        if (!(rate > 0.0))
            throw config_error("recommend_q: spectral gap from k to ell vanishes");
    }

    out.t = (aim + b - 1) / b;
    out.k_prime = b * out.t;
    if (static_cast<int>(singular_values.size()) < out.k_prime)
        throw config_error("recommend_q: spectrum shorter than the padded index b*ceil(k/b)");

    GapStats stats = gap_stats(singular_values, std::max(out.k_prime, 2));
    if (!(stats.min_relative_gap > 0.0))
        throw config_error(
            "recommend_q: repeated leading eigenvalues give a zero gap; "
            "use the smoothed iteration instead");

    const double sq = std::sqrt(rate);
    out.term_subspace =
        c1 * (static_cast<double>(out.t) / sq) *
        std::log(stats.condition_number / stats.min_relative_gap);
    out.term_tail = c1 * (1.0 / sq) *
                    std::log(static_cast<double>(n) / (delta * epsilon));
    const int t_min = (k + b - 1) / b;
    out.q = std::max(t_min, static_cast<int>(std::ceil(out.term_subspace + out.term_tail)));
    return out;
}

Matrix simulated_block(const LinearOperator& op, const Matrix& G, int t) {
    if (t < 1) throw config_error("simulated block: t must be at least 1");
    if (G.rows() != op.rows())
        throw config_error("simulated block: start block rows must match operator rows");
    const Index b = G.cols();
    if (b < 1) throw config_error("simulated block: start block is empty");
    if (b * t > op.rows())
        throw config_error("simulated block: b*t exceeds the operator dimension");
    dense::require_finite(G, "simulated block");

    Matrix B(G.rows(), b * t);
    B.leftCols(b) = G;
    for (int i = 1; i < t; ++i) {
        Matrix prev = B.middleCols(static_cast<Index>(i - 1) * b, b);
        B.middleCols(static_cast<Index>(i) * b, b) = op.apply(op.apply_transpose(prev));
    }
    return B;
}

GoodnessEstimate goodness_estimate(const Matrix& U_k, const Matrix& B, int t,
                                   double delta) {
    if (t < 1) throw config_error("goodness estimate: t must be at least 1");
    if (!(delta > 0.0 && delta < 1.0))
        throw config_error("goodness estimate: delta must lie in (0,1)");
    if (U_k.rows() != B.rows())
        throw config_error("goodness estimate: U_k and B row counts differ");
    const Index k = U_k.cols();
    if (B.cols() < k)
        throw config_error("goodness estimate: start block has fewer than k columns");

    GoodnessEstimate out;
    Matrix P = U_k.transpose() * B;
    out.sigma_min_proj = dense::sigma_min(P);
    const double floor = 1e-10 * B.norm();
    if (out.sigma_min_proj <= floor) {
        out.rank_deficient = true;
        out.L = kInf;
        return out;
    }
    const double kn = static_cast<double>(k) * static_cast<double>(U_k.rows());
    const double tail = static_cast<double>(t) * std::log(1.0 / delta);
    out.L = 5.0 * std::max(kn, tail) / (out.sigma_min_proj * out.sigma_min_proj);
    return out;
}

Matrix goodness_restrict(const Matrix& Q_prime, const Matrix& U_k_prime, int k) {
    const Index kp = Q_prime.cols();
    if (k < 1 || static_cast<Index>(k) > kp)
        throw config_error("goodness restrict: need 1 <= k <= cols(Q')");
    if (U_k_prime.rows() != Q_prime.rows() || U_k_prime.cols() != kp)
        throw config_error("goodness restrict: U_{k'} must match Q' in shape");

    Matrix T = U_k_prime.transpose() * Q_prime;  // k' x k'
    Vector s = dense::singular_values(T);
    // Both factors have orthonormal columns, so sigma(T) <= 1 exactly; the
    // rank decision can use an absolute floor as well as a relative one.
    const double floor_abs = 1e3 * static_cast<double>(kp) * dense::kEpsMach;
    if (!(s(s.size() - 1) > std::max(floor_abs, 1e-12 * s(0))))
        throw config_error("goodness restrict: projected basis is numerically singular");

    Matrix C = T.partialPivLu().solve(Matrix::Identity(kp, kp).leftCols(k));
    dense::OrthoResult V = dense::orthonormalize(C);
    if (V.rank != k)
        throw numeric_error("goodness restrict: restriction lost rank unexpectedly");
    return Q_prime * V.Q;
}

}  // namespace rbki::core
