#include "rbki/rbki.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace rbki;
using namespace rbki::core;

TEST_CASE("smoothing diagonal is deterministic, bounded, and seed sensitive") {
    Matrix A = Matrix::Identity(30, 20);
    DenseOperator op(A);
    PerturbationConfig pcfg;
    pcfg.gamma = 1e-3;
    pcfg.seed = 11;

    SmoothedNormalOperator s1 = smooth_perturb(op, pcfg);
    SmoothedNormalOperator s2 = smooth_perturb(op, pcfg);
    CHECK((s1.diagonal() - s2.diagonal()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s1.diagonal().size() == 30);
    CHECK(s1.diagonal().cwiseAbs().maxCoeff() <= 1e-3);
    CHECK(s1.diagonal().cwiseAbs().maxCoeff() > 0.0);

    pcfg.seed = 12;
    SmoothedNormalOperator s3 = smooth_perturb(op, pcfg);
    CHECK((s1.diagonal() - s3.diagonal()).cwiseAbs().maxCoeff() > 0.0);

    pcfg.gamma = 0.0;
    CHECK_THROWS_AS(smooth_perturb(op, pcfg), config_error);
    pcfg.gamma = -1.0;
    CHECK_THROWS_AS(smooth_perturb(op, pcfg), config_error);
}

TEST_CASE("smoothed operator deviates from A A^T by at most gamma per entry") {
    std::mt19937_64 rng = make_rng(51);
    Matrix A = gaussian_matrix(15, 10, rng);
    DenseOperator op(A);
    PerturbationConfig pcfg;
    pcfg.gamma = 0.05;
    pcfg.seed = 3;
    SmoothedNormalOperator S = smooth_perturb(op, pcfg);

    Matrix M = A * A.transpose();
    for (int trial = 0; trial < 10; ++trial) {
        Vector v = gaussian_matrix(15, 1, rng);
        v.normalize();
        Vector sv = S.apply(v);
        CHECK((sv - M * v).cwiseAbs().maxCoeff() <=
              0.05 * v.cwiseAbs().maxCoeff() + 1e-14);
    }
}

TEST_CASE("smoothing splits repeated eigenvalues almost surely") {
    // Diagonal A with a fourfold repeated singular value: the smoothed operator
    // is diagonal with entries lambda_i + d_i, which are distinct for every
    // seed we try.
    Vector sig(6);
    sig << 1.0, 1.0, 1.0, 1.0, 0.5, 0.25;
    Matrix A = sig.asDiagonal().toDenseMatrix();
    DenseOperator op(A);

    int split = 0;
    const double gamma = 1e-3;
    for (int trial = 0; trial < 100; ++trial) {
        PerturbationConfig pcfg;
        pcfg.gamma = gamma;
        pcfg.seed = static_cast<std::uint64_t>(trial);
        SmoothedNormalOperator S = smooth_perturb(op, pcfg);
        Vector lam = sig.array().square().matrix() + S.diagonal();
        std::sort(lam.data(), lam.data() + lam.size(), std::greater<double>());
        double min_gap = 1.0;
        for (Index i = 1; i < lam.size(); ++i)
            min_gap = std::min(min_gap, lam(i - 1) - lam(i));
        if (min_gap > 0.0) ++split;
    }
    CHECK(split == 100);
}

TEST_CASE("the smallest smoothed gap scales linearly with gamma") {
    // For a fully repeated eigenvalue the split gaps are spacings of uniform
    // draws on [-gamma, gamma]; medians across seeds should scale ~10x between
    // gamma and 10*gamma.
    Vector sig = Vector::Ones(8);
    Matrix A = sig.asDiagonal().toDenseMatrix();
    DenseOperator op(A);

    auto median_min_gap = [&](double gamma) {
        std::vector<double> gaps;
        for (int trial = 0; trial < 200; ++trial) {
            PerturbationConfig pcfg;
            pcfg.gamma = gamma;
            pcfg.seed = static_cast<std::uint64_t>(900 + trial);
            SmoothedNormalOperator S = smooth_perturb(op, pcfg);
            Vector lam = Vector::Ones(8) + S.diagonal();
            std::sort(lam.data(), lam.data() + lam.size(), std::greater<double>());
            double min_gap = 1.0;
            for (Index i = 1; i < lam.size(); ++i)
                min_gap = std::min(min_gap, lam(i - 1) - lam(i));
            gaps.push_back(min_gap);
        }
        std::nth_element(gaps.begin(), gaps.begin() + 100, gaps.end());
        return gaps[100];
    };

    const double med_small = median_min_gap(1e-4);
    const double med_large = median_min_gap(1e-3);
    const double ratio = med_large / med_small;
    CHECK(ratio > 10.0 / 3.0);
    CHECK(ratio < 10.0 * 3.0);
}

TEST_CASE("smoothed iteration approximates the original matrix") {
    // Spectrum with a vanishing top gap: the plain iteration-count advisor
    // refuses it, the smoothed iteration still converges to a near-optimal
    // approximation of the *unperturbed* matrix.
    std::mt19937_64 rng = make_rng(52);
    const Index n = 24, d = 20;
    Vector sig(d);
    sig << 1.0, 1.0, 0.6, 0.4, 0.3, 0.25, 0.2, 0.15, 0.12, 0.1, 0.09, 0.08, 0.07,
        0.06, 0.05, 0.04, 0.03, 0.02, 0.01, 0.005;

    Matrix GU = gaussian_matrix(n, d, rng);
    Matrix GV = gaussian_matrix(d, d, rng);
    Eigen::HouseholderQR<Matrix> qu(GU), qv(GV);
    Matrix U = qu.householderQ() * Matrix::Identity(n, d);
    Matrix V = qv.householderQ() * Matrix::Identity(d, d);
    Matrix A = U * sig.asDiagonal() * V.transpose();
    DenseOperator op(A);

    std::vector<double> sig_vec(sig.data(), sig.data() + d);
    CHECK_THROWS_AS(
        recommend_q(sig_vec, 2, 2, 0.25, 0.05, n), config_error);

    KrylovConfig cfg;
    cfg.k = 2;
    cfg.b = 2;
    cfg.q = 10;
    cfg.seed = 17;
    PerturbationConfig pcfg;
    pcfg.gamma = 1e-3;
    pcfg.seed = 18;
    LowRankApprox approx = rbki_smoothed(op, cfg, pcfg);
    REQUIRE(approx.rank() == 2);

    double tail_sq = 0.0;
    for (Index i = 2; i < d; ++i) tail_sq += sig(i) * sig(i);
    const double opt = std::sqrt(tail_sq);
    const double err = (A - approx.materialize()).norm();
    CHECK(err <= 1.05 * opt);

    // Left vectors live in R^n, right in R^d, and both stay orthonormal.
    CHECK(approx.left_vectors.rows() == n);
    CHECK(approx.right_vectors.rows() == d);
    CHECK((approx.left_vectors.transpose() * approx.left_vectors -
           Matrix::Identity(2, 2))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    CHECK((approx.right_vectors.transpose() * approx.right_vectors -
           Matrix::Identity(2, 2))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
}

TEST_CASE("smoothed iteration cost accounting") {
    std::mt19937_64 rng = make_rng(53);
    Matrix A = gaussian_matrix(40, 30, rng);
    DenseOperator op(A);
    KrylovConfig cfg;
    cfg.k = 4;
    cfg.b = 2;
    cfg.q = 5;
    cfg.seed = 2;
    PerturbationConfig pcfg;
    pcfg.gamma = 1e-6;
    pcfg.seed = 9;
    LowRankApprox approx = rbki_smoothed(op, cfg, pcfg);

    // First block is the start block itself (free); each of the remaining q-1
    // blocks costs 2b; forming the core costs one transpose apply per basis
    // column.
    const long long m = approx.basis.Z.cols();
    CHECK(m == 10);
    CHECK(approx.basis.matvec_cost == 2 * 2 * (5 - 1));
    CHECK(approx.matvec_cost == approx.basis.matvec_cost + m);
    CHECK(op.matvec_count() == approx.matvec_cost);
    CHECK(approx.basis.Z.rows() == 40);  // left-side basis
}

TEST_CASE("smoothed iteration is deterministic for fixed seeds") {
    std::mt19937_64 rng = make_rng(54);
    Matrix A = gaussian_matrix(16, 12, rng);
    DenseOperator op(A);
    KrylovConfig cfg;
    cfg.k = 3;
    cfg.b = 3;
    cfg.q = 3;
    cfg.seed = 5;
    PerturbationConfig pcfg;
    pcfg.gamma = 1e-4;
    pcfg.seed = 6;
    LowRankApprox a1 = rbki_smoothed(op, cfg, pcfg);
    LowRankApprox a2 = rbki_smoothed(op, cfg, pcfg);
    CHECK((a1.materialize() - a2.materialize()).cwiseAbs().maxCoeff() == 0.0);
}
