#include "rbki/dense.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace rbki;
using namespace rbki::dense;

namespace {

double ortho_defect(const Matrix& Q) {
    if (Q.cols() == 0) return 0.0;
    Matrix G = Q.transpose() * Q - Matrix::Identity(Q.cols(), Q.cols());
    return G.cwiseAbs().maxCoeff();
}

// Subspace distance oracle via an independent QR factorization path.
double max_angle_vs_qr_span(const Matrix& M, const Matrix& Q) {
    Eigen::ColPivHouseholderQR<Matrix> qr(M);
    const Index r = qr.rank();
    Matrix ref = qr.householderQ() * Matrix::Identity(M.rows(), r);
    auto angles = principal_angles(ref, Q);
    return angles.empty() ? 0.0 : angles.back();
}

}  // namespace

TEST_CASE("orthonormalize full-rank random matrices") {
    std::mt19937_64 rng = make_rng(101);
    for (int trial = 0; trial < 8; ++trial) {
        const Index n = 20 + 5 * trial;
        const Index m = 4 + trial;
        Matrix M = gaussian_matrix(n, m, rng);
        OrthoResult res = orthonormalize(M, 0.0);
        CHECK(res.rank == m);
        CHECK(res.Q.rows() == n);
        CHECK(res.Q.cols() == m);
        CHECK(ortho_defect(res.Q) <= 100 * kEpsMach);
        CHECK(max_angle_vs_qr_span(M, res.Q) <= 1e-10);
    }
}

TEST_CASE("orthonormalize drops exact duplicates") {
    Matrix M(2, 2);
    M << 1, 2, 1, 2;
    OrthoResult res = orthonormalize(M);
    CHECK(res.rank == 1);
    CHECK(res.Q.cols() == 1);
    CHECK(std::abs(std::abs(res.Q(0, 0)) - 1.0 / std::sqrt(2.0)) < 1e-14);
}

TEST_CASE("orthonormalize drops dependent columns at default tolerance") {
    Matrix M(3, 4);
    M << 1, 0, 1, 0,
         0, 1, 1, 0,
         0, 0, 0, 1;
    OrthoResult res = orthonormalize(M);
    CHECK(res.rank == 3);
}

TEST_CASE("orthonormalize of the zero matrix has rank 0") {
    Matrix M = Matrix::Zero(5, 3);
    OrthoResult res = orthonormalize(M);
    CHECK(res.rank == 0);
    CHECK(res.Q.rows() == 5);
    CHECK(res.Q.cols() == 0);
}

TEST_CASE("orthonormalize rejects non-finite input") {
    Matrix M = Matrix::Ones(3, 2);
    M(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(orthonormalize(M), config_error);
}

TEST_CASE("orthonormalize is idempotent on its own output") {
    std::mt19937_64 rng = make_rng(202);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix M = gaussian_matrix(30, 7, rng);
        OrthoResult first = orthonormalize(M);
        OrthoResult second = orthonormalize(first.Q);
        CHECK(second.rank == first.rank);
        auto angles = principal_angles(first.Q, second.Q);
        CHECK(angles.back() <= 1e-12);
    }
}

TEST_CASE("incremental blocks span the same space as a single pass") {
    std::mt19937_64 rng = make_rng(303);
    Matrix M = gaussian_matrix(40, 12, rng);
    OrthoResult oneshot = orthonormalize(M);

    BlockOrthonormalizer inc(40);
    inc.push_block(M.leftCols(5));
    inc.push_block(M.middleCols(5, 4));
    inc.push_block(M.rightCols(3));
    CHECK(inc.rank() == oneshot.rank);
    CHECK(ortho_defect(inc.basis()) <= 100 * kEpsMach);
    auto angles = principal_angles(oneshot.Q, inc.basis());
    CHECK(angles.back() <= 1e-10);
}

TEST_CASE("svd reconstructs a spread of shapes") {
    std::mt19937_64 rng = make_rng(404);
    const Index shapes[][2] = {{1, 1}, {3, 7}, {20, 20}, {50, 8}, {120, 90}, {200, 200}};
    for (auto& sh : shapes) {
        Matrix A = gaussian_matrix(sh[0], sh[1], rng);
        SvdResult res = svd(A);
        const Index r = std::min(sh[0], sh[1]);
        REQUIRE(res.s.size() == r);
        for (Index i = 1; i < r; ++i) CHECK(res.s(i) <= res.s(i - 1));
        CHECK(ortho_defect(res.U) <= 1e-13);
        CHECK(ortho_defect(res.V) <= 1e-13);
        Matrix R = A - res.U * res.s.asDiagonal() * res.V.transpose();
        CHECK(R.norm() <= 50.0 * std::max(sh[0], sh[1]) * kEpsMach * res.s(0));
    }
}

TEST_CASE("svd of a diagonal matrix is exact") {
    Matrix A = Matrix::Zero(3, 3);
    A(0, 0) = 3;
    A(1, 1) = 2;
    A(2, 2) = 1;
    SvdResult res = svd(A);
    CHECK(res.s(0) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(res.s(1) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(res.s(2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK((res.U - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((res.V - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("svd recovers constructed rotation factors") {
    const double a = 0.6;
    Matrix R1(2, 2), R2(2, 2);
    R1 << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    const double b = -0.25;
    R2 << std::cos(b), -std::sin(b), std::sin(b), std::cos(b);
    Matrix S = Matrix::Zero(2, 2);
    S(0, 0) = 2.0;
    S(1, 1) = 1.0;
    Matrix A = R1 * S * R2.transpose();

    SvdResult res = svd(A);
    CHECK(res.s(0) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(res.s(1) == doctest::Approx(1.0).epsilon(1e-13));
    for (int j = 0; j < 2; ++j) {
        const double align = std::abs(res.U.col(j).dot(R1.col(j)));
        CHECK(align == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("svd sign convention is deterministic") {
    std::mt19937_64 rng = make_rng(505);
    Matrix A = gaussian_matrix(25, 10, rng);
    SvdResult r1 = svd(A);
    SvdResult r2 = svd(A);
    CHECK((r1.U - r2.U).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r1.V - r2.V).cwiseAbs().maxCoeff() == 0.0);
    for (Index j = 0; j < r1.U.cols(); ++j) {
        Index imax = 0;
        r1.U.col(j).cwiseAbs().maxCoeff(&imax);
        CHECK(r1.U(imax, j) > 0.0);
    }
}

TEST_CASE("svd rejects empty and non-finite input") {
    CHECK_THROWS_AS(svd(Matrix(0, 0)), config_error);
    Matrix bad = Matrix::Ones(2, 2);
    bad(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(svd(bad), config_error);
}

TEST_CASE("sigma_min matches the explicit Vandermonde inverse") {
    // Nodes (1, 0.5, 0). The inverse was expanded by hand from the Lagrange
    // polynomials; sigma_min(W) = 1 / sigma_max(W^{-1}) and sigma_max of the
    // frozen inverse is found here by plain power iteration, independent of
    // any library SVD.
    Matrix W(3, 3);
    W << 1, 1, 1,
         1, 0.5, 0.25,
         1, 0, 0;
    Matrix Winv(3, 3);
    Winv << 0, 0, 1,
            -1, 4, -3,
            2, -4, 2;
    CHECK((W * Winv - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-14);

    Vector v = Vector::Ones(3).normalized();
    double est = 0.0;
    for (int it = 0; it < 200; ++it) {
        Vector w = Winv.transpose() * (Winv * v);
        est = w.norm();
        v = w / est;
    }
    const double sigma_max_inv = std::sqrt(est);
    CHECK(sigma_min(W) == doctest::Approx(1.0 / sigma_max_inv).epsilon(1e-11));
    CHECK(sigma_max(Matrix::Identity(4, 4)) == doctest::Approx(1.0));
    CHECK(sigma_min(Matrix::Identity(4, 4)) == doctest::Approx(1.0));
}

TEST_CASE("principal angles against an analytic rotation") {
    const double theta = 0.3;
    Matrix Q1 = Matrix::Zero(4, 2);
    Q1(0, 0) = 1.0;
    Q1(1, 1) = 1.0;
    Matrix Q2 = Matrix::Zero(4, 2);
    Q2(0, 0) = std::cos(theta);
    Q2(2, 0) = std::sin(theta);
    Q2(1, 1) = 1.0;
    auto angles = principal_angles(Q1, Q2);
    REQUIRE(angles.size() == 2);
    CHECK(angles[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(angles[1] == doctest::Approx(theta).epsilon(1e-12));
}

TEST_CASE("principal angles of identical and orthogonal spans") {
    std::mt19937_64 rng = make_rng(606);
    Matrix Q = orthonormalize(gaussian_matrix(10, 3, rng)).Q;
    auto same = principal_angles(Q, Q);
    CHECK(same.back() <= 1e-7);

    Matrix E1 = Matrix::Identity(4, 2);
    Matrix E2 = Matrix::Zero(4, 2);
    E2(2, 0) = 1.0;
    E2(3, 1) = 1.0;
    auto perp = principal_angles(E1, E2);
    CHECK(perp.front() == doctest::Approx(std::acos(0.0)).epsilon(1e-12));
}

TEST_CASE("principal angles validates inputs") {
    Matrix Q = Matrix::Identity(4, 2);
    Matrix bad = Matrix::Ones(4, 2);
    CHECK_THROWS_AS(principal_angles(Q, bad), config_error);
    CHECK_THROWS_AS(principal_angles(Q, Matrix::Identity(5, 2)), config_error);
}

TEST_CASE("vandermonde matrix entries") {
    VandermondeMatrix V({1.0, 0.5, 0.0}, 3);
    Matrix M = V.build();
    Matrix want(3, 3);
    want << 1, 1, 1,
            1, 0.5, 0.25,
            1, 0, 0;
    CHECK((M - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vandermonde matrix validates nodes") {
    CHECK_THROWS_AS(VandermondeMatrix({0.5, 1.0}, 2), config_error);   // increasing
    CHECK_THROWS_AS(VandermondeMatrix({1.5, 0.5}, 2), config_error);   // above 1
    CHECK_THROWS_AS(VandermondeMatrix({0.5, -0.1}, 2), config_error);  // below 0
    CHECK_THROWS_AS(VandermondeMatrix({}, 1), config_error);
    CHECK_THROWS_AS(VandermondeMatrix({0.5}, 0), config_error);
}

TEST_CASE("vandermonde inverse norm frozen instance") {
    // Hand computation: the Lagrange coefficient sums per node are
    // |2|+|-1| = 3 at node 1, |-4|+|4| = 8 at node 0.5, |2|+|-3|+|1| = 6 at
    // node 0, so the exact norm is 8; the node-product bound attains the same
    // 8 at the middle node; the min gap is 0.5, so the power bound is
    // (2/0.5)^2 = 16.
    auto res = vandermonde_inverse_inf_norm({1.0, 0.5, 0.0});
    CHECK(res.exact == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(res.gautschi_product == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(res.gap_power == doctest::Approx(16.0).epsilon(1e-12));
}

TEST_CASE("vandermonde inverse norm matches LU inversion on tame nodes") {
    std::mt19937_64 rng = make_rng(707);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int t = 2 + static_cast<int>(rng() % 5);
        std::vector<double> nodes;
        while (static_cast<int>(nodes.size()) < t) {
            double cand = unif(rng);
            bool ok = true;
            for (double existing : nodes)
                if (std::abs(existing - cand) < 0.05) ok = false;
            if (ok) nodes.push_back(cand);
        }
        std::sort(nodes.rbegin(), nodes.rend());

        auto res = vandermonde_inverse_inf_norm(nodes);
        // Node i's Lagrange coefficients form column i of W^{-1} for the
        // node-per-row W, so the reference norm is the max column sum there.
        Matrix W = VandermondeMatrix(nodes, t).build();
        Matrix Winv = W.inverse();
        const double lu_norm = Winv.cwiseAbs().colwise().sum().maxCoeff();
        CHECK(res.exact == doctest::Approx(lu_norm).epsilon(1e-8));
    }
}

TEST_CASE("vandermonde inverse norm chain holds on random node sets") {
    std::mt19937_64 rng = make_rng(808);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int t = 2 + static_cast<int>(rng() % 7);
        std::vector<double> nodes;
        while (static_cast<int>(nodes.size()) < t) {
            double cand = unif(rng);
            bool ok = true;
            for (double existing : nodes)
                if (std::abs(existing - cand) < 1e-4) ok = false;
            if (ok) nodes.push_back(cand);
        }
        std::sort(nodes.rbegin(), nodes.rend());
        auto res = vandermonde_inverse_inf_norm(nodes);  // throws if chain breaks
        CHECK(res.exact <= res.gautschi_product * (1 + 1e-9));
        CHECK(res.gautschi_product <= res.gap_power * (1 + 1e-9));
    }
}

TEST_CASE("vandermonde inverse norm edge cases") {
    auto single = vandermonde_inverse_inf_norm({0.7});
    CHECK(single.exact == 1.0);
    CHECK(single.gautschi_product == 1.0);
    CHECK(single.gap_power == 1.0);

    std::vector<double> too_many(31);
    for (int i = 0; i < 31; ++i) too_many[static_cast<std::size_t>(i)] = 1.0 - i * 0.03;
    CHECK_THROWS_AS(vandermonde_inverse_inf_norm(too_many), config_error);
}

TEST_CASE("orthonormal complement") {
    Matrix M = Matrix::Identity(3, 1);
    Matrix C = orthonormal_complement(M, 1e3);
    REQUIRE(C.cols() == 2);
    CHECK(ortho_defect(C) <= 1e-13);
    CHECK((C.transpose() * M).cwiseAbs().maxCoeff() <= 1e-13);

    Matrix empty(4, 0);
    Matrix full = orthonormal_complement(empty, 1e3);
    CHECK(full.cols() == 4);
    CHECK((full - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
}
