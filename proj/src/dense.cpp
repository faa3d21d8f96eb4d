#include "rbki/dense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rbki::dense {

void require_finite(const Matrix& M, const std::string& context) {
    if (!M.allFinite()) {
        throw config_error(context + ": matrix contains non-finite entries");
    }
}

BlockOrthonormalizer::BlockOrthonormalizer(Index rows, double drop_tol)
    : rows_(rows), cols_(0), drop_tol_(drop_tol), Q_(rows, 0) {
    if (rows <= 0) throw config_error("orthonormalize: matrix must have at least one row");
    if (drop_tol < 0.0) throw config_error("orthonormalize: drop_tol must be nonnegative");
}

Index BlockOrthonormalizer::push_block(const Matrix& W) {
    return push_block(W, W.norm());
}

Index BlockOrthonormalizer::push_block(const Matrix& W, double scale) {
    if (W.rows() != rows_) throw config_error("orthonormalize: block row count mismatch");
    require_finite(W, "orthonormalize");

    Matrix B = W;
    if (cols_ > 0) {
        auto Q = Q_.leftCols(cols_);
        // Two projection passes against the accepted basis.
        B.noalias() -= Q * (Q.transpose() * B);
        B.noalias() -= Q * (Q.transpose() * B);
    }

    if (Q_.cols() < cols_ + B.cols()) {
        Matrix grown(rows_, cols_ + B.cols());
        grown.leftCols(cols_) = Q_.leftCols(cols_);
        Q_ = std::move(grown);
    }

    const double threshold = drop_tol_ * scale;
    const Index block_start = cols_;
    Index kept = 0;
    for (Index j = 0; j < B.cols(); ++j) {
        Vector v = B.col(j);
        // Within-block projections against columns accepted above; one pass
        // plus one re-orthogonalization pass, mirroring the block path.
        if (kept > 0) {
            auto Qb = Q_.middleCols(block_start, kept);
            v.noalias() -= Qb * (Qb.transpose() * v).eval();
            v.noalias() -= Qb * (Qb.transpose() * v).eval();
        }
        const double nrm = v.norm();
        if (nrm <= threshold) continue;  // dependent direction, drop
        Q_.col(cols_) = v / nrm;
        ++cols_;
        ++kept;
    }
    return kept;
}

OrthoResult orthonormalize(const Matrix& M, double drop_tol) {
    BlockOrthonormalizer ortho(M.rows(), drop_tol);
    ortho.push_block(M, M.norm());
    OrthoResult out;
    out.rank = ortho.rank();
    out.Q = ortho.basis().leftCols(out.rank);
    return out;
}

namespace {

void apply_sign_convention(Matrix& U, Matrix& V) {
    for (Index j = 0; j < U.cols(); ++j) {
        Index imax = 0;
        double amax = -1.0;
        for (Index i = 0; i < U.rows(); ++i) {
            const double a = std::abs(U(i, j));
            if (a > amax) {
                amax = a;
                imax = i;
            }
        }
        if (U(imax, j) < 0.0) {
            U.col(j) = -U.col(j);
            if (j < V.cols()) V.col(j) = -V.col(j);
        }
    }
}

}  // namespace

SvdResult svd(const Matrix& M) {
    if (M.rows() == 0 || M.cols() == 0) throw config_error("svd: empty matrix");
    require_finite(M, "svd");

    SvdResult out;
    const Index small = 16;
    if (std::min(M.rows(), M.cols()) <= small) {
        Eigen::JacobiSVD<Matrix> dec(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        out.U = dec.matrixU();
        out.s = dec.singularValues();
        out.V = dec.matrixV();
    } else {
        Eigen::BDCSVD<Matrix> dec(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (dec.info() != Eigen::Success) {
            std::ostringstream msg;
            msg << "svd: decomposition failed to converge for " << M.rows() << "x"
                << M.cols() << " matrix";
            throw numeric_error(msg.str());
        }
        out.U = dec.matrixU();
        out.s = dec.singularValues();
        out.V = dec.matrixV();
    }
    apply_sign_convention(out.U, out.V);
    return out;
}

Vector singular_values(const Matrix& M) {
    if (M.rows() == 0 || M.cols() == 0) throw config_error("singular_values: empty matrix");
    require_finite(M, "singular_values");
    // Values-only queries feed conditioning measurements, where the divide-
    // and-conquer kernel's habit of deflating sub-roundoff singular values to
    // exactly zero would turn "too small to resolve" into a fake singularity.
    // One-sided Jacobi instead bottoms out at roundoff scale, so keep it for
    // every size the measurement experiments use.
    if (std::min(M.rows(), M.cols()) <= 200) {
        return Eigen::JacobiSVD<Matrix>(M).singularValues();
    }
    Eigen::BDCSVD<Matrix> dec(M);
    if (dec.info() != Eigen::Success) {
        throw numeric_error("singular_values: decomposition failed to converge");
    }
    return dec.singularValues();
}

double sigma_min(const Matrix& M) {
    Vector s = singular_values(M);
    return s(s.size() - 1);
}

double sigma_max(const Matrix& M) {
    Vector s = singular_values(M);
    return s(0);
}

Matrix orthonormal_complement(const Matrix& M, double rank_tol_factor) {
    if (M.rows() == 0) throw config_error("orthonormal_complement: empty matrix");
    if (M.cols() == 0) return Matrix::Identity(M.rows(), M.rows());
    require_finite(M, "orthonormal_complement");

    Eigen::JacobiSVD<Matrix> dec(M, Eigen::ComputeFullU);
    const Vector& s = dec.singularValues();
    const double tol = rank_tol_factor * kEpsMach * (s.size() > 0 ? s(0) : 0.0);
    Index rank = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) ++rank;
    return dec.matrixU().rightCols(M.rows() - rank);
}

std::vector<double> principal_angles(const Matrix& Q1, const Matrix& Q2) {
    if (Q1.rows() != Q2.rows())
        throw config_error("principal_angles: subspaces live in different dimensions");
    if (Q1.cols() == 0 || Q2.cols() == 0)
        throw config_error("principal_angles: empty basis");
    const double tol = 1e-8;
    auto check_ortho = [&](const Matrix& Q, const char* name) {
        Matrix G = Q.transpose() * Q - Matrix::Identity(Q.cols(), Q.cols());
        if (G.cwiseAbs().maxCoeff() > tol) {
            throw config_error(std::string("principal_angles: ") + name +
                               " does not have orthonormal columns");
        }
    };
    check_ortho(Q1, "first basis");
    check_ortho(Q2, "second basis");

    // Two-step cosine/sine formulation: arccos alone has an O(sqrt(eps))
    // noise floor near zero angles, the sine route restores absolute accuracy
    // there.
    Matrix C = Q1.transpose() * Q2;
    Vector cosines = singular_values(C);  // nonincreasing
    Matrix S = Q2 - Q1 * C;
    Vector sines_all = singular_values(S);  // nonincreasing

    const Index m = cosines.size();
    std::vector<double> angles(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
        const double c = std::clamp(cosines(i), 0.0, 1.0);
        double angle;
        if (c * c > 0.5) {
            // The i-th smallest angle pairs with the i-th smallest sine.
            const double s = std::clamp(sines_all(sines_all.size() - 1 - i), 0.0, 1.0);
            angle = std::asin(s);
        } else {
            angle = std::acos(c);
        }
        angles[static_cast<std::size_t>(i)] = angle;
    }
    std::sort(angles.begin(), angles.end());
    return angles;
}

VandermondeMatrix::VandermondeMatrix(std::vector<double> nodes_in, int degree_in)
    : nodes(std::move(nodes_in)), degree(degree_in) {
    if (nodes.empty()) throw config_error("vandermonde: need at least one node");
    if (degree < 1) throw config_error("vandermonde: degree must be positive");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!(nodes[i] >= 0.0 && nodes[i] <= 1.0))
            throw config_error("vandermonde: nodes must lie in [0,1]");
        if (i > 0 && !(nodes[i] < nodes[i - 1]))
            throw config_error("vandermonde: nodes must be strictly decreasing");
    }
}

Matrix VandermondeMatrix::build() const {
    const Index k = static_cast<Index>(nodes.size());
    Matrix V(k, degree);
    for (Index i = 0; i < k; ++i) {
        double p = 1.0;
        for (int j = 0; j < degree; ++j) {
            V(i, j) = p;
            p *= nodes[static_cast<std::size_t>(i)];
        }
    }
    return V;
}

VandermondeInverseNorm vandermonde_inverse_inf_norm(const std::vector<double>& nodes) {
    const int t = static_cast<int>(nodes.size());
    if (t < 1) throw config_error("vandermonde_inverse_inf_norm: no nodes");
    if (t > 30) throw config_error("vandermonde_inverse_inf_norm: more than 30 nodes");
    VandermondeMatrix checked(nodes, t);  // validates range, strict decrease
    for (int i = 1; i < t; ++i) {
        if (nodes[static_cast<std::size_t>(i)] == nodes[static_cast<std::size_t>(i - 1)])
            throw config_error("vandermonde_inverse_inf_norm: duplicate nodes");
    }

    VandermondeInverseNorm out{1.0, 1.0, 1.0};
    if (t == 1) return out;

    // The norm is the largest absolute coefficient sum of any single Lagrange
    // polynomial L_i(x) = prod_{j!=i} (x - mu_j)/(mu_i - mu_j); that is the
    // infinity norm of the inverse of the coefficients-to-values map (node i's
    // coefficients sit in column i of W^{-1} for the node-per-row W built
    // here). With nonnegative nodes the numerator expansion has no sign
    // cancellation, so every coefficient is componentwise accurate even when
    // W itself is ill conditioned.
    out.exact = 0.0;
    for (int i = 0; i < t; ++i) {
        std::vector<double> coeff{1.0};
        double denom = 1.0;
        for (int j = 0; j < t; ++j) {
            if (j == i) continue;
            const double mu = nodes[static_cast<std::size_t>(j)];
            std::vector<double> next(coeff.size() + 1, 0.0);
            for (std::size_t r = 0; r < coeff.size(); ++r) {
                next[r + 1] += coeff[r];
                next[r] -= mu * coeff[r];
            }
            coeff = std::move(next);
            denom *= nodes[static_cast<std::size_t>(i)] - mu;
        }
        double node_sum = 0.0;
        for (double c : coeff) node_sum += std::abs(c);
        out.exact = std::max(out.exact, node_sum / std::abs(denom));
    }

    double best_log = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < t; ++i) {
        double lg = 0.0;
        for (int j = 0; j < t; ++j) {
            if (j == i) continue;
            lg += std::log1p(nodes[static_cast<std::size_t>(j)]);
            lg -= std::log(std::abs(nodes[static_cast<std::size_t>(i)] -
                                    nodes[static_cast<std::size_t>(j)]));
        }
        best_log = std::max(best_log, lg);
    }
    out.gautschi_product = std::exp(best_log);

    double eta = std::numeric_limits<double>::infinity();
    for (int i = 1; i < t; ++i) {
        eta = std::min(eta, nodes[static_cast<std::size_t>(i - 1)] -
                                nodes[static_cast<std::size_t>(i)]);
    }
    out.gap_power = std::exp((t - 1) * (std::log(2.0) - std::log(eta)));

    const double slack = 1e-9;
    if (out.exact > out.gautschi_product * (1.0 + slack) ||
        out.gautschi_product > out.gap_power * (1.0 + slack)) {
        throw numeric_error("vandermonde_inverse_inf_norm: bound chain violated");
    }
    return out;
}

}  // namespace rbki::dense
