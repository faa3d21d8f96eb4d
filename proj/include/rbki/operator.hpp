#pragma once

#include "rbki/common.hpp"

#include <atomic>

namespace rbki::core {

// Matrix-free view of A in R^{n x d}. Every apply/apply_transpose call counts
// one unit per column pushed through, so algorithm costs can be audited
// exactly. The counter is atomic; concurrent trials may share an operator.
class LinearOperator {
public:
    virtual ~LinearOperator() = default;

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }

    Matrix apply(const Matrix& X) const;            // A * X
    Matrix apply_transpose(const Matrix& X) const;  // A^T * X

    long long matvec_count() const { return count_.load(std::memory_order_relaxed); }
    void reset_matvec_count() const { count_.store(0, std::memory_order_relaxed); }

    // Dense reference for desk-scale diagnostics; never counted.
    virtual Matrix materialize() const;

protected:
    LinearOperator(Index rows, Index cols);
    virtual Matrix apply_impl(const Matrix& X) const = 0;
    virtual Matrix apply_transpose_impl(const Matrix& X) const = 0;

private:
    Index rows_;
    Index cols_;
    mutable std::atomic<long long> count_{0};
};

class DenseOperator final : public LinearOperator {
public:
    explicit DenseOperator(Matrix A);

    const Matrix& dense() const { return A_; }
    Matrix materialize() const override { return A_; }

protected:
    Matrix apply_impl(const Matrix& X) const override;
    Matrix apply_transpose_impl(const Matrix& X) const override;

private:
    Matrix A_;
};

// Symmetric operators feed the one-sided Krylov recurrences.
class SymmetricOperator {
public:
    virtual ~SymmetricOperator() = default;
    virtual Index dim() const = 0;
    virtual Matrix apply(const Matrix& X) const = 0;
};

// M = A A^T, realized as A (A^T X); costs two units per column.
class NormalOperator final : public SymmetricOperator {
public:
    explicit NormalOperator(const LinearOperator& op) : op_(op) {}
    Index dim() const override { return op_.rows(); }
    Matrix apply(const Matrix& X) const override {
        return op_.apply(op_.apply_transpose(X));
    }

private:
    const LinearOperator& op_;
};

// S = A A^T + diag(d); the diagonal shift costs nothing extra.
class SmoothedNormalOperator final : public SymmetricOperator {
public:
    SmoothedNormalOperator(const LinearOperator& op, Vector diag);
    Index dim() const override { return op_.rows(); }
    Matrix apply(const Matrix& X) const override;
    const Vector& diagonal() const { return diag_; }

private:
    const LinearOperator& op_;
    Vector diag_;
};

}  // namespace rbki::core
