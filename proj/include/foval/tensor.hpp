#pragma once

#include <cstddef>
#include <vector>

namespace foval {

// Dense row-major matrix of doubles. Just enough linear algebra for the
// network in nn.hpp; no views, no broadcasting.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols); }
    const double* row(int r) const {
        return data.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
    }
    double& at(int r, int c) { return row(r)[c]; }
    double at(int r, int c) const { return row(r)[c]; }
    std::size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

// C (+)= A * B        with A [m x k], B [k x n], C [m x n]
void gemm_nn(Matrix& C, const Matrix& A, const Matrix& B, bool accumulate);

// C (+)= A * B^T      with A [m x k], B [n x k], C [m x n]
void gemm_nt(Matrix& C, const Matrix& A, const Matrix& B, bool accumulate);

// C (+)= A^T * B      with A [k x m], B [k x n], C [m x n]
void gemm_tn(Matrix& C, const Matrix& A, const Matrix& B, bool accumulate);

} // namespace foval
