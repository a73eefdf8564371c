#include "foval/tensor.hpp"

#include "foval/error.hpp"

namespace foval {

namespace {

void check(bool ok, const char* what) {
    if (!ok) throw ShapeMismatch(what);
}

} // namespace

void gemm_nn(Matrix& C, const Matrix& A, const Matrix& B, bool accumulate) {
    check(A.cols == B.rows && C.rows == A.rows && C.cols == B.cols, "gemm_nn");
    if (!accumulate) C.zero();
    for (int i = 0; i < A.rows; ++i) {
        const double* a = A.row(i);
        double* c = C.row(i);
        for (int k = 0; k < A.cols; ++k) {
            const double aik = a[k];
            const double* b = B.row(k);
            for (int j = 0; j < B.cols; ++j) c[j] += aik * b[j];
        }
    }
}

void gemm_nt(Matrix& C, const Matrix& A, const Matrix& B, bool accumulate) {
    check(A.cols == B.cols && C.rows == A.rows && C.cols == B.rows, "gemm_nt");
    for (int i = 0; i < A.rows; ++i) {
        const double* a = A.row(i);
        double* c = C.row(i);
        for (int j = 0; j < B.rows; ++j) {
            const double* b = B.row(j);
            double s = 0.0;
            for (int k = 0; k < A.cols; ++k) s += a[k] * b[k];
            c[j] = accumulate ? c[j] + s : s;
        }
    }
}

void gemm_tn(Matrix& C, const Matrix& A, const Matrix& B, bool accumulate) {
    check(A.rows == B.rows && C.rows == A.cols && C.cols == B.cols, "gemm_tn");
    if (!accumulate) C.zero();
    for (int k = 0; k < A.rows; ++k) {
        const double* a = A.row(k);
        const double* b = B.row(k);
        for (int i = 0; i < A.cols; ++i) {
            const double aki = a[i];
            double* c = C.row(i);
            for (int j = 0; j < B.cols; ++j) c[j] += aki * b[j];
        }
    }
}

} // namespace foval
