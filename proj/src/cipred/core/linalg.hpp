#pragma once

#include <cstddef>
#include <vector>

namespace cipred::linalg {

// Small dense double-precision matrix, row major. Sized for the statistical
// side of the pipeline (mixed models, reduced design matrices, Rayleigh-Ritz
// blocks); the float tensor math lives in kernels/.
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

Mat matmul(const Mat& x, const Mat& y);
Mat transpose(const Mat& x);
Mat identity(std::size_t n);

// Cholesky factor L (lower) of an SPD matrix; throws ValidationError if the
// matrix is not positive definite to working precision.
Mat cholesky(const Mat& spd);
// Solves spd * x = b via Cholesky. b may have multiple columns.
Mat cholesky_solve(const Mat& spd, const Mat& b);
// log(det(spd)) via Cholesky.
double cholesky_logdet(const Mat& spd);

// Gaussian elimination with partial pivoting; general square solve.
Mat lu_solve(Mat a, Mat b);

// Symmetric eigendecomposition by cyclic Jacobi. Returns eigenvalues in
// descending order; the columns of vectors are the matching eigenvectors.
struct EigResult {
    std::vector<double> values;
    Mat vectors;
};
EigResult jacobi_eigh(Mat sym, int max_sweeps = 64);

// In-place modified Gram-Schmidt on the columns of q. Columns that vanish
// (norm below tol * initial norm scale) are replaced with zero; returns the
// effective rank.
std::size_t mgs_orthonormalize(Mat& q, double tol = 1e-12);

}  // namespace cipred::linalg
