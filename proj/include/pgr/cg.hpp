#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "pgr/error.hpp"
#include "pgr/linops.hpp"
#include "pgr/tensor.hpp"

namespace pgr {

struct CgResult {
  ImageTensor solution;
  int iterations = 0;
  bool converged = false;
  /// ||gram(u) - b|| / ||b|| at the returned iterate (0 when b = 0).
  double relative_residual = 0.0;
};

/// Conjugate gradients for gram(u) = b with gram symmetric positive definite.
///
/// Stops once ||gram(u) - b|| <= tol * ||b||. Hitting max_iters is not an
/// error: the best iterate is returned with converged = false.
template <class Gram>
CgResult cg_solve(Gram&& gram, const ImageTensor& b, double tol, int max_iters) {
  if (!(tol > 0.0)) throw ValidationError("cg_solve: tol must be positive");
  if (max_iters < 0) throw ValidationError("cg_solve: max_iters must be >= 0");

  CgResult result;
  result.solution = ImageTensor(b.shape());
  const double b_norm = norm(b);
  if (!std::isfinite(b_norm)) throw NumericalError("cg_solve: right-hand side is not finite");
  if (b_norm == 0.0) {
    result.converged = true;
    return result;
  }

  ImageTensor& x = result.solution;
  ImageTensor r = b;
  ImageTensor p = r;
  double rr = squared_norm(r);
  const double target = tol * b_norm;

  ImageTensor best = x;
  double best_res = std::sqrt(rr);

  for (int k = 0; k < max_iters; ++k) {
    const ImageTensor q = gram(p);
    const double pq = dot(p, q);
    if (!std::isfinite(pq)) {
      throw NumericalError("cg_solve: non-finite curvature at iteration " + std::to_string(k + 1));
    }
    if (pq <= 0.0) {
      throw NumericalError("cg_solve: operator is not positive definite (p'Ap = " +
                           std::to_string(pq) + ")");
    }
    const double alpha = rr / pq;
    axpy(alpha, p, x);
    axpy(-alpha, q, r);
    const double rr_next = squared_norm(r);
    if (!std::isfinite(rr_next)) {
      throw NumericalError("cg_solve: non-finite residual at iteration " + std::to_string(k + 1));
    }
    result.iterations = k + 1;
    const double res = std::sqrt(rr_next);
    if (res < best_res) {
      best_res = res;
      best = x;
    }
    if (res <= target) {
      result.converged = true;
      result.relative_residual = res / b_norm;
      return result;
    }
    const double beta = rr_next / rr;
    rr = rr_next;
    p = linear_combination(1.0, r, beta, p);
  }

  result.solution = std::move(best);
  result.relative_residual = best_res / b_norm;
  return result;
}

/// A^T (A A^T + eta I)^-1 z using only A and A^T (eta > 0 keeps the Gram SPD).
inline CgResult reg_pinv_cg(const LinearOperator& op, const ImageTensor& z, double eta, double tol,
                            int max_iters) {
  CgResult inner = cg_solve([&](const ImageTensor& r) { return apply_gram(op, r, eta); }, z, tol,
                            max_iters);
  inner.solution = apply_adjoint(op, inner.solution);
  return inner;
}

}  // namespace pgr
