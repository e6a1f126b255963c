#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pgr/error.hpp"
#include "pgr/random.hpp"

namespace pgr::theory {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class FidelityMode { LS, BP, WLS };

inline const char* to_string(FidelityMode m) {
  switch (m) {
    case FidelityMode::LS: return "LS";
    case FidelityMode::BP: return "BP";
    case FidelityMode::WLS: return "WLS";
  }
  return "?";
}

/// Estimation of x* from y = A x* + e, e ~ N(0, sigma_e^2 I), by minimizing
///   1/2 ||W^{1/2}(A x - y)||^2 + beta/2 ||D x||^2
/// for the chosen data weight W.
struct TikhonovProblem {
  MatrixXd A;
  MatrixXd D;
  double beta = 1.0;  // prior weight, unrelated to the diffusion betas
  double sigma_e = 0.0;
  VectorXd x_star;
  double delta = 0.5;
  double eta = 0.0;
  double c = 1.0;

  Eigen::Index m() const { return A.rows(); }
  Eigen::Index n() const { return A.cols(); }

  void validate() const {
    if (A.rows() == 0 || A.rows() > A.cols()) throw ValidationError("need 0 < m <= n");
    if (D.cols() != A.cols()) throw DimensionError("D must have n columns");
    if (x_star.size() != A.cols()) throw DimensionError("x_star must have n entries");
    if (!(beta > 0.0)) throw ValidationError("prior weight beta must be positive");
    if (!(sigma_e >= 0.0)) throw ValidationError("sigma_e must be >= 0");
    if (!(delta >= 0.0 && delta <= 1.0)) throw ValidationError("delta must lie in [0, 1]");
    if (!(eta >= 0.0)) throw ValidationError("eta must be >= 0");
    if (!(c > 0.0)) throw ValidationError("c must be positive");
  }
};

/// W for the chosen data term: I, (A A^T + eta I)^-1, or their (1 - delta, delta c) mix.
inline MatrixXd data_weight(const TikhonovProblem& p, FidelityMode mode) {
  const Eigen::Index m = p.m();
  const MatrixXd I = MatrixXd::Identity(m, m);
  if (mode == FidelityMode::LS) return I;
  const MatrixXd gram = p.A * p.A.transpose() + p.eta * I;
  Eigen::LDLT<MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
    throw ValidationError("A A^T + eta I is singular");
  }
  const MatrixXd inv = ldlt.solve(I);
  if (mode == FidelityMode::BP) return inv;
  return (1.0 - p.delta) * inv + p.delta * p.c * I;
}

/// Linear map y -> x_hat = (A^T W A + beta D^T D)^-1 A^T W y.
class TikhonovEstimator {
 public:
  TikhonovEstimator(const TikhonovProblem& p, FidelityMode mode) {
    p.validate();
    const MatrixXd W = data_weight(p, mode);
    const MatrixXd H = p.A.transpose() * W * p.A + p.beta * p.D.transpose() * p.D;
    Eigen::LLT<MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) throw ValidationError("Tikhonov normal matrix is singular");
    map_ = llt.solve(p.A.transpose() * W);
  }

  VectorXd operator()(const VectorXd& y) const {
    if (y.size() != map_.cols()) throw DimensionError("y must have m entries");
    return map_ * y;
  }

  const MatrixXd& map() const { return map_; }

 private:
  MatrixXd map_;
};

inline VectorXd tikhonov_estimate(const TikhonovProblem& p, FidelityMode mode, const VectorXd& y) {
  return TikhonovEstimator(p, mode)(y);
}

/// ||A^T W (A x - y) + beta D^T D x||, zero at the exact minimizer.
inline double stationarity_residual(const TikhonovProblem& p, FidelityMode mode, const VectorXd& x,
                                    const VectorXd& y) {
  const MatrixXd W = data_weight(p, mode);
  return (p.A.transpose() * W * (p.A * x - y) + p.beta * p.D.transpose() * (p.D * x)).norm();
}

struct BiasVariance {
  double bias2 = 0.0;
  double variance = 0.0;
  double mse() const { return bias2 + variance; }
};

/// Spectral quantities shared by the closed-form formulas.
struct SharedBasis {
  VectorXd lambda;        // singular values of A (m, decreasing)
  VectorXd gamma2;        // eigenvalues of D^T D along the first m right singular vectors
  VectorXd coeffs;        // V^T x*
  double null_energy = 0.0;  // sum_{i > m} [V^T x*]_i^2
};

inline SharedBasis shared_basis(const TikhonovProblem& p) {
  p.validate();
  const MatrixXd AtA = p.A.transpose() * p.A;
  const MatrixXd DtD = p.D.transpose() * p.D;
  const double scale = std::max(1.0, AtA.norm() * DtD.norm());
  if ((AtA * DtD - DtD * AtA).norm() > 1e-8 * scale) {
    throw ValidationError("eigenbasis mismatch: A^T A and D^T D do not commute");
  }
  Eigen::JacobiSVD<MatrixXd> svd(p.A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  MatrixXd V = svd.matrixV();
  const Eigen::Index m = p.m();
  SharedBasis b;
  b.lambda = svd.singularValues();
  // Within a repeated singular value the SVD basis is arbitrary; rotate it so
  // that D^T D is diagonal there too.
  const double tie = 1e-10 * std::max(1.0, b.lambda[0]);
  for (Eigen::Index start = 0; start < m;) {
    Eigen::Index end = start + 1;
    while (end < m && b.lambda[start] - b.lambda[end] <= tie) ++end;
    if (end - start > 1) {
      const MatrixXd block = V.middleCols(start, end - start);
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(block.transpose() * DtD * block);
      V.middleCols(start, end - start) = block * eig.eigenvectors();
    }
    start = end;
  }
  const MatrixXd Vr = V.leftCols(m);
  const MatrixXd G = Vr.transpose() * DtD * Vr;
  b.gamma2 = G.diagonal();
  const MatrixXd off = G - MatrixXd(G.diagonal().asDiagonal());
  if (off.norm() > 1e-8 * std::max(1.0, DtD.norm())) {
    throw ValidationError("eigenbasis mismatch: D^T D is not diagonal in the right singular basis of A");
  }
  b.coeffs = V.transpose() * p.x_star;
  b.null_energy = b.coeffs.tail(p.n() - m).squaredNorm();
  return b;
}

/// Eigenvalue s_i of W along the i-th left singular vector of A.
inline double weight_eigenvalue(const TikhonovProblem& p, FidelityMode mode, double lambda) {
  const double l2 = lambda * lambda;
  switch (mode) {
    case FidelityMode::LS: return 1.0;
    case FidelityMode::BP: return 1.0 / (l2 + p.eta);
    case FidelityMode::WLS: return (1.0 - p.delta) / (l2 + p.eta) + p.delta * p.c;
  }
  return 1.0;
}

/// Spectral-sum bias^2 and variance, including the null-space bias term.
///   bias^2 = sum_{i<=m} (beta g_i^2 / (l_i^2 s_i + beta g_i^2))^2 [V^T x*]_i^2 + sum_{i>m} [V^T x*]_i^2
///   var    = sigma_e^2 sum_{i<=m} l_i^2 s_i^2 / (l_i^2 s_i + beta g_i^2)^2
inline BiasVariance bias_variance_closed_form(const TikhonovProblem& p, FidelityMode mode) {
  const SharedBasis b = shared_basis(p);
  BiasVariance out;
  out.bias2 = b.null_energy;
  for (Eigen::Index i = 0; i < p.m(); ++i) {
    const double l2 = b.lambda[i] * b.lambda[i];
    const double s = weight_eigenvalue(p, mode, b.lambda[i]);
    const double prior = p.beta * b.gamma2[i];
    const double denom = l2 * s + prior;
    const double shrink = prior / denom;
    out.bias2 += shrink * shrink * b.coeffs[i] * b.coeffs[i];
    out.variance += p.sigma_e * p.sigma_e * l2 * s * s / (denom * denom);
  }
  return out;
}

struct MonteCarloEstimate {
  double bias2 = 0.0;
  double variance = 0.0;
  double mse = 0.0;
  double se_bias2 = 0.0;
  double se_variance = 0.0;
  double se_mse = 0.0;
  int draws = 0;
};

/// Sample bias^2 / variance / MSE of the estimator over `draws` noise draws.
/// bias2 is corrected by variance / draws so that it is unbiased for b^2.
inline MonteCarloEstimate monte_carlo_bias_variance(const TikhonovProblem& p, FidelityMode mode, int draws,
                                                    RandomStream& rng) {
  if (draws < 2) throw ValidationError("need at least 2 draws");
  const TikhonovEstimator est(p, mode);
  const Eigen::Index n = p.n();
  const Eigen::Index m = p.m();
  const VectorXd clean = p.A * p.x_star;
  MatrixXd X(n, draws);
  VectorXd e(m);
  for (int k = 0; k < draws; ++k) {
    for (Eigen::Index i = 0; i < m; ++i) e[i] = p.sigma_e * rng.normal();
    X.col(k) = est(clean + e);
  }
  const double N = draws;
  const VectorXd mean = X.rowwise().mean();
  const MatrixXd dev = X.colwise() - mean;
  const Eigen::ArrayXd spread = dev.colwise().squaredNorm().transpose().array();
  const Eigen::ArrayXd err = (X.colwise() - p.x_star).colwise().squaredNorm().transpose().array();

  auto sample_sd = [N](const Eigen::ArrayXd& a) {
    const double mu = a.mean();
    return std::sqrt((a - mu).square().sum() / (N - 1.0));
  };

  MonteCarloEstimate r;
  r.draws = draws;
  r.variance = spread.sum() / (N - 1.0);
  r.se_variance = sample_sd(spread) / std::sqrt(N);
  r.mse = err.mean();
  r.se_mse = sample_sd(err) / std::sqrt(N);

  const VectorXd bias_vec = mean - p.x_star;
  const MatrixXd cov = dev * dev.transpose() / (N - 1.0);
  r.bias2 = bias_vec.squaredNorm() - r.variance / N;
  // Delta method for ||mean - x*||^2 plus the second-order term.
  r.se_bias2 = std::sqrt(4.0 * bias_vec.dot(cov * bias_vec) / N + 2.0 * (cov * cov).trace() / (N * N));
  return r;
}

struct Theorem1Report {
  BiasVariance ls;
  BiasVariance bp;
  BiasVariance wls;
  bool bias_ordering = false;      // b_BP < b_WLS < b_LS
  bool variance_ordering = false;  // v_LS < v_WLS < v_BP
  bool passed() const { return bias_ordering && variance_ordering; }
};

/// Checks the assumptions of the bias/variance ordering and evaluates it.
inline Theorem1Report verify_theorem1(const TikhonovProblem& p) {
  p.validate();
  if (!(p.delta > 0.0 && p.delta < 1.0)) throw ValidationError("delta must lie in the open interval (0, 1)");
  if (p.eta != 0.0 || p.c != 1.0) throw ValidationError("assumption (c) violated: need eta = 0 and c = 1");
  const MatrixXd DtD = p.D.transpose() * p.D;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(DtD);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw ValidationError("assumption (a) violated: D^T D is not positive definite");
  }
  const MatrixXd AtA = p.A.transpose() * p.A;
  if ((AtA * DtD - DtD * AtA).norm() > 1e-8 * std::max(1.0, AtA.norm() * DtD.norm())) {
    throw ValidationError("assumption (a) violated: A^T A and D^T D do not share an eigenbasis");
  }
  Eigen::JacobiSVD<MatrixXd> svd(p.A);
  const VectorXd lambda = svd.singularValues();
  if (lambda.minCoeff() <= 0.0 || lambda.maxCoeff() > 1.0 + 1e-12) {
    throw ValidationError("assumption (b) violated: singular values of A must lie in (0, 1]");
  }
  if (lambda.maxCoeff() - lambda.minCoeff() <= 1e-12) {
    throw ValidationError("assumption (b) violated: singular values of A are all equal");
  }
  Theorem1Report r;
  r.ls = bias_variance_closed_form(p, FidelityMode::LS);
  r.bp = bias_variance_closed_form(p, FidelityMode::BP);
  r.wls = bias_variance_closed_form(p, FidelityMode::WLS);
  r.bias_ordering = r.bp.bias2 < r.wls.bias2 && r.wls.bias2 < r.ls.bias2;
  r.variance_ordering = r.ls.variance < r.wls.variance && r.wls.variance < r.bp.variance;
  return r;
}

struct ConditionNumbers {
  double bp = 1.0;
  double wls = 1.0;
  double ls = 1.0;
  bool ordering_holds() const { return bp < wls && wls < ls; }
};

/// Condition numbers of the LS/BP/WLS Hessians restricted to the row range of A (eta = 0).
inline ConditionNumbers condition_numbers(std::span<const double> lambda, double delta, double c) {
  if (lambda.size() < 2) throw ValidationError("need at least two singular values");
  if (!(delta >= 0.0 && delta <= 1.0)) throw ValidationError("delta must lie in [0, 1]");
  if (!(c > 0.0)) throw ValidationError("c must be positive");
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (!(lambda[i] > 0.0)) throw ValidationError("singular values must be positive");
    if (i > 0 && lambda[i] > lambda[i - 1]) throw ValidationError("singular values must be sorted decreasing");
  }
  const double l1 = lambda.front() * lambda.front();
  const double lm = lambda.back() * lambda.back();
  if (l1 == lm) throw ValidationError("degenerate singular values: all equal");
  ConditionNumbers k;
  k.bp = 1.0;
  k.ls = l1 / lm;
  k.wls = ((1.0 - delta) + delta * c * l1) / ((1.0 - delta) + delta * c * lm);
  return k;
}

struct Claim2Result {
  MatrixXd P;
  double residual = 0.0;           // ||A^T W A - P^{1/2} A^T A P^{1/2}||_F
  double relative_residual = 0.0;  // residual / ||A^T W A||_F
};

inline MatrixXd symmetric_sqrt(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

/// Builds P = V diag(Gamma, 1, ..., 1) V^T from the SVD A = U Lambda V^T and
/// W = U Gamma U^T, and measures how well P^{1/2} A^T A P^{1/2} reproduces A^T W A.
inline Claim2Result verify_claim2(const MatrixXd& A, const MatrixXd& W) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (m == 0 || m > n) throw ValidationError("need 0 < m <= n");
  if (W.rows() != m || W.cols() != m) throw DimensionError("W must be m x m");
  if ((W - W.transpose()).norm() > 1e-12 * std::max(1.0, W.norm())) {
    throw ValidationError("W must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> weig(W);
  if (weig.eigenvalues().minCoeff() <= 0.0) throw ValidationError("W must be positive definite");
  const MatrixXd AAt = A * A.transpose();
  if ((W * AAt - AAt * W).norm() > 1e-8 * std::max(1.0, W.norm() * AAt.norm())) {
    throw ValidationError("W does not commute with A A^T (commutation failure beyond 1e-8)");
  }

  Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const MatrixXd& U = svd.matrixU();
  const MatrixXd& V = svd.matrixV();
  // Gamma = U^T W U. Diagonal when the singular values are distinct; within a
  // repeated singular value it may be a full block, which commutes with Lambda.
  const MatrixXd gamma = U.transpose() * W * U;
  MatrixXd gamma_ext = MatrixXd::Identity(n, n);
  gamma_ext.topLeftCorner(m, m) = 0.5 * (gamma + gamma.transpose());

  Claim2Result r;
  r.P = V * gamma_ext * V.transpose();
  const MatrixXd P_half = V * symmetric_sqrt(gamma_ext) * V.transpose();
  const MatrixXd lhs = A.transpose() * W * A;
  const MatrixXd rhs = P_half * A.transpose() * A * P_half;
  r.residual = (lhs - rhs).norm();
  r.relative_residual = r.residual / std::max(lhs.norm(), 1e-300);
  return r;
}

struct Claim1Result {
  double weighted_gradient = 0.0;  // ||A^T W (A x - y)||
  double plain_gradient = 0.0;     // ||A^T (A x - y)||
};

inline Claim1Result claim1_gradients(const MatrixXd& A, const MatrixXd& W, const VectorXd& x, const VectorXd& y) {
  const VectorXd r = A * x - y;
  return {(A.transpose() * (W * r)).norm(), (A.transpose() * r).norm()};
}

/// Haar-ish random orthogonal matrix via QR of a Gaussian matrix.
inline MatrixXd random_orthogonal(Eigen::Index n, RandomStream& rng) {
  MatrixXd G(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) G(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(G);
  MatrixXd Q = qr.householderQ();
  // Fix column signs so the distribution does not depend on the QR convention.
  const MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  return Q;
}

/// A = U [diag(lambda) 0] V^T with the given singular values (size m <= n).
inline MatrixXd matrix_with_singular_values(const VectorXd& lambda, Eigen::Index n, RandomStream& rng,
                                            MatrixXd* right_basis = nullptr) {
  const Eigen::Index m = lambda.size();
  const MatrixXd U = random_orthogonal(m, rng);
  const MatrixXd V = random_orthogonal(n, rng);
  MatrixXd L = MatrixXd::Zero(m, n);
  for (Eigen::Index i = 0; i < m; ++i) L(i, i) = lambda[i];
  if (right_basis) *right_basis = V;
  return U * L * V.transpose();
}

struct ConformingOptions {
  double lambda_min = 0.1;
  double lambda_max = 1.0;
  double gamma_min = 0.5;
  double gamma_max = 2.0;
  double beta_min = 0.05;
  double beta_max = 1.0;
  double sigma_e = 0.1;
};

/// Random instance satisfying the bias/variance ordering assumptions:
/// singular values uniform in [0.1, 1] (sorted, at least two distinct),
/// D = V diag(uniform[0.5, 2]) V^T in the right singular basis of A,
/// eta = 0, c = 1, x* standard normal.
inline TikhonovProblem make_conforming_problem(Eigen::Index m, Eigen::Index n, double delta, RandomStream& rng,
                                               const ConformingOptions& opt = {}) {
  if (m < 2 || m > n) throw ValidationError("need 2 <= m <= n");
  VectorXd lambda(m);
  do {
    for (Eigen::Index i = 0; i < m; ++i) lambda[i] = rng.uniform(opt.lambda_min, opt.lambda_max);
  } while (lambda.maxCoeff() - lambda.minCoeff() <= 1e-6);
  std::sort(lambda.data(), lambda.data() + m, std::greater<>());

  TikhonovProblem p;
  MatrixXd V;
  p.A = matrix_with_singular_values(lambda, n, rng, &V);
  VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) g[i] = rng.uniform(opt.gamma_min, opt.gamma_max);
  p.D = V * g.asDiagonal() * V.transpose();
  p.beta = rng.uniform(opt.beta_min, opt.beta_max);
  p.sigma_e = opt.sigma_e;
  p.x_star = VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) p.x_star[i] = rng.normal();
  p.delta = delta;
  p.eta = 0.0;
  p.c = 1.0;
  return p;
}

}  // namespace pgr::theory
