// Bias/variance of the Tikhonov estimator as the data weight moves from
// back-projection toward least squares, on one random instance.

#include <cstdio>

#include "pgr/theory.hpp"

int main() {
  using namespace pgr::theory;
  pgr::RandomStream rng(7);
  TikhonovProblem p = make_conforming_problem(6, 10, 0.5, rng);

  const BiasVariance ls = bias_variance_closed_form(p, FidelityMode::LS);
  const BiasVariance bp = bias_variance_closed_form(p, FidelityMode::BP);
  std::printf("%-8s %12s %12s %12s\n", "delta", "bias^2", "variance", "mse");
  std::printf("%-8s %12.6f %12.6f %12.6f\n", "BP", bp.bias2, bp.variance, bp.mse());
  for (double delta : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    p.delta = delta;
    const BiasVariance wls = bias_variance_closed_form(p, FidelityMode::WLS);
    std::printf("%-8.2f %12.6f %12.6f %12.6f\n", delta, wls.bias2, wls.variance, wls.mse());
  }
  std::printf("%-8s %12.6f %12.6f %12.6f\n", "LS", ls.bias2, ls.variance, ls.mse());

  pgr::RandomStream draws = rng.split("monte-carlo");
  p.delta = 0.5;
  const MonteCarloEstimate mc = monte_carlo_bias_variance(p, FidelityMode::WLS, 20000, draws);
  const BiasVariance wls = bias_variance_closed_form(p, FidelityMode::WLS);
  std::printf("\nWLS at delta 0.5, 20000 draws: bias^2 %.6f (+/- %.6f, exact %.6f), variance %.6f (+/- %.6f, exact %.6f)\n",
              mc.bias2, mc.se_bias2, wls.bias2, mc.variance, mc.se_variance, wls.variance);
  return 0;
}
