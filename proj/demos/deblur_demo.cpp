// Deblurs a synthetic image with IDPG and its two ablations and prints PSNR.
//
//   deblur_demo [size] [sigma_e] [seed]

#include <cstdio>
#include <cstdlib>

#include "pgr/denoisers.hpp"
#include "pgr/guidance.hpp"
#include "pgr/kernel.hpp"
#include "pgr/linops.hpp"
#include "pgr/metrics.hpp"
#include "pgr/schemes.hpp"

int main(int argc, char** argv) {
  using namespace pgr;
  const std::size_t size = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 64;
  const double sigma_e = argc > 2 ? std::atof(argv[2]) : 0.05;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 1;

  const Shape shape{1, size, size};
  const WienerPrior prior = WienerPrior::power_law(size, size, 4.0).with_constant_mean(0.5);
  RandomStream rng = RandomStream(seed).split("image");
  const ImageTensor x = prior.sample(1, rng);

  const LinearOperator blur = CircularConvolution(gaussian_kernel(5, 10.0), shape);
  const ImageTensor y = degrade(blur, x, NoiseSpec{sigma_e, seed});
  std::printf("observed   %8.3f dB\n", psnr(clamped(y), x));

  SchemeConfig cfg;
  cfg.sigma_e = sigma_e;
  cfg.guidance.eta = eta_from_noise(sigma_e, 0.7);
  cfg.guidance.c = default_ls_scale(blur);
  const Denoiser denoiser = Denoiser::wiener(prior);
  for (Method m : {Method::Idpg, Method::Idbp, Method::PgmLs, Method::Ddpg}) {
    cfg.method = m;
    const RunTrace trace = run_scheme(denoiser, blur, y, cfg);
    std::printf("%-10s %8.3f dB  final residual %.4g\n", to_string(m), psnr(clamped(trace.estimate), x),
                trace.records.back().residual);
  }
  return 0;
}
