#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pgr/app.hpp"

namespace {

using pgr::app::ConfigMap;

struct FlagSpec {
  const char* key;
  const char* help;
};

void add_flags(CLI::App* cmd, ConfigMap& flags, std::initializer_list<FlagSpec> specs) {
  for (const FlagSpec& s : specs) {
    const std::string key = s.key;
    cmd->add_option_function<std::string>(
        "--" + key, [&flags, key](const std::string& v) { flags[key] = v; }, s.help);
  }
}

constexpr FlagSpec kOperatorFlags[] = {
    {"task", "deblur | sr | inpaint"},
    {"kernel", "blur kernel file (\"H W\" header, then taps)"},
    {"scale", "super-resolution factor"},
    {"mask", "inpainting mask file (0/1 grid)"},
};

constexpr FlagSpec kDenoiserFlags[] = {
    {"denoiser", "identity | gaussian | wiener | external"},
    {"denoiser-cmd", "external denoiser command, run as <cmd> <in.pgt> <out.pgt> <sigma>"},
    {"kappa", "gaussian denoiser bandwidth per unit sigma"},
    {"prior-amplitude", "wiener prior amplitude A in A / (1 + |f|^2)"},
    {"prior-mean", "wiener prior constant mean"},
};

void add_flag_array(CLI::App* cmd, ConfigMap& flags, const FlagSpec* begin, const FlagSpec* end) {
  for (const FlagSpec* s = begin; s != end; ++s) add_flags(cmd, flags, {*s});
}

int run(int argc, char** argv) {
  CLI::App app{"Preconditioned-guidance restoration for linear inverse problems"};
  app.require_subcommand(1);

  ConfigMap degrade_flags;
  CLI::App* degrade = app.add_subcommand("degrade", "synthesize y = A x* + e from an image");
  add_flag_array(degrade, degrade_flags, std::begin(kOperatorFlags), std::end(kOperatorFlags));
  add_flags(degrade, degrade_flags,
            {{"input", "clean image (.pgm/.ppm or .pgt)"},
             {"output", "measurement tensor (.pgt)"},
             {"sigma-e", "observation noise std on the [0,1] scale"},
             {"seed", "noise seed"},
             {"config", "key=value config file"}});

  ConfigMap restore_flags;
  CLI::App* restore = app.add_subcommand("restore", "restore an image from a measurement and its sidecar");
  add_flag_array(restore, restore_flags, std::begin(kOperatorFlags), std::end(kOperatorFlags));
  add_flag_array(restore, restore_flags, std::begin(kDenoiserFlags), std::end(kDenoiserFlags));
  add_flags(restore, restore_flags,
            {{"measurement", "measurement tensor written by degrade"},
             {"output", "restored tensor (.pgt)"},
             {"image-out", "optional 8-bit .pgm/.ppm export (clamped)"},
             {"trace", "optional per-step trace file"},
             {"method", "idpg | idbp | pgm_ls | ddpg"},
             {"sigma-e", "noise level (default: from sidecar)"},
             {"gamma", "delta_t = alpha_bar_t^gamma"},
             {"zeta", "fresh-noise fraction (ddpg)"},
             {"eta-tilde", "eta = max(1e-4, (2 sigma_e)^2 eta_tilde)"},
             {"eta", "explicit eta, overrides eta-tilde"},
             {"c", "LS scale, or auto"},
             {"T", "number of steps"},
             {"train-steps", "respace a longer schedule to T steps (0: off)"},
             {"beta-start", "first beta"},
             {"beta-end", "last beta"},
             {"seed", "run seed (ddpg)"},
             {"step-size", "unit | ddim-ratio"},
             {"config", "key=value config file"}});

  std::vector<std::string> restored, reference;
  CLI::App* eval = app.add_subcommand("eval", "PSNR and MSE against references");
  eval->add_option("--restored", restored, "restored images or tensors")->required();
  eval->add_option("--reference", reference, "reference images or tensors, same order")->required();

  pgr::theory::VerifyOptions vopts;
  std::vector<std::string> checks;
  CLI::App* verify = app.add_subcommand("verify", "run the theory verifier battery");
  verify->add_option("--check", checks, "claim1 | claim2 | claim3 | claim4 | theorem1 (repeatable)");
  verify->add_option("--seed", vopts.seed, "base seed");
  verify->add_option("--draws", vopts.mc_draws, "Monte-Carlo draws per estimator");
  verify->add_flag("--inject-violation", vopts.inject_violation, "force equal singular values (test hook)");

  ConfigMap denoise_flags;
  std::string dn_in, dn_out;
  double dn_sigma = 0.0;
  CLI::App* denoise = app.add_subcommand("denoise", "apply a built-in denoiser to a tensor file");
  denoise->add_option("input", dn_in, "input .pgt")->required();
  denoise->add_option("output", dn_out, "output .pgt")->required();
  denoise->add_option("sigma", dn_sigma, "noise level")->required();
  add_flag_array(denoise, denoise_flags, std::begin(kDenoiserFlags), std::end(kDenoiserFlags));

  ConfigMap kernel_flags;
  CLI::App* make_kernel = app.add_subcommand("make-kernel", "write a standard kernel file");
  add_flags(make_kernel, kernel_flags,
            {{"type", "gaussian | bicubic | delta"},
             {"size", "gaussian side length (odd)"},
             {"std", "gaussian standard deviation"},
             {"scale", "bicubic downscaling factor"},
             {"output", "kernel file"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pgr::app::kValidationFailure;
  }

  if (*degrade) return pgr::app::cmd_degrade(degrade_flags, std::cout);
  if (*restore) return pgr::app::cmd_restore(restore_flags, std::cout);
  if (*eval) return pgr::app::cmd_eval(restored, reference, std::cout);
  if (*verify) {
    for (const auto& c : checks) vopts.selection.push_back(pgr::theory::parse_check(c));
    return pgr::app::cmd_verify(vopts, std::cout);
  }
  if (*denoise) return pgr::app::cmd_denoise(denoise_flags, dn_in, dn_out, dn_sigma, std::cout);
  return pgr::app::cmd_make_kernel(kernel_flags, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const pgr::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return pgr::app::kValidationFailure;
  } catch (const pgr::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return pgr::app::kValidationFailure;
  } catch (const pgr::SingularityError& e) {
    std::cerr << "singular operator: " << e.what() << "\n";
    return pgr::app::kValidationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pgr::app::kRuntimeFailure;
  }
}
