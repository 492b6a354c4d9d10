#pragma once

// Command layer behind the nvesr executable: run configuration, the five
// commands and the mapping from failures to exit codes.
//
// Configuration is a flat JSON object. Every key carries its unit in the
// name and every key is optional; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "nvesr/core.hpp"
#include "nvesr/deconv.hpp"
#include "nvesr/filters.hpp"
#include "nvesr/forward.hpp"
#include "nvesr/p1bath.hpp"

namespace nvesr::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitIo = 4,
};

/// Invalid configuration. `line` is 0 when the problem has no source line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& what);
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// The deconvolution stopped because its iterates kept growing. Partial
/// output has been written when this is thrown.
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

enum class CouplingSource { Fixed, MonteCarlo };

struct RunConfig {
  // constants
  double zero_field_splitting_mhz = 2870.0;
  double gamma_e_mhz_per_gauss = 2.80;
  double a_z_mhz = 114.0;
  double a_x_mhz = 81.3;
  double on_axis_fraction = 0.25;
  double t2_star_ns = 200.0;  ///< Gamma2 = 1 / T2*
  double gamma_p1_mhz = 1.0;  ///< Gamma_P1 / 2pi
  double density_ppm = 50.0;
  // bath couplings
  CouplingSource coupling_source = CouplingSource::Fixed;
  double b_perp_mhz = 1.0;  ///< sqrt(<B_perp^2>) / 2pi
  double b_par_mhz = 0.5;   ///< sqrt(<B_par^2>) / 2pi
  double r_min_nm = 0.154;
  std::uint64_t mc_samples = 200'000;
  // measurement
  double phonon_rate_hz = forward::kDefaultPhononRate;
  double noise_sigma = 0.005;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double sweep_min_gauss = 480.0;
  double sweep_max_gauss = 540.0;
  std::size_t sweep_points = 500;
  double time_min_s = 1e-5;
  double time_max_s = 2e-2;
  std::size_t time_points = 40;
  // fit
  forward::RMode r_mode = forward::RMode::Fixed;
  std::optional<double> baseline_min_gauss;
  std::optional<double> baseline_max_gauss;
  // deconvolution
  KernelShape kernel_shape = KernelShape::Lorentzian;
  int deconv_max_iter = 10;
  double deconv_tol = 1e-4;
  double taper_fraction = 0.05;
  deconv::PadMode pad_mode = deconv::PadMode::EdgeMean;
  double noise_floor = 1e-14;
  std::optional<double> noise_psd;  ///< flat |F(eta)|^2 override
  // theory spectrum grid
  double spectrum_min_mhz = -200.0;
  double spectrum_max_mhz = 200.0;
  std::size_t spectrum_points = 4001;
  // output
  std::filesystem::path output_dir = "out";

  [[nodiscard]] PhysicalConstants physical_constants() const;
  [[nodiscard]] p1::P1Constants p1_constants() const;
  /// Couplings from the fixed amplitudes or a Monte Carlo estimate.
  [[nodiscard]] p1::BathGeometry geometry() const;
  [[nodiscard]] double gamma2() const { return 1.0 / (t2_star_ns * 1e-9); }
  [[nodiscard]] FieldSweep sweep() const;
  [[nodiscard]] TimeGrid times() const;
  [[nodiscard]] forward::SynthesisOptions synthesis_options() const;
  [[nodiscard]] forward::FitOptions fit_options() const;
  [[nodiscard]] forward::BaselineOptions baseline_options() const;
  [[nodiscard]] deconv::DeconvolutionOptions deconvolution_options() const;

  /// Every key with its effective value, keys sorted.
  [[nodiscard]] std::string canonical_json() const;
  /// FNV-1a of canonical_json().
  [[nodiscard]] std::string hash() const;
};

/// Parses and validates a configuration. Errors name `source` and the line
/// of the offending key.
[[nodiscard]] RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

struct CommandContext {
  bool svg = false;
  std::ostream* out = nullptr;  ///< human-readable progress; may be null
};

/// theory_gamma1.csv, theory_spectrum.csv, theory.json; prints the peak table.
void cmd_theory(const RunConfig& config, const CommandContext& ctx);
/// record.csv + record.json.
void cmd_simulate(const RunConfig& config, const CommandContext& ctx);
/// rates.csv + rates.json from a record file.
void cmd_fit(const std::filesystem::path& record_file, const RunConfig& config, const CommandContext& ctx);
/// spectrum.csv, rates_offset.csv and deconv_diagnostics.json from a rates
/// file. Throws DivergenceError after writing when the iteration diverged.
void cmd_deconvolve(const std::filesystem::path& profile_file, const RunConfig& config, const CommandContext& ctx);
/// All of the above into one directory plus manifest.json.
void cmd_pipeline(const RunConfig& config, const CommandContext& ctx);

/// Runs `fn`, reports a failure on `err` and returns the matching exit code.
[[nodiscard]] int run_guarded(const std::function<void()>& fn, std::ostream& err);

/// Library and dependency versions recorded in manifests.
[[nodiscard]] std::string version_string();

}  // namespace nvesr::cli
