#include "nvesr/cli.hpp"

#include <boost/version.hpp>
#include <fftw3.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <vector>

#include "nvesr/io.hpp"
#include "nvesr/peaks.hpp"

#ifndef NVESR_VERSION
#define NVESR_VERSION "0.0.0"
#endif

namespace nvesr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

ConfigError::ConfigError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + what : source + ": " + what),
      line_(line) {}

namespace {

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

/// Line of the first `"key" :` in the text, 0 if absent.
std::size_t line_of_key(const std::string& text, const std::string& key) {
  const std::string quoted = "\"" + key + "\"";
  for (std::size_t pos = text.find(quoted); pos != std::string::npos; pos = text.find(quoted, pos + 1)) {
    std::size_t after = pos + quoted.size();
    while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
    if (after < text.size() && text[after] == ':') return line_of_offset(text, pos);
  }
  return 0;
}

using Fail = std::function<void(const std::string&)>;

double number(const json& v, const Fail& fail) {
  if (!v.is_number()) fail("expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail("expected a finite number");
  return x;
}

double positive(const json& v, const Fail& fail) {
  const double x = number(v, fail);
  if (!(x > 0)) fail("must be > 0");
  return x;
}

double non_negative(const json& v, const Fail& fail) {
  const double x = number(v, fail);
  if (!(x >= 0)) fail("must be >= 0");
  return x;
}

std::uint64_t count(const json& v, const Fail& fail, std::uint64_t min) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) fail("expected an integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0) fail("must be >= " + std::to_string(min));
  const auto x = v.get<std::uint64_t>();
  if (x < min) fail("must be >= " + std::to_string(min));
  return x;
}

std::string string(const json& v, const Fail& fail) {
  if (!v.is_string()) fail("expected a string");
  return v.get<std::string>();
}

std::optional<double> optional_number(const json& v, const Fail& fail) {
  if (v.is_null()) return std::nullopt;
  return number(v, fail);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct Key {
  const char* name;
  std::function<void(RunConfig&, const json&, const Fail&)> set;
  std::function<json(const RunConfig&)> get;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"zero_field_splitting_mhz", [](RunConfig& c, const json& v, const Fail& f) { c.zero_field_splitting_mhz = positive(v, f); },
       [](const RunConfig& c) { return json(c.zero_field_splitting_mhz); }},
      {"gamma_e_mhz_per_gauss", [](RunConfig& c, const json& v, const Fail& f) { c.gamma_e_mhz_per_gauss = positive(v, f); },
       [](const RunConfig& c) { return json(c.gamma_e_mhz_per_gauss); }},
      {"a_z_mhz", [](RunConfig& c, const json& v, const Fail& f) { c.a_z_mhz = positive(v, f); },
       [](const RunConfig& c) { return json(c.a_z_mhz); }},
      {"a_x_mhz", [](RunConfig& c, const json& v, const Fail& f) { c.a_x_mhz = positive(v, f); },
       [](const RunConfig& c) { return json(c.a_x_mhz); }},
      {"on_axis_fraction",
       [](RunConfig& c, const json& v, const Fail& f) {
         c.on_axis_fraction = number(v, f);
         if (!(c.on_axis_fraction >= 0 && c.on_axis_fraction <= 1)) f("must lie in [0, 1]");
       },
       [](const RunConfig& c) { return json(c.on_axis_fraction); }},
      {"t2_star_ns", [](RunConfig& c, const json& v, const Fail& f) { c.t2_star_ns = positive(v, f); },
       [](const RunConfig& c) { return json(c.t2_star_ns); }},
      {"gamma_p1_mhz", [](RunConfig& c, const json& v, const Fail& f) { c.gamma_p1_mhz = positive(v, f); },
       [](const RunConfig& c) { return json(c.gamma_p1_mhz); }},
      {"density_ppm", [](RunConfig& c, const json& v, const Fail& f) { c.density_ppm = positive(v, f); },
       [](const RunConfig& c) { return json(c.density_ppm); }},
      {"coupling_source",
       [](RunConfig& c, const json& v, const Fail& f) {
         const auto s = string(v, f);
         if (s == "fixed") c.coupling_source = CouplingSource::Fixed;
         else if (s == "monte_carlo") c.coupling_source = CouplingSource::MonteCarlo;
         else f("expected \"fixed\" or \"monte_carlo\"");
       },
       [](const RunConfig& c) { return json(c.coupling_source == CouplingSource::Fixed ? "fixed" : "monte_carlo"); }},
      {"b_perp_mhz", [](RunConfig& c, const json& v, const Fail& f) { c.b_perp_mhz = non_negative(v, f); },
       [](const RunConfig& c) { return json(c.b_perp_mhz); }},
      {"b_par_mhz", [](RunConfig& c, const json& v, const Fail& f) { c.b_par_mhz = non_negative(v, f); },
       [](const RunConfig& c) { return json(c.b_par_mhz); }},
      {"r_min_nm", [](RunConfig& c, const json& v, const Fail& f) { c.r_min_nm = positive(v, f); },
       [](const RunConfig& c) { return json(c.r_min_nm); }},
      {"mc_samples", [](RunConfig& c, const json& v, const Fail& f) { c.mc_samples = count(v, f, 100); },
       [](const RunConfig& c) { return json(c.mc_samples); }},
      {"phonon_rate_hz", [](RunConfig& c, const json& v, const Fail& f) { c.phonon_rate_hz = non_negative(v, f); },
       [](const RunConfig& c) { return json(c.phonon_rate_hz); }},
      {"noise_sigma", [](RunConfig& c, const json& v, const Fail& f) { c.noise_sigma = non_negative(v, f); },
       [](const RunConfig& c) { return json(c.noise_sigma); }},
      {"seed", [](RunConfig& c, const json& v, const Fail& f) { c.seed = count(v, f, 0); },
       [](const RunConfig& c) { return json(c.seed); }},
      {"workers",
       [](RunConfig& c, const json& v, const Fail& f) {
         const auto w = count(v, f, 1);
         if (w > 256) f("must be <= 256");
         c.workers = static_cast<unsigned>(w);
       },
       [](const RunConfig& c) { return json(c.workers); }},
      {"sweep_min_gauss",
       [](RunConfig& c, const json& v, const Fail& f) {
         c.sweep_min_gauss = number(v, f);
         if (c.sweep_min_gauss < p1::kMinHighFieldGauss) f("must be >= 100 G (high-field regime)");
       },
       [](const RunConfig& c) { return json(c.sweep_min_gauss); }},
      {"sweep_max_gauss", [](RunConfig& c, const json& v, const Fail& f) { c.sweep_max_gauss = positive(v, f); },
       [](const RunConfig& c) { return json(c.sweep_max_gauss); }},
      {"sweep_points", [](RunConfig& c, const json& v, const Fail& f) { c.sweep_points = count(v, f, 16); },
       [](const RunConfig& c) { return json(c.sweep_points); }},
      {"time_min_s", [](RunConfig& c, const json& v, const Fail& f) { c.time_min_s = positive(v, f); },
       [](const RunConfig& c) { return json(c.time_min_s); }},
      {"time_max_s", [](RunConfig& c, const json& v, const Fail& f) { c.time_max_s = positive(v, f); },
       [](const RunConfig& c) { return json(c.time_max_s); }},
      {"time_points", [](RunConfig& c, const json& v, const Fail& f) { c.time_points = count(v, f, 3); },
       [](const RunConfig& c) { return json(c.time_points); }},
      {"r_mode",
       [](RunConfig& c, const json& v, const Fail& f) {
         const auto s = string(v, f);
         if (s == "fixed") c.r_mode = forward::RMode::Fixed;
         else if (s == "fitted") c.r_mode = forward::RMode::Fitted;
         else f("expected \"fixed\" or \"fitted\"");
       },
       [](const RunConfig& c) { return json(c.r_mode == forward::RMode::Fixed ? "fixed" : "fitted"); }},
      {"baseline_min_gauss", [](RunConfig& c, const json& v, const Fail& f) { c.baseline_min_gauss = optional_number(v, f); },
       [](const RunConfig& c) { return optional_json(c.baseline_min_gauss); }},
      {"baseline_max_gauss", [](RunConfig& c, const json& v, const Fail& f) { c.baseline_max_gauss = optional_number(v, f); },
       [](const RunConfig& c) { return optional_json(c.baseline_max_gauss); }},
      {"kernel_shape",
       [](RunConfig& c, const json& v, const Fail& f) {
         try {
           c.kernel_shape = parse_kernel_shape(string(v, f));
         } catch (const std::invalid_argument& e) {
           f(e.what());
         }
       },
       [](const RunConfig& c) { return json(to_string(c.kernel_shape)); }},
      {"deconv_max_iter",
       [](RunConfig& c, const json& v, const Fail& f) {
         const auto n = count(v, f, 1);
         if (n > 10000) f("must be <= 10000");
         c.deconv_max_iter = static_cast<int>(n);
       },
       [](const RunConfig& c) { return json(c.deconv_max_iter); }},
      {"deconv_tol", [](RunConfig& c, const json& v, const Fail& f) { c.deconv_tol = positive(v, f); },
       [](const RunConfig& c) { return json(c.deconv_tol); }},
      {"taper_fraction",
       [](RunConfig& c, const json& v, const Fail& f) {
         c.taper_fraction = number(v, f);
         if (!(c.taper_fraction >= 0 && c.taper_fraction <= 0.5)) f("must lie in [0, 0.5]");
       },
       [](const RunConfig& c) { return json(c.taper_fraction); }},
      {"pad_mode",
       [](RunConfig& c, const json& v, const Fail& f) {
         try {
           c.pad_mode = deconv::parse_pad_mode(string(v, f));
         } catch (const std::invalid_argument& e) {
           f(e.what());
         }
       },
       [](const RunConfig& c) { return json(deconv::to_string(c.pad_mode)); }},
      {"noise_floor", [](RunConfig& c, const json& v, const Fail& f) { c.noise_floor = non_negative(v, f); },
       [](const RunConfig& c) { return json(c.noise_floor); }},
      {"noise_psd",
       [](RunConfig& c, const json& v, const Fail& f) {
         c.noise_psd = optional_number(v, f);
         if (c.noise_psd && *c.noise_psd < 0) f("must be >= 0");
       },
       [](const RunConfig& c) { return optional_json(c.noise_psd); }},
      {"spectrum_min_mhz", [](RunConfig& c, const json& v, const Fail& f) { c.spectrum_min_mhz = number(v, f); },
       [](const RunConfig& c) { return json(c.spectrum_min_mhz); }},
      {"spectrum_max_mhz", [](RunConfig& c, const json& v, const Fail& f) { c.spectrum_max_mhz = number(v, f); },
       [](const RunConfig& c) { return json(c.spectrum_max_mhz); }},
      {"spectrum_points", [](RunConfig& c, const json& v, const Fail& f) { c.spectrum_points = count(v, f, 2); },
       [](const RunConfig& c) { return json(c.spectrum_points); }},
      {"output_dir",
       [](RunConfig& c, const json& v, const Fail& f) {
         c.output_dir = string(v, f);
         if (c.output_dir.empty()) f("must not be empty");
       },
       [](const RunConfig& c) { return json(c.output_dir.generic_string()); }},
  };
  return table;
}

}  // namespace

PhysicalConstants RunConfig::physical_constants() const {
  PhysicalConstants pc;
  pc.zero_field_splitting_hz = zero_field_splitting_mhz * 1e6;
  // Per-sublevel shift in Hz/G times 2pi, per tesla.
  pc.gamma_e = kTwoPi * gamma_e_mhz_per_gauss * 1e6 / kTeslaPerGauss;
  return pc;
}

p1::P1Constants RunConfig::p1_constants() const {
  p1::P1Constants c;
  c.a_z_hz = a_z_mhz * 1e6;
  c.a_x_hz = a_x_mhz * 1e6;
  c.on_axis_fraction = on_axis_fraction;
  c.gamma_p1 = mhz_to_angular(gamma_p1_mhz);
  return c;
}

p1::BathGeometry RunConfig::geometry() const {
  const auto pc = physical_constants();
  p1::BathGeometry g;
  g.density_n = p1::ppm_to_density(density_ppm, pc);
  if (coupling_source == CouplingSource::Fixed) {
    g.b_perp_sq = std::pow(mhz_to_angular(b_perp_mhz), 2);
    g.b_par_sq = std::pow(mhz_to_angular(b_par_mhz), 2);
  } else {
    p1::MonteCarloOptions mc;
    mc.samples = mc_samples;
    mc.seed = seed;
    mc.workers = workers;
    const auto m = p1::coupling_second_moments(density_ppm, r_min_nm * 1e-9, mc, pc);
    g.b_perp_sq = m.b_perp_sq;
    g.b_par_sq = m.b_par_sq;
  }
  return g;
}

FieldSweep RunConfig::sweep() const { return FieldSweep::uniform(sweep_min_gauss, sweep_max_gauss, sweep_points); }

TimeGrid RunConfig::times() const { return TimeGrid::logarithmic(time_min_s, time_max_s, time_points); }

forward::SynthesisOptions RunConfig::synthesis_options() const {
  forward::SynthesisOptions o;
  o.phonon_rate_r = phonon_rate_hz;
  o.noise_sigma = noise_sigma;
  o.seed = seed;
  o.workers = workers;
  return o;
}

forward::FitOptions RunConfig::fit_options() const {
  forward::FitOptions o;
  o.r_mode = r_mode;
  o.r = phonon_rate_hz;
  o.workers = workers;
  return o;
}

forward::BaselineOptions RunConfig::baseline_options() const {
  forward::BaselineOptions o;
  if (baseline_min_gauss && baseline_max_gauss) o.window_gauss = std::make_pair(*baseline_min_gauss, *baseline_max_gauss);
  return o;
}

deconv::DeconvolutionOptions RunConfig::deconvolution_options() const {
  deconv::DeconvolutionOptions o;
  o.max_iterations = deconv_max_iter;
  o.tolerance = deconv_tol;
  o.taper_fraction = taper_fraction;
  o.pad_mode = pad_mode;
  o.noise_floor = noise_floor;
  return o;
}

std::string RunConfig::canonical_json() const {
  json j = json::object();
  for (const auto& k : keys()) j[k.name] = k.get(*this);
  return j.dump(2);
}

std::string RunConfig::hash() const { return io::fnv1a_hex(canonical_json()); }

RunConfig parse_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t line = e.byte > 0 ? line_of_offset(text, e.byte - 1) : 1;
    throw ConfigError(source, line, std::string("syntax error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError(source, 1, "configuration must be a JSON object");

  RunConfig c;
  for (const auto& [name, value] : j.items()) {
    const std::size_t line = line_of_key(text, name);
    const auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& k) { return name == k.name; });
    if (it == keys().end()) throw ConfigError(source, line, "unknown key '" + name + "'");
    const Fail fail = [&](const std::string& msg) { throw ConfigError(source, line, "'" + name + "': " + msg); };
    it->set(c, value, fail);
  }

  auto check = [&](bool ok, const char* key, const std::string& msg) {
    if (!ok) throw ConfigError(source, line_of_key(text, key), "'" + std::string(key) + "': " + msg);
  };
  check(c.sweep_max_gauss > c.sweep_min_gauss, "sweep_max_gauss", "must exceed sweep_min_gauss");
  check(c.time_max_s > c.time_min_s, "time_max_s", "must exceed time_min_s");
  check(c.spectrum_max_mhz > c.spectrum_min_mhz, "spectrum_max_mhz", "must exceed spectrum_min_mhz");
  check(c.baseline_min_gauss.has_value() == c.baseline_max_gauss.has_value(),
        c.baseline_min_gauss ? "baseline_min_gauss" : "baseline_max_gauss",
        "baseline_min_gauss and baseline_max_gauss must be given together");
  if (c.baseline_min_gauss)
    check(*c.baseline_max_gauss > *c.baseline_min_gauss, "baseline_max_gauss", "must exceed baseline_min_gauss");
  try {
    c.physical_constants().validate();
    c.p1_constants().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source, 0, e.what());
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const io::IoError&) {
    throw ConfigError(path.string(), 0, "cannot read configuration file");
  }
  return parse_config(text, path.string());
}

namespace {

void say(const CommandContext& ctx, const std::string& line) {
  if (ctx.out) *ctx.out << line << '\n';
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<double> to_mhz(const std::vector<double>& omega) {
  std::vector<double> out(omega.size());
  std::transform(omega.begin(), omega.end(), out.begin(), angular_to_mhz);
  return out;
}

}  // namespace

void cmd_theory(const RunConfig& config, const CommandContext& ctx) {
  const auto pc = config.physical_constants();
  const auto c = config.p1_constants();
  const auto geo = config.geometry();
  const auto sweep = config.sweep();
  const auto gamma1 = p1::gamma1_profile(sweep, c, geo, config.gamma2(), pc);
  const fs::path dir = config.output_dir;

  io::CsvTable profile{{"field_G", "gamma1_hz"}, {}};
  for (std::size_t i = 0; i < sweep.size(); ++i) profile.rows.push_back({sweep[i], gamma1[i]});
  io::write_csv(dir / "theory_gamma1.csv", profile);

  const double b_center = electron_resonance_field(pc);
  const auto offsets = make_uniform_grid(mhz_to_angular(config.spectrum_min_mhz), mhz_to_angular(config.spectrum_max_mhz),
                                         config.spectrum_points);
  const auto spectrum = p1::offset_spectral_density(offsets, b_center, c, pc);
  io::write_spectrum(dir / "theory_spectrum.csv", spectrum);

  // Each comb line in Gamma1(B0) is a Lorentzian of half width Gamma2 + Gamma_P1
  // on the Omega0 axis, which moves at twice the sublevel Zeeman slope.
  const double width = config.gamma2() + mhz_to_angular(config.gamma_p1_mhz);
  const double fwhm_gauss = 2.0 * angular_to_hz(width) / (2.0 * pc.zeeman_per_gauss_hz());
  json peaks = json::array();
  say(ctx, "label                  field_G   offset_MHz   fwhm_G  kind");
  for (const auto& p : p1::predicted_gamma1_peaks(c, pc)) {
    peaks.push_back({{"label", p.label},
                     {"field_G", p.field_gauss},
                     {"offset_MHz", p.offset_hz * 1e-6},
                     {"fwhm_G", fwhm_gauss},
                     {"allowed", p.allowed}});
    std::string label = p.label;
    label.resize(20, ' ');
    say(ctx, label + "  " + fixed(p.field_gauss, 3) + "  " + fixed(p.offset_hz * 1e-6, 3) + "  " + fixed(fwhm_gauss, 4) +
                 "  " + (p.allowed ? "allowed" : "nuclear-assisted"));
  }

  const auto nn = p1::nearest_neighbor_distance_stats(config.density_ppm, pc);
  json j;
  j["peaks"] = peaks;
  j["central_field_G"] = b_center;
  j["nearest_neighbor_mean_nm"] = nn.mean() * 1e9;
  j["b_perp_sq_rad2_per_s2"] = geo.b_perp_sq;
  j["b_par_sq_rad2_per_s2"] = geo.b_par_sq;
  j["profile_maxima"] = find_local_maxima(gamma1, 0.0).size();
  io::write_text(dir / "theory.json", j.dump(2) + "\n");
  say(ctx, "mean nearest-neighbour distance: " + fixed(nn.mean() * 1e9, 3) + " nm");

  if (ctx.svg) {
    io::write_svg(dir / "theory_gamma1.svg", "Relaxation rate", "B0 (G)", "Gamma1 (1/s)",
                  {{"theory", sweep.values(), gamma1}});
    io::write_svg(dir / "theory_spectrum.svg", "Bath spectral density", "offset (MHz)", "S",
                  {{"theory", to_mhz(spectrum.omega()), spectrum.values()}});
  }
}

void cmd_simulate(const RunConfig& config, const CommandContext& ctx) {
  const auto pc = config.physical_constants();
  const auto record = forward::synthesize_record(config.sweep(), config.times(), config.p1_constants(), config.geometry(),
                                                 config.gamma2(), config.synthesis_options(), pc);
  const fs::path dir = config.output_dir;
  io::write_record(dir / "record.csv", record);
  say(ctx, "wrote " + std::to_string(record.sweep.size()) + " curves x " + std::to_string(record.times.size()) +
               " dark times to " + (dir / "record.csv").string());

  if (ctx.svg) {
    std::vector<io::SvgSeries> series;
    for (std::size_t j : {std::size_t{0}, record.times.size() / 3, 2 * record.times.size() / 3}) {
      io::SvgSeries s{"t = " + io::format_number(record.times[j]) + " s", record.sweep.values(), {}};
      for (const auto& curve : record.curves) s.y.push_back(curve.contrast[j]);
      series.push_back(std::move(s));
    }
    io::write_svg(dir / "record.svg", "Contrast across the sweep", "B0 (G)", "contrast", series);
  }
}

void cmd_fit(const fs::path& record_file, const RunConfig& config, const CommandContext& ctx) {
  const auto record = io::read_record(record_file);
  const auto profile = forward::extract_rates(record, config.fit_options());
  const fs::path dir = config.output_dir;
  io::write_rates(dir / "rates.csv", profile);
  say(ctx, "fitted " + std::to_string(profile.sweep.size()) + " field points, " + std::to_string(profile.failed_points()) +
               " did not converge");
  if (profile.r_mode == forward::RMode::Fitted)
    say(ctx, "R = " + io::format_number(profile.r_fitted) + " +- " + io::format_number(profile.r_stderr) + " 1/s");

  if (ctx.svg)
    io::write_svg(dir / "rates.svg", "Fitted relaxation rate", "B0 (G)", "Gamma1 (1/s)",
                  {{"fit", profile.sweep.values(), profile.gamma1}});
}

void cmd_deconvolve(const fs::path& profile_file, const RunConfig& config, const CommandContext& ctx) {
  const auto pc = config.physical_constants();
  const auto profile = io::read_rates(profile_file);
  const auto base = forward::subtract_detuned_baseline(profile, config.baseline_options());
  auto problem = deconv::to_omega0_domain(base, pc);
  const bool override_noise = config.noise_psd.has_value();
  if (override_noise) problem.noise_psd = deconv::NoisePsd::white(*config.noise_psd);
  problem.set_kernel(FilterKernel(config.kernel_shape, config.gamma2(), {0.0}, {}));
  const auto options = config.deconvolution_options();
  const auto result = deconv::deconvolve_iterative(problem, options);

  const fs::path dir = config.output_dir;
  io::write_spectrum(dir / "spectrum.csv", result.spectrum);
  io::CsvTable offset{{"frequency_MHz", "gamma1_hz"}, {}};
  for (std::size_t i = 0; i < problem.omega0.size(); ++i)
    offset.rows.push_back({angular_to_mhz(problem.omega0[i]), problem.signal[i]});
  io::write_csv(dir / "rates_offset.csv", offset);

  json d;
  d["iterations"] = result.iterations;
  d["relative_changes"] = result.changes;
  d["converged"] = result.converged;
  d["diverged"] = result.diverged;
  d["padded_length"] = result.padded_length;
  d["pad_mode"] = deconv::to_string(options.pad_mode);
  d["pad_value"] = result.pad_value;
  d["taper_fraction"] = options.taper_fraction;
  d["tolerance"] = options.tolerance;
  d["max_iterations"] = options.max_iterations;
  d["noise_psd"] = problem.noise_psd.level;
  d["noise_psd_source"] = override_noise ? "config" : "fit stderr";
  d["noise_floor"] = options.noise_floor;
  d["effective_noise_level"] = result.noise_level;
  d["kernel_shape"] = to_string(config.kernel_shape);
  d["t2_star_ns"] = config.t2_star_ns;
  d["baseline_offset_hz"] = base.baseline_offset;
  d["grid_spacing_mhz"] = angular_to_mhz(problem.spacing());
  io::write_text(dir / "deconv_diagnostics.json", d.dump(2) + "\n");
  say(ctx, "deconvolution: " + std::to_string(result.iterations) + " iterations, " +
               (result.converged ? "converged" : (result.diverged ? "diverged" : "stopped at max_iter")));

  if (ctx.svg) {
    io::write_svg(dir / "spectrum.svg", "Recovered spectral density", "offset (MHz)", "S",
                  {{"recovered", to_mhz(result.spectrum.omega()), result.spectrum.values()}});
    io::write_svg(dir / "rates_offset.svg", "Relaxation rate on the offset axis", "offset (MHz)", "Gamma1 (1/s)",
                  {{"measured", to_mhz(problem.omega0), problem.signal}});
  }
  if (result.diverged) throw DivergenceError("deconvolution diverged; partial result written");
}

void cmd_pipeline(const RunConfig& config, const CommandContext& ctx) {
  const fs::path dir = config.output_dir;
  cmd_theory(config, ctx);
  cmd_simulate(config, ctx);
  cmd_fit(dir / "record.csv", config, ctx);
  cmd_deconvolve(dir / "rates.csv", config, ctx);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  json m;
  m["version"] = version_string();
  m["config_hash"] = config.hash();
  m["config"] = json::parse(config.canonical_json());
  m["seeds"] = {{"noise", config.seed}, {"monte_carlo", config.coupling_source == CouplingSource::MonteCarlo ? json(config.seed) : json(nullptr)}};
  json f = json::object();
  for (const auto& p : files) f[p.filename().string()] = io::fnv1a_hex(io::read_text(p));
  m["files"] = f;
  io::write_text(dir / "manifest.json", m.dump(2) + "\n");
  say(ctx, "manifest: " + (dir / "manifest.json").string());
}

int run_guarded(const std::function<void()>& fn, std::ostream& err) {
  try {
    fn();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const io::IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "invalid parameters: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::domain_error& e) {
    err << "invalid parameters: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

std::string version_string() {
  return std::string("nvesr ") + NVESR_VERSION + "; " + fftw_version + "; boost " + BOOST_LIB_VERSION;
}

}  // namespace nvesr::cli
