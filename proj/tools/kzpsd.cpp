// kzpsd: experiment runner for the split-step oracle, perturbation signals,
// resonance enumeration and the GN/KZ PSD models.
//
//   kzpsd <subcommand> --config FILE [--out DIR]
//   kzpsd quartets --zeta POLY --box K [--out FILE]
//
// Every output file is a function of the config alone; KZPSD_THREADS changes
// the worker count but not a single byte.

#include "config.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <regex>

namespace fs = std::filesystem;
using namespace kzpsd;
using kzpsd::cli::Config;
using kzpsd::cli::ConfigError;
using kzpsd::cli::json;
using kzpsd::cli::UnitSystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// Library failure tagged with the module it came from.
class StageError : public std::runtime_error {
public:
  StageError(std::string module, const std::exception& e, bool numerical)
      : std::runtime_error(module + ": " + e.what()), numerical_(numerical) {}
  bool numerical() const noexcept { return numerical_; }

private:
  bool numerical_;
};

template <typename Fn>
auto stage(const char* module, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    throw StageError(module, e, true);
  } catch (const RealizationError& e) {
    throw StageError(module, e, true);
  } catch (const CostLimitExceeded& e) {
    throw StageError(module, e, false);
  } catch (const Error& e) {
    throw StageError(module, e, false);
  }
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------- config ---

struct Experiment {
  Config cfg;
  UnitSystem units;
  TimeGrid grid{1.0, 4};
  LinkConfig link = LinkConfig::dimensionless();
  StepConfig step;
  double distance = 0.0;
  std::size_t realizations = 0;
  std::uint64_t seed = 0;
  fs::path out_dir;
  std::string prefix;
};

TimeGrid read_grid(const Config& c) {
  c.check_keys("/grid", {"period", "samples"});
  const double period = c.quantity("/grid/period", "time");
  const auto samples = c.integer("/grid/samples");
  if (period <= 0.0) c.fail("/grid/period", "period must be positive");
  if (samples < 4 || (samples & (samples - 1)) != 0) c.fail("/grid/samples", "samples must be a power of two >= 4");
  return TimeGrid(period, static_cast<std::size_t>(samples));
}

LinkConfig read_link(const Config& c) {
  c.check_keys("/link", {"eps", "sign", "gamma", "alpha", "dispersion", "span_length", "spans", "gains"});
  const bool physical = c.system() == UnitSystem::Physical;
  double coeff = 0.0;
  DispersionSpec disp = DispersionSpec::quadratic();
  if (physical) {
    coeff = c.quantity("/link/gamma", "nonlinearity");
    const std::size_t n = c.array_size("/link/dispersion");
    if (n == 0) c.fail("/link/dispersion", "need at least one beta coefficient");
    if (n > 5) c.fail("/link/dispersion", "at most beta0..beta4 are supported");
    std::vector<double> beta;
    for (std::size_t i = 0; i < n; ++i)
      beta.push_back(c.quantity("/link/dispersion/" + std::to_string(i), "beta" + std::to_string(i)));
    disp = DispersionSpec::polynomial(beta);
    for (const char* k : {"eps", "sign"})
      if (c.has(std::string("/link/") + k)) c.fail(std::string("/link/") + k, "not used by physical links");
  } else {
    const double eps = c.number("/link/eps");
    const auto sign = c.has("/link/sign") ? c.integer("/link/sign") : 1;
    if (sign != 1 && sign != -1) c.fail("/link/sign", "sign must be +1 or -1");
    coeff = 2.0 * eps * static_cast<double>(sign);
    if (c.has("/link/gamma")) c.fail("/link/gamma", "dimensionless links take eps and sign");
    if (c.has("/link/dispersion")) c.fail("/link/dispersion", "dimensionless links use D(w) = w^2");
  }
  const double alpha = c.optional_quantity("/link/alpha", "attenuation").value_or(0.0);
  if (alpha < 0.0) c.fail("/link/alpha", "alpha must be >= 0");
  std::size_t spans = 1;
  double span_length = std::numeric_limits<double>::infinity();
  if (c.has("/link/spans")) {
    const auto s = c.integer("/link/spans");
    if (s < 1) c.fail("/link/spans", "spans must be >= 1");
    spans = static_cast<std::size_t>(s);
  }
  if (c.has("/link/span_length")) {
    span_length = c.quantity("/link/span_length", "length");
    if (span_length <= 0.0) c.fail("/link/span_length", "span length must be positive");
  } else if (spans > 1) {
    c.fail("/link", "multi-span links need span_length");
  }
  LinkConfig link(alpha, coeff, disp, span_length, spans);
  if (c.has("/link/gains")) {
    if (c.array_size("/link/gains") != spans) c.fail("/link/gains", "need one gain per span");
    std::vector<double> gains;
    for (std::size_t i = 0; i < spans; ++i) gains.push_back(c.number("/link/gains/" + std::to_string(i)));
    link = link.with_gains(gains);
  }
  return link;
}

Experiment read_experiment(const std::string& path, const std::string& out_override) {
  Experiment e{Config::load(path), UnitSystem::Dimensionless};
  const Config& c = e.cfg;
  c.check_keys("", {"version", "units", "grid", "link", "input", "distance", "realizations", "seed", "output",
                    "amplitudes", "modes", "z_samples", "cost_limit", "step", "models"});
  if (c.has("/version") && c.integer("/version") != 1) c.fail("/version", "unsupported config version");
  e.units = c.system();
  e.grid = read_grid(c);
  if (c.has("/link")) e.link = read_link(c);
  if (c.has("/distance")) {
    e.distance = c.quantity("/distance", "length");
    if (e.distance < 0.0) c.fail("/distance", "distance must be >= 0");
  }
  if (c.has("/realizations")) {
    const auto r = c.integer("/realizations");
    if (r < 0) c.fail("/realizations", "realizations must be >= 0");
    e.realizations = static_cast<std::size_t>(r);
  }
  if (c.has("/seed")) {
    const auto s = c.integer("/seed");
    if (s < 0) c.fail("/seed", "seed must be >= 0");
    e.seed = static_cast<std::uint64_t>(s);
  }
  if (c.has("/step")) {
    c.check_keys("/step", {"max_step", "max_nonlinear_phase"});
    if (c.has("/step/max_step")) e.step.max_step = c.quantity("/step/max_step", "length");
    if (c.has("/step/max_nonlinear_phase")) e.step.max_nonlinear_phase = c.number("/step/max_nonlinear_phase");
    if (!(e.step.max_step > 0.0)) c.fail("/step/max_step", "step must be positive");
    if (!(e.step.max_nonlinear_phase > 0.0)) c.fail("/step/max_nonlinear_phase", "phase bound must be positive");
  }
  std::string dir = ".";
  e.prefix = "kzpsd";
  if (c.has("/output")) {
    c.check_keys("/output", {"directory", "prefix"});
    if (c.has("/output/directory")) dir = c.text("/output/directory");
    if (c.has("/output/prefix")) e.prefix = c.text("/output/prefix");
  }
  if (!out_override.empty()) dir = out_override;
  e.out_dir = dir;
  return e;
}

double require_distance(const Experiment& e) {
  if (!e.cfg.has("/distance")) e.cfg.fail("", "missing required key 'distance'");
  return e.distance;
}

// ----------------------------------------------------------------- input ---

enum class InputKind { Pulse, GaussianProcess, Wdm };

InputKind input_kind(const Config& c) {
  const std::string k = c.choice("/input/kind", {"pulse", "gaussian_process", "wdm"});
  if (k == "pulse") return InputKind::Pulse;
  if (k == "gaussian_process") return InputKind::GaussianProcess;
  return InputKind::Wdm;
}

// A exp(-t^2 / (2 w^2)).
Signal read_pulse(const Experiment& e) {
  const Config& c = e.cfg;
  c.check_keys("/input", {"kind", "amplitude", "width"});
  const double a = c.quantity("/input/amplitude", "amplitude");
  const double w = c.optional_quantity("/input/width", "time").value_or(1.0);
  if (w <= 0.0) c.fail("/input/width", "width must be positive");
  const double half = 0.5 * e.grid.period() / w;
  if (std::exp(-0.5 * half * half) >= 1e-12) c.fail("/input/width", "pulse too wide for the grid period");
  Signal s(e.grid);
  for (std::size_t n = 0; n < e.grid.size(); ++n) {
    const double t = e.grid.time(n) / w;
    s[n] = a * std::exp(-0.5 * t * t);
  }
  return s;
}

// S0_k = A^2 exp(-(w_k / width)^2), or an explicit table.
Psd read_process_psd(const Experiment& e) {
  const Config& c = e.cfg;
  c.check_keys("/input", {"kind", "shape", "amplitude", "width", "values", "unit"});
  const std::string shape = c.choice("/input/shape", {"gaussian", "table"});
  Psd s(e.grid);
  if (shape == "gaussian") {
    const double a = c.quantity("/input/amplitude", "amplitude");
    const double w = c.optional_quantity("/input/width", "angular_frequency").value_or(1.0);
    if (w <= 0.0) c.fail("/input/width", "width must be positive");
    for (long k = e.grid.min_mode(); k <= e.grid.max_mode(); ++k) {
      const double x = e.grid.omega(k) / w;
      s.at(k) = a * a * std::exp(-x * x);
    }
    return s;
  }
  if (c.array_size("/input/values") != e.grid.size()) c.fail("/input/values", "need one value per grid mode");
  const std::string unit = c.text("/input/unit");
  double scale = 1.0;
  if (e.units == UnitSystem::Dimensionless) {
    if (unit != "1") c.fail("/input/unit", "dimensionless configs take unit \"1\"");
  } else if (unit == "mW") {
    scale = 1e-3;
  } else if (unit != "W") {
    c.fail("/input/unit", "unit '" + unit + "' is not a power unit");
  }
  for (std::size_t i = 0; i < e.grid.size(); ++i) {
    const double v = c.number("/input/values/" + std::to_string(i));
    if (v < 0.0) c.fail("/input/values/" + std::to_string(i), "PSD values must be >= 0");
    s.values()[i] = v * scale;
  }
  return s;
}

wdm::WdmConfig read_wdm(const Experiment& e) {
  const Config& c = e.cfg;
  c.check_keys("/input", {"kind", "half_users", "modes_per_user", "user_bandwidth", "basis", "symbols"});
  const auto half = c.integer("/input/half_users");
  if (half < 0) c.fail("/input/half_users", "half_users must be >= 0");
  std::int64_t n0 = 0;
  if (c.has("/input/modes_per_user")) {
    n0 = c.integer("/input/modes_per_user");
  } else {
    n0 = static_cast<std::int64_t>(
        wdm::WdmConfig::modes_for_bandwidth(e.grid, c.quantity("/input/user_bandwidth", "angular_frequency")));
  }
  if (n0 < 2 || n0 % 2 != 0) c.fail("/input", "modes per user must be even and >= 2");
  if ((2 * half + 1) * n0 > static_cast<std::int64_t>(e.grid.size())) c.fail("/input/half_users", "users do not fit on the grid");

  c.check_keys("/input/basis", {"kind", "symbols", "rolloff"});
  const std::string bk = c.choice("/input/basis/kind", {"tones", "delayed"});
  std::optional<wdm::Basis> basis;
  if (bk == "tones") {
    basis = wdm::Basis::tones(static_cast<std::size_t>(n0));
  } else {
    const auto m = c.integer("/input/basis/symbols");
    const double beta = c.number("/input/basis/rolloff");
    if (m < 1) c.fail("/input/basis/symbols", "need at least one symbol");
    if (beta < 0.0 || beta > 1.0) c.fail("/input/basis/rolloff", "roll-off must lie in [0, 1]");
    if (static_cast<double>(n0) < (1.0 + beta) * static_cast<double>(m) - 1e-12)
      c.fail("/input/basis", "band too narrow for the pulse roll-off");
    basis = wdm::Basis::delayed(static_cast<std::size_t>(n0), static_cast<std::size_t>(m), beta);
  }

  c.check_keys("/input/symbols", {"law", "power"});
  const std::string law = c.choice("/input/symbols/law", {"gaussian", "constant_modulus", "qam16"});
  const double p = c.quantity("/input/symbols/power", "power");
  if (p <= 0.0) c.fail("/input/symbols/power", "power must be positive");
  using Kind = wdm::SymbolDistribution::Kind;
  const Kind kind = law == "gaussian" ? Kind::Gaussian : law == "qam16" ? Kind::Qam16 : Kind::ConstantModulus;
  return wdm::WdmConfig(e.grid, half, *basis, wdm::SymbolDistribution(kind, p));
}

// S0 of any input: periodogram for a pulse, the diagonal moment otherwise.
Psd input_psd(const Experiment& e) {
  switch (input_kind(e.cfg)) {
    case InputKind::Pulse: return periodogram(forward_transform(read_pulse(e)));
    case InputKind::GaussianProcess: return read_process_psd(e);
    case InputKind::Wdm: return wdm::input_psd(read_wdm(e));
  }
  return Psd(e.grid);
}

oracle::Sampler input_sampler(const Experiment& e) {
  switch (input_kind(e.cfg)) {
    case InputKind::GaussianProcess: return oracle::gaussian_process_sampler(read_process_psd(e));
    case InputKind::Wdm: return wdm::wdm_sampler(read_wdm(e));
    case InputKind::Pulse: break;
  }
  e.cfg.fail("/input/kind", "Monte-Carlo runs need a random input (gaussian_process or wdm)");
}

std::size_t require_realizations(const Experiment& e) {
  if (e.realizations < 2) e.cfg.fail("/realizations", "Monte-Carlo runs need realizations >= 2");
  return e.realizations;
}

// ---------------------------------------------------------------- output ---

class Table {
public:
  Table(std::string subcommand, std::vector<std::string> columns)
      : subcommand_(std::move(subcommand)), columns_(std::move(columns)) {}

  void row(const std::vector<double>& values) { rows_.push_back(values); }

  void write(const fs::path& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "# kzpsd csv v1 " << subcommand_ << '\n';
    for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
    os << '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << num(r[i]);
      os << '\n';
    }
  }

  const std::vector<std::string>& columns() const { return columns_; }

private:
  std::string subcommand_;
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

struct Outputs {
  fs::path dir;
  std::string prefix;
  std::vector<std::string> written;

  fs::path path(const std::string& name) const { return dir / (prefix + "_" + name); }

  void csv(const std::string& name, const Table& t) {
    t.write(path(name));
    written.push_back(path(name).string());
  }

  void report(const std::string& name, const json& j) {
    std::ofstream os(path(name));
    if (!os) throw std::runtime_error("cannot write " + path(name).string());
    os << j.dump(2) << '\n';
    written.push_back(path(name).string());
  }

  // gnuplot commands; column 1 on x, the listed columns as lines.
  void plot(const std::string& csv_name, const Table& t, const std::vector<std::size_t>& ys, bool logy) {
    std::ofstream os(path(csv_name + ".gp"));
    os << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set xlabel '" << t.columns()[0] << "'\n";
    if (logy) os << "set logscale y\n";
    os << "plot ";
    for (std::size_t i = 0; i < ys.size(); ++i)
      os << (i ? ", \\\n     " : "") << "'" << path(csv_name).filename().string() << "' using 1:" << ys[i] + 1
         << " with lines";
    os << "\npause -1\n";
    written.push_back(path(csv_name + ".gp").string());
  }
};

Outputs open_outputs(const Experiment& e) {
  std::error_code ec;
  fs::create_directories(e.out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + e.out_dir.string());
  return {e.out_dir, e.prefix, {}};
}

void report_files(const Outputs& o) {
  for (const auto& f : o.written) std::cout << "wrote " << f << '\n';
}

double l2(const std::vector<double>& a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

json link_json(const LinkConfig& l) {
  return {{"nonlinear_coeff", l.nonlinear_coeff()},
          {"alpha", l.alpha()},
          {"span_length", std::isfinite(l.span_length()) ? json(l.span_length()) : json(nullptr)},
          {"spans", l.span_count()}};
}

// ----------------------------------------------------------- subcommands ---

int run_oracle(const Experiment& e) {
  const double z = require_distance(e);
  Outputs out = open_outputs(e);
  if (input_kind(e.cfg) == InputKind::Pulse) {
    const Signal in = read_pulse(e);
    const Signal q = stage("nls-oracle", [&] { return oracle::propagate_to(in, e.link, z, e.step); });
    const Spectrum a = forward_transform(in), b = forward_transform(q);
    Table t("oracle", {"k", "omega", "power_in", "power_out"});
    for (long k = e.grid.min_mode(); k <= e.grid.max_mode(); ++k)
      t.row({double(k), e.grid.omega(k), std::norm(a.at(k)), std::norm(b.at(k))});
    out.csv("spectrum.csv", t);
    out.plot("spectrum.csv", t, {2, 3}, true);
    const auto h0 = hamiltonian(in), h1 = hamiltonian(q);
    out.report("summary.json", {{"distance", z},
                                {"link", link_json(e.link)},
                                {"energy_in", energy(in)},
                                {"energy_out", energy(q)},
                                {"energy_drift", std::abs(energy(q) - energy(in)) / energy(in)},
                                {"hamiltonian_ratio_in", h0.ratio ? json(*h0.ratio) : json(nullptr)},
                                {"hamiltonian_ratio_out", h1.ratio ? json(*h1.ratio) : json(nullptr)}});
    report_files(out);
    return 0;
  }
  const Psd s0 = input_psd(e);
  const auto sampler = input_sampler(e);
  const std::size_t r = require_realizations(e);
  const auto ens = stage("nls-oracle", [&] { return oracle::simulate_ensemble(sampler, e.link, z, r, e.seed, e.step); });
  const auto mc = oracle::summarize_psd(ens);
  Table t("oracle", {"k", "omega", "S0", "S_MC", "stderr"});
  for (long k = e.grid.min_mode(); k <= e.grid.max_mode(); ++k) {
    const auto i = e.grid.index_of(k);
    t.row({double(k), e.grid.omega(k), s0.values()[i], mc.mean.values()[i], mc.std_error[i]});
  }
  out.csv("mc.csv", t);
  out.plot("mc.csv", t, {2, 3}, false);
  const auto qg = stats::quasi_gaussian_deviation(ens, std::min<std::size_t>(20, r / 2));
  out.report("summary.json", {{"distance", z},
                              {"realizations", r},
                              {"seed", e.seed},
                              {"hamiltonian_ratio", oracle::ensemble_hamiltonian_ratio(ens)},
                              {"s4", qg.s4},
                              {"s4_stderr", qg.s4_stderr},
                              {"s6", qg.s6},
                              {"s6_stderr", qg.s6_stderr}});
  report_files(out);
  return 0;
}

int run_model(const Experiment& e, models::Model model) {
  const double z = require_distance(e);
  const Psd s0 = input_psd(e);
  const auto cmp = stage("psd-models", [&] { return models::compare_models(s0, e.link, z); });
  const auto& m = model == models::Model::Gn ? cmp.gn : cmp.kz;
  Outputs out = open_outputs(e);
  const std::string name = model == models::Model::Gn ? "gn" : "kz";
  Table t(name, {"k", "omega", "S0", std::string("S_") + models::to_string(model)});
  for (long k = e.grid.min_mode(); k <= e.grid.max_mode(); ++k) {
    const auto i = e.grid.index_of(k);
    t.row({double(k), e.grid.omega(k), s0.values()[i], m.value(i)});
  }
  out.csv(name + ".csv", t);
  out.plot(name + ".csv", t, {2, 3}, false);
  out.report(name + ".json", {{"model", models::to_string(model)},
                              {"distance", z},
                              {"link", link_json(e.link)},
                              {"input_power", s0.total()},
                              {"total_correction", m.total_correction()},
                              {"output_loss", m.output_loss}});
  report_files(out);
  return 0;
}

int run_compare(const Experiment& e, bool end_of_link) {
  if (end_of_link && !std::isfinite(e.link.span_length()))
    e.cfg.fail("/link", "multispan needs span_length and spans");
  const double z = end_of_link ? e.link.total_length() : require_distance(e);
  const Psd s0 = input_psd(e);
  const auto cmp = stage("psd-models", [&] { return models::compare_models(s0, e.link, z); });
  const bool with_mc = !end_of_link || e.realizations > 0;
  std::optional<oracle::MonteCarloPsd> mc;
  if (with_mc) {
    const auto sampler = input_sampler(e);
    const std::size_t r = require_realizations(e);
    mc = stage("nls-oracle", [&] { return oracle::estimate_psd_mc(sampler, e.link, z, r, e.seed, e.step); });
  }
  const std::string name = end_of_link ? "multispan" : "compare";
  std::vector<std::string> cols{"k", "omega", "S0", "S_GN", "S_KZ"};
  if (mc) cols.insert(cols.end(), {"S_MC", "stderr"});
  Table t(name, cols);
  std::vector<double> gn(e.grid.size()), kz(e.grid.size());
  for (long k = e.grid.min_mode(); k <= e.grid.max_mode(); ++k) {
    const auto i = e.grid.index_of(k);
    gn[i] = cmp.gn.value(i);
    kz[i] = cmp.kz.value(i);
    std::vector<double> row{double(k), e.grid.omega(k), s0.values()[i], gn[i], kz[i]};
    if (mc) row.insert(row.end(), {mc->mean.values()[i], mc->std_error[i]});
    t.row(row);
  }
  Outputs out = open_outputs(e);
  out.csv(name + ".csv", t);
  out.plot(name + ".csv", t, mc ? std::vector<std::size_t>{2, 3, 4, 5} : std::vector<std::size_t>{2, 3, 4}, false);
  json summary{{"distance", z},
               {"link", link_json(e.link)},
               {"input_power", s0.total()},
               {"gn_total_correction", cmp.gn.total_correction()},
               {"kz_total_correction", cmp.kz.total_correction()}};
  if (mc) {
    const double egn = l2(gn, mc->mean.values()), ekz = l2(kz, mc->mean.values());
    summary["realizations"] = mc->realizations;
    summary["seed"] = e.seed;
    summary["l2_gn_mc"] = egn;
    summary["l2_kz_mc"] = ekz;
    std::cout << "L2(GN-MC) = " << num(egn) << "  L2(KZ-MC) = " << num(ekz) << '\n';
  }
  out.report(name + ".json", summary);
  report_files(out);
  return 0;
}

int run_perturb(const Experiment& e) {
  const Config& c = e.cfg;
  if (e.units != UnitSystem::Dimensionless) c.fail("/units", "perturb runs on the dimensionless equation");
  const double z = require_distance(e);
  const std::size_t n = c.array_size("/amplitudes");
  if (n == 0) c.fail("/amplitudes", "need at least one amplitude");
  std::vector<double> amps;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "/amplitudes/" + std::to_string(i);
    amps.push_back(c.quantity(p, "amplitude"));
    if (amps.back() < 0.0) c.fail(p, "amplitudes must be >= 0");
  }
  const double half = 0.5 * e.grid.period();
  if (std::exp(-0.5 * half * half) >= 1e-12) c.fail("/grid/period", "period too short for the unit-width pulse");
  const auto curve = stage("perturbation", [&] { return perturbation::perturbation_error_curve(e.grid, amps, z, e.link, e.step); });
  Table t("perturb", {"A", "a_input", "a", "e_regular", "e_multiscale", "peak_exact", "peak_regular"});
  for (const auto& p : curve)
    t.row({p.amplitude, p.ratio_input, p.ratio, p.error_regular, p.error_multiscale, p.peak_exact, p.peak_regular});
  Outputs out = open_outputs(e);
  out.csv("perturb.csv", t);
  out.plot("perturb.csv", t, {3, 4}, false);
  report_files(out);
  return 0;
}

int run_modes(const Experiment& e) {
  const Config& c = e.cfg;
  if (input_kind(c) != InputKind::Pulse) c.fail("/input/kind", "modes needs a pulse input");
  const Signal in = read_pulse(e);
  std::vector<long> modes;
  for (std::size_t i = 0; i < c.array_size("/modes"); ++i) {
    const std::string p = "/modes/" + std::to_string(i);
    const auto k = c.integer(p);
    if (!e.grid.contains_mode(k)) c.fail(p, "mode outside the grid");
    modes.push_back(k);
  }
  if (modes.empty()) c.fail("/modes", "need at least one mode");
  c.check_keys("/z_samples", {"start", "stop", "count"});
  const double a = c.quantity("/z_samples/start", "length"), b = c.quantity("/z_samples/stop", "length");
  const auto count = c.integer("/z_samples/count");
  if (count < 2) c.fail("/z_samples/count", "need at least two samples");
  if (!(a >= 0.0 && b > a)) c.fail("/z_samples", "need 0 <= start < stop");
  std::vector<double> zs;
  for (std::int64_t i = 0; i < count; ++i) zs.push_back(a + (b - a) * double(i) / double(count - 1));
  const auto traj = stage("nls-oracle", [&] { return oracle::mode_trajectory(in, e.link, zs, modes, e.step); });

  std::vector<std::string> cols{"z"};
  for (long k : modes) cols.push_back("abs_q_" + std::to_string(k));
  cols.push_back("power");
  Table t("modes", cols);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    std::vector<double> row{traj.z[i]};
    row.insert(row.end(), traj.magnitude[i].begin(), traj.magnitude[i].end());
    row.push_back(traj.power[i]);
    t.row(row);
  }
  // least-squares trend of |q_k|^2 in z with a 95% interval
  json fits = json::array();
  for (std::size_t j = 0; j < modes.size(); ++j) {
    double mz = 0.0, my = 0.0;
    const double n = double(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) {
      mz += zs[i] / n;
      my += traj.magnitude[i][j] * traj.magnitude[i][j] / n;
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const double y = traj.magnitude[i][j] * traj.magnitude[i][j];
      sxx += (zs[i] - mz) * (zs[i] - mz);
      sxy += (zs[i] - mz) * (y - my);
    }
    const double slope = sxy / sxx;
    double rss = 0.0, lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const double y = traj.magnitude[i][j] * traj.magnitude[i][j];
      const double r = y - my - slope * (zs[i] - mz);
      rss += r * r;
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    const double se = zs.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
    fits.push_back({{"mode", modes[j]}, {"slope", slope}, {"slope_stderr", se}, {"min", lo}, {"max", hi}});
  }
  Outputs out = open_outputs(e);
  out.csv("modes.csv", t);
  std::vector<std::size_t> ys;
  for (std::size_t j = 0; j < modes.size(); ++j) ys.push_back(j + 1);
  out.plot("modes.csv", t, ys, false);
  out.report("modes.json", {{"modes", fits}, {"link", link_json(e.link)}});
  report_files(out);
  return 0;
}

int run_wdm(const Experiment& e) {
  const Config& c = e.cfg;
  if (input_kind(c) != InputKind::Wdm) c.fail("/input/kind", "wdm needs a wdm input");
  const double z = require_distance(e);
  const auto cfg = read_wdm(e);
  std::vector<models::Model> list{models::Model::Gn, models::Model::Kz};
  if (c.has("/models")) {
    list.clear();
    for (std::size_t i = 0; i < c.array_size("/models"); ++i) {
      const std::string m = c.choice("/models/" + std::to_string(i), {"GN", "KZ"});
      list.push_back(m == "GN" ? models::Model::Gn : models::Model::Kz);
    }
  }
  const double limit = c.has("/cost_limit") ? c.number("/cost_limit") : wdm::kDefaultCostLimit;
  Outputs out = open_outputs(e);
  const Psd s0 = wdm::input_psd(cfg);
  for (auto model : list) {
    const std::string tag = model == models::Model::Gn ? "gn" : "kz";
    out.report("interference_" + tag + ".json",
               stage("wdm", [&] { return wdm::interference_report_json(cfg, e.link, z, model); }));
    const auto r = stage("wdm", [&] { return wdm::corrected_psds(cfg, e.link, z, model, limit); });
    Table t("wdm", {"k", "omega", "S0", "stationary", "pairing", "cumulant", "total"});
    for (long k = e.grid.min_mode(); k <= e.grid.max_mode(); ++k) {
      const auto i = e.grid.index_of(k);
      t.row({double(k), e.grid.omega(k), s0.values()[i], r.stationary.value(i), r.pairing[i], r.cumulant[i], r.value(i)});
    }
    out.csv("wdm_" + tag + ".csv", t);
    out.plot("wdm_" + tag + ".csv", t, {2, 3, 6}, false);
  }
  report_files(out);
  return 0;
}

// Integer polynomial in k: "k^3+3k^2", "2k^2 - k + 1", "0".
quartets::DispersionRelation parse_zeta(const std::string& text) {
  std::string s;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch)) && ch != '*') s += ch;
  if (s.empty()) throw std::invalid_argument("empty polynomial");
  static const std::regex term(R"(([+-]?)(\d*)(k(\^(\d+))?)?)");
  std::vector<std::int64_t> coeffs;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::smatch m;
    const std::string rest = s.substr(pos);
    if (!std::regex_search(rest, m, term, std::regex_constants::match_continuous) || m.length(0) == 0 ||
        (m[2].length() == 0 && m[3].length() == 0))
      throw std::invalid_argument("cannot parse polynomial '" + text + "' at '" + rest + "'");
    if (pos > 0 && m[1].length() == 0) throw std::invalid_argument("missing sign before '" + rest + "'");
    std::int64_t coef = m[2].length() ? std::stoll(m[2]) : 1;
    if (m[1] == "-") coef = -coef;
    const std::size_t power = m[3].length() == 0 ? 0 : m[5].length() ? std::stoul(m[5]) : 1;
    if (power > 8) throw std::invalid_argument("degree above 8 is not supported");
    if (coeffs.size() <= power) coeffs.resize(power + 1, 0);
    coeffs[power] += coef;
    pos += static_cast<std::size_t>(m.length(0));
  }
  return quartets::DispersionRelation(coeffs);
}

int run_quartets(const std::string& zeta_text, long box, const std::string& out_path) {
  const auto zeta = parse_zeta(zeta_text);
  const auto list = stage("quartets", [&] { return quartets::enumerate_resonant(zeta, box); });
  std::size_t trivial = 0;
  for (const auto& q : list) trivial += quartets::is_trivial(q);
  if (out_path.empty()) {
    quartets::write_quartets_csv(std::cout, list, zeta);
  } else {
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("cannot write " + out_path);
    quartets::write_quartets_csv(os, list, zeta);
  }
  std::cerr << "resonant " << list.size() << ", trivial " << trivial << ", nontrivial " << list.size() - trivial
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kzpsd: NLS oracle, perturbation signals and GN/KZ PSD models"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out_dir, "output directory (overrides output.directory)");
    return sub;
  };
  auto* oracle_cmd = with_config(app.add_subcommand("oracle", "split-step propagation (pulse or Monte-Carlo PSD)"));
  auto* gn_cmd = with_config(app.add_subcommand("gn", "GN model PSD"));
  auto* kz_cmd = with_config(app.add_subcommand("kz", "KZ model PSD"));
  auto* compare_cmd = with_config(app.add_subcommand("compare", "S0, GN, KZ and Monte-Carlo PSDs"));
  auto* perturb_cmd = with_config(app.add_subcommand("perturb", "first-order perturbation error curve"));
  auto* modes_cmd = with_config(app.add_subcommand("modes", "mode magnitudes along z"));
  auto* wdm_cmd = with_config(app.add_subcommand("wdm", "WDM interference split and corrected PSDs"));
  auto* multispan_cmd = with_config(app.add_subcommand("multispan", "GN/KZ PSDs at the end of a multi-span link"));

  std::string zeta = "k^2", quartet_out;
  long box = 32;
  auto* quartets_cmd = app.add_subcommand("quartets", "enumerate resonant quartets");
  quartets_cmd->add_option("--zeta", zeta, "integer dispersion polynomial in k, e.g. k^3+3k^2");
  quartets_cmd->add_option("--box", box, "box half-width K")->check(CLI::PositiveNumber);
  quartets_cmd->add_option("-o,--out", quartet_out, "CSV file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (quartets_cmd->parsed()) return run_quartets(zeta, box, quartet_out);
    const Experiment e = read_experiment(config_path, out_dir);
    if (oracle_cmd->parsed()) return run_oracle(e);
    if (gn_cmd->parsed()) return run_model(e, models::Model::Gn);
    if (kz_cmd->parsed()) return run_model(e, models::Model::Kz);
    if (compare_cmd->parsed()) return run_compare(e, false);
    if (perturb_cmd->parsed()) return run_perturb(e);
    if (modes_cmd->parsed()) return run_modes(e);
    if (wdm_cmd->parsed()) return run_wdm(e);
    if (multispan_cmd->parsed()) return run_compare(e, true);
  } catch (const ConfigError& err) {
    std::cerr << "kzpsd: config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const StageError& err) {
    std::cerr << "kzpsd: " << (err.numerical() ? "numerical failure in " : "error in ") << err.what() << '\n';
    return err.numerical() ? kExitNumerical : 1;
  } catch (const std::exception& err) {
    std::cerr << "kzpsd: error: " << err.what() << '\n';
    return 1;
  }
  return 1;
}
