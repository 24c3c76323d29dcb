#include "fieldreg/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fieldreg/dependence.hpp"
#include "fieldreg/errors.hpp"
#include "fieldreg/imaging.hpp"
#include "fieldreg/inference.hpp"
#include "fieldreg/version.hpp"

namespace fieldreg::cli {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse " + what + " '" + s + "' as a number");
  }
}

int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse " + what + " '" + s + "' as an integer");
  }
}

/// "0.3,0.7" (d=1, comma-separated points) or "0.3,0.4;0.7,0.2" (points split
/// by ';', coordinates by ',').
std::vector<std::vector<double>> parse_queries(const std::string& text, int d) {
  std::vector<std::vector<double>> queries;
  const auto groups = split(text, ';');
  if (groups.empty()) throw ValidationError("empty query list");
  if (d == 1 && groups.size() == 1 && split(groups[0], ',').size() > 1) {
    for (const auto& tok : split(groups[0], ','))
      queries.push_back({parse_double(tok, "query coordinate")});
    return queries;
  }
  for (const auto& group : groups) {
    std::vector<double> point;
    for (const auto& tok : split(group, ',')) point.push_back(parse_double(tok, "query coordinate"));
    if (static_cast<int>(point.size()) != d)
      throw ValidationError("query '" + group + "' must have " + std::to_string(d) + " coordinates");
    queries.push_back(std::move(point));
  }
  return queries;
}

/// "c1,...,cd:theta;..." moving-average taps.
std::vector<MaTap> parse_stencil(const std::string& text, int d) {
  std::vector<MaTap> taps;
  for (const auto& part : split(text, ';')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos)
      throw ValidationError("stencil tap '" + part + "' must look like offsets:theta");
    MaTap tap;
    for (const auto& tok : split(part.substr(0, colon), ','))
      tap.offset.push_back(parse_int(tok, "stencil offset"));
    if (static_cast<int>(tap.offset.size()) != d)
      throw ValidationError("stencil tap '" + part + "' needs " + std::to_string(d) + " offsets");
    tap.theta = parse_double(part.substr(colon + 1), "stencil weight");
    taps.push_back(std::move(tap));
  }
  if (taps.empty()) throw ValidationError("empty stencil");
  return taps;
}

struct FieldOptions {
  std::string field = "iid";
  double sd = 1.0;
  double cst = 1.0;
  double range = 1.0;
  int components = 4096;
  std::string stencil = "0:1";
  double beta = 1.0;

  void add_options(CLI::App* sub) {
    sub->add_option("--field", field, "Noise field: iid | exp | ma | md")->capture_default_str();
    sub->add_option("--sd", sd, "iid: standard deviation")->capture_default_str();
    sub->add_option("--cst", cst, "exp: covariance at lag 0")->capture_default_str();
    sub->add_option("--range", range, "exp: covariance range a in cst*exp(-|k|/a)")
        ->capture_default_str();
    sub->add_option("--components", components, "exp: spectral component count M")
        ->capture_default_str();
    sub->add_option("--stencil", stencil, "ma: taps 'c1,..,cd:theta;...'")->capture_default_str();
    sub->add_option("--beta", beta, "md: dependence strength")->capture_default_str();
  }
  FieldSpec make_spec(int d, std::uint64_t seed) const {
    FieldSpec spec;
    if (field == "iid" || field == "iid-gaussian")
      spec = FieldSpec::iid(sd, seed);
    else if (field == "exp" || field == "exp-gaussian-spectral")
      spec = FieldSpec::exp_spectral(cst, range, components, seed);
    else if (field == "ma" || field == "ma-field")
      spec = FieldSpec::ma(parse_stencil(stencil, d), seed);
    else if (field == "md" || field == "md-field")
      spec = FieldSpec::md(beta, seed);
    else
      throw ValidationError("unknown field kind '" + field + "'");
    spec.validate(d);
    return spec;
  }
  void canonical(std::vector<std::pair<std::string, std::string>>& kv) const {
    kv.emplace_back("field", field);
    kv.emplace_back("sd", std::to_string(sd));
    kv.emplace_back("cst", std::to_string(cst));
    kv.emplace_back("range", std::to_string(range));
    kv.emplace_back("components", std::to_string(components));
    kv.emplace_back("stencil", stencil);
    kv.emplace_back("beta", std::to_string(beta));
  }
};

struct KernelOptions {
  std::string kernel = "epanechnikov-paper";
  std::string norm = "euclidean";
  std::string table;

  void add_options(CLI::App* sub) {
    sub->add_option("--kernel", kernel,
                    "box | epanechnikov-paper | epanechnikov-normalized | triangle")
        ->capture_default_str();
    sub->add_option("--kernel-norm", norm, "Radial norm: euclidean | max")->capture_default_str();
    sub->add_option("--kernel-table", table, "Tabulated kernel file (overrides --kernel)")
        ->capture_default_str();
  }
  Kernel make_kernel(int d) const {
    if (!table.empty()) {
      Kernel k = Kernel::from_table_file(table);
      if (k.dim() != d)
        throw ValidationError("kernel table dimension " + std::to_string(k.dim()) +
                              " does not match lattice dimension " + std::to_string(d));
      return k;
    }
    RadialNorm rn;
    if (norm == "euclidean")
      rn = RadialNorm::euclidean;
    else if (norm == "max")
      rn = RadialNorm::max;
    else
      throw ValidationError("unknown kernel norm '" + norm + "'");
    return Kernel::from_name(kernel, d, rn);
  }
  void canonical(std::vector<std::pair<std::string, std::string>>& kv) const {
    kv.emplace_back("kernel", kernel);
    kv.emplace_back("kernel-norm", norm);
    kv.emplace_back("kernel-table", table);
  }
};

struct BandwidthOptions {
  double bandwidth = 0.0;  // > 0 selects a fixed h
  double bw_c = 1.0;
  double bw_gamma = 0.25;

  void add_options(CLI::App* sub) {
    sub->add_option("--bandwidth", bandwidth, "Fixed bandwidth h (0 = use the power law)")
        ->capture_default_str();
    sub->add_option("--bw-c", bw_c, "Power-law bandwidth constant c in h = c*n^-gamma")
        ->capture_default_str();
    sub->add_option("--bw-gamma", bw_gamma, "Power-law bandwidth exponent gamma")
        ->capture_default_str();
  }
  BandwidthRule make_rule() const {
    if (bandwidth > 0.0) return BandwidthRule::fixed(bandwidth);
    return BandwidthRule::power_law(bw_c, bw_gamma);
  }
  void canonical(std::vector<std::pair<std::string, std::string>>& kv) const {
    kv.emplace_back("bandwidth", std::to_string(bandwidth));
    kv.emplace_back("bw-c", std::to_string(bw_c));
    kv.emplace_back("bw-gamma", std::to_string(bw_gamma));
  }
};

ScalarField builtin_g(const std::string& name) {
  if (name == "sin")
    return [](const std::vector<double>& x) {
      double v = 1.0;
      for (double c : x) v *= std::sin(2.0 * M_PI * c);
      return v;
    };
  if (name == "linear")
    return [](const std::vector<double>& x) {
      double v = 0.0;
      for (double c : x) v += c;
      return v;
    };
  if (name == "constant") return [](const std::vector<double>&) { return 1.0; };
  throw ValidationError("unknown regression function '" + name + "' (sin | linear | constant)");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

/// Canonical config echo; parseable back through --config (round-trip stable).
void write_manifest(const std::string& dir, const std::string& subcommand,
                    const std::vector<std::pair<std::string, std::string>>& kv) {
  const std::string path = dir + "/manifest";
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "# fieldreg " << version << "\n";
  out << "[" << subcommand << "]\n";
  for (const auto& [key, value] : kv) out << key << "=" << value << "\n";
  if (!out) throw IoError("write failed: " + path);
}

void print_grid_csv(const GridEstimate& grid, const Lattice& lat, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (int l = 1; l <= grid.d; ++l) out << "x_" << l << ",";
  out << "value,weight_sum,boundary_flag\n";
  std::vector<double> x(static_cast<std::size_t>(grid.d));
  char buf[64];
  for (std::uint64_t k = 0; k < lat.size(); ++k) {
    lat.design_point(k, x.data());
    bool boundary = false;
    for (double c : x)
      if (std::min(c, 1.0 - c) < grid.bandwidth) boundary = true;
    for (int l = 0; l < grid.d; ++l) {
      std::snprintf(buf, sizeof buf, "%.17g", x[static_cast<std::size_t>(l)]);
      out << buf << ",";
    }
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", grid.values[k], grid.weight_sums[k],
                  boundary ? 1 : 0);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

std::function<double(int)> parse_alpha(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "exp") return alpha_exponential(arg.empty() ? 1.0 : parse_double(arg, "alpha rate"));
  if (head == "poly") return alpha_power(parse_double(arg, "alpha exponent"));
  if (head == "mdep") return alpha_m_dependent(parse_int(arg, "alpha m"));
  if (head == "file") return alpha_from_table_file(arg);
  throw ValidationError("unknown alpha spec '" + spec + "' (exp:RATE | poly:Q | mdep:M | file:PATH)");
}

std::function<double(double)> parse_quantile(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "gaussian") return gaussian_abs_quantile();
  if (head == "bounded") return bounded_abs_quantile(parse_double(arg, "quantile bound"));
  if (head == "file") return quantile_from_table_file(arg);
  throw ValidationError("unknown quantile spec '" + spec + "' (gaussian | bounded:M | file:PATH)");
}

// ---------------------------------------------------------------------------
// subcommand configs

struct SimulateCmd {
  FieldOptions field;
  int n = 0, d = 2;
  std::uint64_t seed = 0;
  std::string format = "bin";
  std::string out;
  int threads = 0;
};

struct EstimateCmd {
  std::string in;
  KernelOptions kernel;
  BandwidthOptions bw;
  std::string queries;
  bool grid = false;
  std::string out;
  int threads = 0;
};

struct EtaCmd {
  std::string in;
  int rho = -1;
  std::string out;
  int threads = 0;
};

struct CheckCmd {
  std::string criterion = "quantile";
  std::string alpha = "exp:1";
  std::string quantile = "gaussian";
  double delta = 2.0;
  int d = 2;
  int max_radius = 10000;
  std::string out;
};

struct CltCmd {
  FieldOptions field;
  KernelOptions kernel;
  BandwidthOptions bw;
  std::string g = "sin";
  int n = 0, d = 1, reps = 500;
  std::string queries = "0.3,0.7";
  double ks_alpha = 0.01;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
};

struct BiasCmd {
  KernelOptions kernel;
  BandwidthOptions bw;
  std::string g = "sin";
  int d = 1;
  std::string n_list = "1000";
  std::string h_list;
  int queries_per_axis = 33;
  std::string out;
};

struct DenoiseCmd {
  std::string demo;
  std::string input;
  FieldOptions field;
  KernelOptions kernel;
  BandwidthOptions bw;
  int n = 64;
  int replicates = 50;
  int rho = -1;
  std::uint64_t seed = 0;
  bool paper_faithful = false;
  bool clamp_observations = false;
  bool use_true_noise = false;
  double threshold = 0.01;
  std::string out;
  int threads = 0;
};

// ---------------------------------------------------------------------------

int run_simulate(const SimulateCmd& cmd) {
  if (cmd.n < 1) throw ValidationError("simulate-field: --n must be >= 1");
  const Lattice lat(cmd.n, cmd.d);
  const FieldSpec spec = cmd.field.make_spec(cmd.d, cmd.seed);
  const Field field = simulate(spec, lat, cmd.threads);
  ensure_dir(cmd.out);
  if (cmd.format == "bin" || cmd.format == "both")
    write_field(field, cmd.out + "/field.bin");
  if (cmd.format == "csv" || cmd.format == "both")
    write_field_csv(field, cmd.out + "/field.csv");
  if (cmd.format != "bin" && cmd.format != "csv" && cmd.format != "both")
    throw ValidationError("simulate-field: --format must be bin | csv | both");

  std::vector<std::pair<std::string, std::string>> kv;
  cmd.field.canonical(kv);
  kv.emplace_back("n", std::to_string(cmd.n));
  kv.emplace_back("d", std::to_string(cmd.d));
  kv.emplace_back("seed", std::to_string(cmd.seed));
  kv.emplace_back("format", cmd.format);
  kv.emplace_back("out", cmd.out);
  kv.emplace_back("threads", std::to_string(cmd.threads));
  write_manifest(cmd.out, "simulate-field", kv);
  std::printf("simulated %s on {1..%d}^%d -> %s\n", spec.describe().c_str(), cmd.n, cmd.d,
              cmd.out.c_str());
  return 0;
}

int run_estimate(const EstimateCmd& cmd) {
  const Field obs = read_field(cmd.in);
  const Lattice& lat = obs.lattice;
  const Kernel kernel = cmd.kernel.make_kernel(lat.d());
  const BandwidthRule rule = cmd.bw.make_rule();
  if (rule.form == BandwidthRule::Form::power_law) rule.require_clt_valid(lat.d());
  const double h = rule.bandwidth(lat.n());

  if (cmd.grid != cmd.queries.empty())
    throw ValidationError("estimate: give exactly one of --queries or --grid");
  ensure_dir(cmd.out);
  if (cmd.grid) {
    const GridEstimate grid = estimate_grid(obs.values, lat, kernel, h, cmd.threads);
    print_grid_csv(grid, lat, cmd.out + "/estimate.csv");
  } else {
    const auto queries = parse_queries(cmd.queries, lat.d());
    const Estimate est = estimate(obs.values, lat, kernel, h, queries);
    write_estimate_csv(est, cmd.out + "/estimate.csv");
  }

  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("in", cmd.in);
  cmd.kernel.canonical(kv);
  cmd.bw.canonical(kv);
  kv.emplace_back("queries", cmd.queries);
  kv.emplace_back("grid", cmd.grid ? "true" : "false");
  kv.emplace_back("out", cmd.out);
  kv.emplace_back("threads", std::to_string(cmd.threads));
  write_manifest(cmd.out, "estimate", kv);
  std::printf("estimate written to %s/estimate.csv (h=%.6g)\n", cmd.out.c_str(), h);
  return 0;
}

int run_eta(const EtaCmd& cmd) {
  const Field eps = read_field(cmd.in);
  const int rho = cmd.rho >= 0 ? cmd.rho : default_rho(eps.lattice.n(), eps.lattice.d());
  const EtaEstimate eta = estimate_eta(eps, rho, cmd.threads);
  std::printf("eta_hat=%.17g raw_sum=%.17g pairs=%llu rho=%d\n", eta.value, eta.raw_sum,
              static_cast<unsigned long long>(eta.pair_count), eta.rho);
  if (!cmd.out.empty()) {
    ensure_dir(cmd.out);
    std::ofstream csv(cmd.out + "/eta.csv");
    if (!csv) throw IoError("cannot open for writing: " + cmd.out + "/eta.csv");
    char buf[256];
    std::snprintf(buf, sizeof buf, "eta_hat,raw_sum,pairs,rho\n%.17g,%.17g,%llu,%d\n", eta.value,
                  eta.raw_sum, static_cast<unsigned long long>(eta.pair_count), eta.rho);
    csv << buf;
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("in", cmd.in);
    kv.emplace_back("rho", std::to_string(cmd.rho));
    kv.emplace_back("out", cmd.out);
    kv.emplace_back("threads", std::to_string(cmd.threads));
    write_manifest(cmd.out, "eta", kv);
  }
  return 0;
}

int run_check(const CheckCmd& cmd) {
  ConditionReport report;
  if (cmd.criterion == "quantile") {
    report = check_quantile_condition(parse_alpha(cmd.alpha), parse_quantile(cmd.quantile), cmd.d,
                                      cmd.max_radius);
  } else if (cmd.criterion == "mixing-rate") {
    report = check_mixing_rate_condition(parse_alpha(cmd.alpha), cmd.delta, cmd.d, cmd.max_radius);
    std::printf("note: the mixing-rate criterion is more restrictive than the quantile one\n");
  } else {
    throw ValidationError("check-condition: --criterion must be quantile | mixing-rate");
  }
  std::fputs(report.to_string().c_str(), stdout);
  if (!cmd.out.empty()) {
    ensure_dir(cmd.out);
    std::ofstream txt(cmd.out + "/report.txt");
    if (!txt) throw IoError("cannot open for writing: " + cmd.out + "/report.txt");
    txt << report.to_string();
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("criterion", cmd.criterion);
    kv.emplace_back("alpha", cmd.alpha);
    kv.emplace_back("quantile", cmd.quantile);
    kv.emplace_back("delta", std::to_string(cmd.delta));
    kv.emplace_back("d", std::to_string(cmd.d));
    kv.emplace_back("max-radius", std::to_string(cmd.max_radius));
    kv.emplace_back("out", cmd.out);
    write_manifest(cmd.out, "check-condition", kv);
  }
  return 0;
}

int run_clt(const CltCmd& cmd) {
  if (cmd.n < 2) throw ValidationError("clt-study: --n must be >= 2");
  const FieldSpec spec = cmd.field.make_spec(cmd.d, cmd.seed);
  const Kernel kernel = cmd.kernel.make_kernel(cmd.d);
  const BandwidthRule rule = cmd.bw.make_rule();
  if (rule.form == BandwidthRule::Form::power_law) rule.require_clt_valid(cmd.d);
  const auto queries = parse_queries(cmd.queries, cmd.d);
  const NormalityReport report = mc_normality_study(spec, builtin_g(cmd.g), kernel, rule, cmd.n,
                                                    queries, cmd.reps, cmd.ks_alpha, cmd.threads);
  std::fputs(report.to_string().c_str(), stdout);
  if (!cmd.out.empty()) {
    ensure_dir(cmd.out);
    std::ofstream csv(cmd.out + "/report.csv");
    if (!csv) throw IoError("cannot open for writing: " + cmd.out + "/report.csv");
    csv << report.to_string();
    std::vector<std::pair<std::string, std::string>> kv;
    cmd.field.canonical(kv);
    cmd.kernel.canonical(kv);
    cmd.bw.canonical(kv);
    kv.emplace_back("g", cmd.g);
    kv.emplace_back("n", std::to_string(cmd.n));
    kv.emplace_back("d", std::to_string(cmd.d));
    kv.emplace_back("reps", std::to_string(cmd.reps));
    kv.emplace_back("queries", cmd.queries);
    kv.emplace_back("ks-alpha", std::to_string(cmd.ks_alpha));
    kv.emplace_back("seed", std::to_string(cmd.seed));
    kv.emplace_back("out", cmd.out);
    kv.emplace_back("threads", std::to_string(cmd.threads));
    write_manifest(cmd.out, "clt-study", kv);
  }
  return 0;
}

int run_bias(const BiasCmd& cmd) {
  const Kernel kernel = cmd.kernel.make_kernel(cmd.d);
  std::vector<std::pair<int, double>> configs;
  const auto n_tokens = split(cmd.n_list, ',');
  if (n_tokens.empty()) throw ValidationError("bias-study: --n-list must be nonempty");
  if (!cmd.h_list.empty()) {
    const auto h_tokens = split(cmd.h_list, ',');
    if (n_tokens.size() == 1) {
      const int n = parse_int(n_tokens[0], "n");
      for (const auto& ht : h_tokens) configs.emplace_back(n, parse_double(ht, "h"));
    } else if (n_tokens.size() == h_tokens.size()) {
      for (std::size_t i = 0; i < n_tokens.size(); ++i)
        configs.emplace_back(parse_int(n_tokens[i], "n"), parse_double(h_tokens[i], "h"));
    } else {
      throw ValidationError("bias-study: --h-list must have one entry or match --n-list");
    }
  } else {
    const BandwidthRule rule = cmd.bw.make_rule();
    for (const auto& nt : n_tokens) {
      const int n = parse_int(nt, "n");
      configs.emplace_back(n, rule.bandwidth(n));
    }
  }
  const BiasStudy study = bias_study(builtin_g(cmd.g), kernel, configs, cmd.queries_per_axis);
  std::fputs(study.to_string().c_str(), stdout);
  if (!cmd.out.empty()) {
    ensure_dir(cmd.out);
    std::ofstream csv(cmd.out + "/bias.csv");
    if (!csv) throw IoError("cannot open for writing: " + cmd.out + "/bias.csv");
    csv << study.to_string();
    std::vector<std::pair<std::string, std::string>> kv;
    cmd.kernel.canonical(kv);
    cmd.bw.canonical(kv);
    kv.emplace_back("g", cmd.g);
    kv.emplace_back("d", std::to_string(cmd.d));
    kv.emplace_back("n-list", cmd.n_list);
    kv.emplace_back("h-list", cmd.h_list);
    kv.emplace_back("queries-per-axis", std::to_string(cmd.queries_per_axis));
    kv.emplace_back("out", cmd.out);
    write_manifest(cmd.out, "bias-study", kv);
  }
  return 0;
}

int run_denoise(const DenoiseCmd& cmd) {
  if (cmd.demo.empty() == cmd.input.empty())
    throw ValidationError("denoise: give exactly one of --demo or --input");
  GrayImage original;
  if (!cmd.demo.empty()) {
    if (cmd.demo == "sinusoid")
      original = synth_sinusoid(cmd.n);
    else if (cmd.demo == "phantom")
      original = synth_phantom(cmd.n);
    else
      throw ValidationError("denoise: unknown demo '" + cmd.demo +
                            "' (available: sinusoid, phantom)");
  } else {
    original = read_pgm(cmd.input);
    if (original.width != original.height)
      throw ValidationError("denoise: input image must be square");
  }
  const int n = original.width;
  const FieldSpec noise = cmd.field.make_spec(2, cmd.seed);
  const Kernel kernel = cmd.kernel.make_kernel(2);
  const BandwidthRule rule = cmd.bw.make_rule();
  if (rule.form == BandwidthRule::Form::power_law) rule.require_clt_valid(2);

  DenoiseConfig config{kernel, rule.bandwidth(n), cmd.rho,
                       cmd.paper_faithful ? MeanPolicy::include_self : MeanPolicy::leave_one_out,
                       cmd.threshold, cmd.clamp_observations, cmd.use_true_noise, cmd.threads,
                       cmd.seed};
  const DenoiseResult result = denoise_experiment(original, noise, cmd.replicates, config);
  ensure_dir(cmd.out);
  write_denoise_outputs(result, cmd.out);
  write_pvalue_map_csv(result.map, cmd.out + "/pvalues.csv");

  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("demo", cmd.demo);
  kv.emplace_back("input", cmd.input);
  cmd.field.canonical(kv);
  cmd.kernel.canonical(kv);
  cmd.bw.canonical(kv);
  kv.emplace_back("n", std::to_string(cmd.n));
  kv.emplace_back("replicates", std::to_string(cmd.replicates));
  kv.emplace_back("rho", std::to_string(cmd.rho));
  kv.emplace_back("seed", std::to_string(cmd.seed));
  kv.emplace_back("paper-faithful", cmd.paper_faithful ? "true" : "false");
  kv.emplace_back("clamp-observations", cmd.clamp_observations ? "true" : "false");
  kv.emplace_back("true-noise", cmd.use_true_noise ? "true" : "false");
  kv.emplace_back("threshold", std::to_string(cmd.threshold));
  kv.emplace_back("out", cmd.out);
  kv.emplace_back("threads", std::to_string(cmd.threads));
  write_manifest(cmd.out, "denoise", kv);
  std::printf("denoise: interior fraction p>%.3g = %.4f (eta_hat=%.6g, h=%.6g) -> %s\n",
              cmd.threshold, result.interior_fraction_above, result.eta_hat,
              rule.bandwidth(n), cmd.out.c_str());
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Kernel regression on lattice designs with dependent stationary noise"};
  app.set_version_flag("--version", std::string("fieldreg ") + version);
  app.require_subcommand(0, 1);

  SimulateCmd sim;
  EstimateCmd est;
  EtaCmd eta;
  CheckCmd check;
  CltCmd clt;
  BiasCmd bias;
  DenoiseCmd den;

  app.set_config("--config", "",
                 "Config file: '[subcommand]' section with key=value lines; flags take precedence");

  auto add_common = [](CLI::App* sub, int* threads) {
    if (threads)
      sub->add_option("--threads", *threads, "Worker threads (0 = all cores)")
          ->capture_default_str();
    sub->fallthrough();  // lets --config (a root option) appear after the subcommand
  };

  {
    auto* sub = app.add_subcommand("simulate-field", "Simulate a stationary noise field");
    sim.field.add_options(sub);
    sub->add_option("--n", sim.n, "Lattice points per axis")->required();
    sub->add_option("--d", sim.d, "Lattice dimension")->capture_default_str();
    sub->add_option("--seed", sim.seed, "Root seed")->capture_default_str();
    sub->add_option("--format", sim.format, "Output format: bin | csv | both")
        ->capture_default_str();
    sub->add_option("--out", sim.out, "Output directory")->required();
    add_common(sub, &sim.threads);
  }
  {
    auto* sub = app.add_subcommand("estimate", "Kernel regression fit of observations");
    sub->add_option("--in", est.in, "Observations (field binary file)")->required();
    est.kernel.add_options(sub);
    est.bw.add_options(sub);
    sub->add_option("--queries", est.queries,
                    "Query points: d=1 '0.3,0.7'; d>1 '0.3,0.4;0.7,0.2'");
    sub->add_flag("--grid", est.grid, "Estimate at every design point");
    sub->add_option("--out", est.out, "Output directory")->required();
    add_common(sub, &est.threads);
  }
  {
    auto* sub = app.add_subcommand("eta", "Long-run variance estimate from a field");
    sub->add_option("--in", eta.in, "Residual/noise field (binary)")->required();
    sub->add_option("--rho", eta.rho, "Pairing radius (-1 = floor(n^(1/4)))")
        ->capture_default_str();
    sub->add_option("--out", eta.out, "Optional output directory")->capture_default_str();
    add_common(sub, &eta.threads);
  }
  {
    auto* sub = app.add_subcommand("check-condition", "Numerical summability checks");
    sub->add_option("--criterion", check.criterion, "quantile | mixing-rate")
        ->capture_default_str();
    sub->add_option("--alpha", check.alpha, "Mixing rate: exp:RATE | poly:Q | mdep:M | file:PATH")
        ->capture_default_str();
    sub->add_option("--quantile", check.quantile, "gaussian | bounded:M | file:PATH")
        ->capture_default_str();
    sub->add_option("--delta", check.delta, "Moment order delta (mixing-rate criterion)")
        ->capture_default_str();
    sub->add_option("--d", check.d, "Lattice dimension")->capture_default_str();
    sub->add_option("--max-radius", check.max_radius, "Truncation radius")->capture_default_str();
    sub->add_option("--out", check.out, "Optional output directory")->capture_default_str();
    add_common(sub, nullptr);
  }
  {
    auto* sub = app.add_subcommand("clt-study", "Monte Carlo normality validation");
    clt.field.add_options(sub);
    clt.kernel.add_options(sub);
    clt.bw.add_options(sub);
    sub->add_option("--g", clt.g, "Regression function: sin | linear | constant")
        ->capture_default_str();
    sub->add_option("--n", clt.n, "Lattice points per axis")->required();
    sub->add_option("--d", clt.d, "Lattice dimension")->capture_default_str();
    sub->add_option("--queries", clt.queries, "Interior query points")->capture_default_str();
    sub->add_option("--reps", clt.reps, "Monte Carlo replicates")->capture_default_str();
    sub->add_option("--ks-alpha", clt.ks_alpha, "KS test level (0.10/0.05/0.025/0.01)")
        ->capture_default_str();
    sub->add_option("--seed", clt.seed, "Root seed")->capture_default_str();
    sub->add_option("--out", clt.out, "Optional output directory")->capture_default_str();
    add_common(sub, &clt.threads);
  }
  {
    auto* sub = app.add_subcommand("bias-study", "Noiseless E g_n - g rate study");
    bias.kernel.add_options(sub);
    bias.bw.add_options(sub);
    sub->add_option("--g", bias.g, "Regression function: sin | linear | constant")
        ->capture_default_str();
    sub->add_option("--d", bias.d, "Dimension")->capture_default_str();
    sub->add_option("--n-list", bias.n_list, "Comma-separated lattice sizes")
        ->capture_default_str();
    sub->add_option("--h-list", bias.h_list, "Comma-separated bandwidths (overrides the rule)")
        ->capture_default_str();
    sub->add_option("--queries-per-axis", bias.queries_per_axis, "Interior query grid resolution")
        ->capture_default_str();
    sub->add_option("--out", bias.out, "Optional output directory")->capture_default_str();
    add_common(sub, nullptr);
  }
  {
    auto* sub = app.add_subcommand("denoise", "Noise injection, restoration, p-value map");
    sub->add_option("--demo", den.demo,
                    "Built-in test image: sinusoid (smooth) | phantom (piecewise continuous)");
    sub->add_option("--input", den.input, "Input PGM (P5) image");
    den.field = FieldOptions{};
    den.field.field = "exp";
    den.field.cst = 200.0;
    den.field.range = 1.0;
    den.field.add_options(sub);
    den.kernel.add_options(sub);
    den.bw.add_options(sub);
    sub->add_option("--n", den.n, "Demo image size")->capture_default_str();
    sub->add_option("--replicates", den.replicates, "Reference replicate count R")
        ->capture_default_str();
    sub->add_option("--rho", den.rho, "Pairing radius for eta (-1 = default rule)")
        ->capture_default_str();
    sub->add_option("--seed", den.seed, "Root seed")->capture_default_str();
    sub->add_flag("--paper-faithful", den.paper_faithful,
                  "Include-self reference mean without inflation correction");
    sub->add_flag("--clamp-observations", den.clamp_observations,
                  "Clamp noisy pixels to [0,255] before fitting");
    sub->add_flag("--true-noise", den.use_true_noise,
                  "Use the simulated noise (not residuals) for eta");
    sub->add_option("--threshold", den.threshold, "p-value threshold for the summary fraction")
        ->capture_default_str();
    sub->add_option("--out", den.out, "Output directory")->required();
    add_common(sub, &den.threads);
  }

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  static const char* prog = "fieldreg";
  argv.push_back(prog);
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }

  try {
    const auto parsed = app.get_subcommands();
    if (parsed.empty()) {
      std::cerr << "error: a subcommand is required (see --help)" << std::endl;
      return 2;
    }
    const std::string name = parsed.front()->get_name();
    if (name == "simulate-field") return run_simulate(sim);
    if (name == "estimate") return run_estimate(est);
    if (name == "eta") return run_eta(eta);
    if (name == "check-condition") return run_check(check);
    if (name == "clt-study") return run_clt(clt);
    if (name == "bias-study") return run_bias(bias);
    if (name == "denoise") return run_denoise(den);
    std::cerr << "error: unknown subcommand '" << name << "'" << std::endl;
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}

}  // namespace fieldreg::cli
