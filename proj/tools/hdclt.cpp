// hdclt: command-line front end. Flags override keys from --config.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hdclt/cli.hpp"

namespace {

struct Flag {
  const char* name;
  const char* key;
  const char* help;
};

const std::vector<Flag> kFamilyFlags = {
    {"--family", "family.base", "gaussian, rademacher, laplace, subweibull or student_t"},
    {"--p", "family.p", "dimension"},
    {"--cov", "family.cov.kind", "diagonal, equicorrelated or dense"},
    {"--cov-params", "family.cov.params", "variances, 'rho, sigma2' or row-major matrix"},
    {"--alpha-sw", "family.alpha", "sub-Weibull index"},
    {"--df", "family.df", "Student t degrees of freedom"},
};

const std::vector<Flag> kConstantFlags = {
    {"--C0", "C0", "derivative-sum constant"},
    {"--frakC", "frakC", "ratio-stability exponent"},
    {"--theta-policy", "theta_policy", "numeric or symbolic"},
    {"--slack", "slack", "structural slack multiplier"},
};

std::map<std::string, std::vector<Flag>> subcommand_flags() {
  std::map<std::string, std::vector<Flag>> f;
  f["constants"] = {{"--theorem", "theorem", "T31, E32, P32, T33, T34, T35, C36a/b, C37a/b/c/r, RMK38, APPA, T51, C52"},
                    {"--n", "n", "sample size"},
                    {"--m", "m", "moment weight"},
                    {"--tau", "tau", "moment excess"},
                    {"--r", "r", "level"},
                    {"--H", "H", "exponential-moment scale"},
                    {"--beta", "beta", "moment-convergence exponent"},
                    {"--r-nm", "r_nm", "threshold for the remote tail"},
                    {"--tail-sup", "tail_sup", "bound on the remote weighted tail"}};
  f["anticonc"] = {{"--reps", "reps", "replicates"},
                   {"--m-list", "m_list", "moment weights"},
                   {"--eps-list", "eps_list", "band half-widths"},
                   {"--r-grid", "r_grid", "levels"}};
  f["smoothmax-check"] = {{"--r", "r", "level"},
                          {"--eps", "eps", "smoothing width"},
                          {"--p", "p", "dimension"},
                          {"--samples", "samples", "points for derivative sums"},
                          {"--pairs", "pairs", "pairs for ratio stability"}};
  f["simulate-delta"] = {{"--n", "n", "sample size"},
                         {"--m", "m", "moment weight"},
                         {"--reps", "reps", "replicates"},
                         {"--grid", "grid", "pooled or quantiles"},
                         {"--gaussian-mc", "gaussian_mc", "1 to simulate the Gaussian side"},
                         {"--compare", "compare", "theorems to compare against, or none"}};
  f["lindeberg"] = {{"--n", "n", "sample size"},
                    {"--r", "r", "level"},
                    {"--reps", "reps", "replicates"},
                    {"--k-list", "k_list", "interpolation indices"}};
  f["large-dev"] = {{"--n", "n", "sample size"},
                    {"--reps", "reps", "replicates"},
                    {"--r-list", "r_list", "levels"},
                    {"--H", "H", "exponential-moment scale"}};
  f["moments"] = {{"--n", "n", "sample size"},
                  {"--m", "m", "moment order"},
                  {"--reps", "reps", "replicates"},
                  {"--beta", "beta", "moment-convergence exponent"}};
  f["posi"] = {{"--design", "design", "headerless n x d CSV"},
               {"--k", "k", "largest model size"},
               {"--alpha", "alpha", "levels, comma separated"},
               {"--reps", "reps", "replicates"},
               {"--var-y", "var_y", "error variance"}};
  f["empproc"] = {{"--n-list", "n_list", "sample sizes"},
                  {"--xi", "xi", "normal or student_t3"},
                  {"--reps", "reps", "replicates"}};
  return f;
}

bool uses_family(const std::string& sub) {
  return sub != "smoothmax-check" && sub != "posi" && sub != "empproc";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and bound calculators for max-norm Gaussian approximation"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out, format = "csv", config_path;
  bool json_flag = false;
  std::vector<std::string> sets;
  auto* seed_opt = app.add_option("--seed", seed, "random seed (default 0)");
  app.add_option("--workers", workers, "worker threads; does not change results");
  app.add_option("--out", out, "output directory");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--json", json_flag, "same as --format json");
  app.add_option("--config,--inputs", config_path, "key = value file, or an emitted summary JSON");
  app.add_option("--set", sets, "extra key=value overrides");

  std::map<std::string, std::string> values;
  const auto table = subcommand_flags();
  for (const auto& name : hdclt::cli::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
    auto flags = table.at(name);
    if (uses_family(name)) flags.insert(flags.end(), kFamilyFlags.begin(), kFamilyFlags.end());
    flags.insert(flags.end(), kConstantFlags.begin(), kConstantFlags.end());
    for (const auto& f : flags) sub->add_option(f.name, values[std::string(name) + "|" + f.key], f.help);
  }

  hdclt::cli::RunOptions opt;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << hdclt::cli::error_record(hdclt::Error(hdclt::ErrorKind::config, e.what())).dump(2) << "\n";
    return 2;
  }

  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    hdclt::Config config = config_path.empty() ? hdclt::Config{} : hdclt::cli::load_config(config_path);
    for (const auto& [k, v] : values) {
      const auto bar = k.find('|');
      if (k.substr(0, bar) == sub && !v.empty()) config.set(k.substr(bar + 1), v);
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw hdclt::Error(hdclt::ErrorKind::config, "--set expects key=value, got '" + s + "'");
      config.set(hdclt::detail::trim(s.substr(0, eq)), hdclt::detail::trim(s.substr(eq + 1)));
    }
    if (seed_opt->count()) config.set("seed", std::to_string(seed));
    opt.workers = workers;
    opt.format = json_flag ? "json" : format;

    const auto artifacts = hdclt::cli::run(sub, config, opt);
    const auto files = hdclt::cli::render(artifacts, opt);
    if (out.empty()) {
      std::cout << artifacts.summary({opt.workers, "json"}).dump(2) << "\n";
    } else {
      hdclt::cli::write_files(out, files);
      std::cout << files.front().second;
    }
    return 0;
  } catch (const hdclt::Error& e) {
    std::cout << hdclt::cli::error_record(e).dump(2) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cout << hdclt::cli::error_record(hdclt::Error(hdclt::ErrorKind::io, e.what())).dump(2) << "\n";
    return 3;
  }
}
