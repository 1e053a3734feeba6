// flowembed: discrete probabilistic dense-flow-visualization pipeline.
//
// Runs the 8-step pipeline (trace -> deposit -> row-normalize -> LIC ->
// column-normalize -> H = P P^T -> L = D - H -> eigenpairs), then amplitude
// selection and compositing, writing artifacts and a report to --out.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "flowembed/pipeline.hpp"

namespace {

// Config files are flat `key = value` lines; '#' starts a comment. Flags
// override file values.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cli: cannot open config file '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowembed: probabilistic dense flow visualization"};

  std::string config_file;
  std::map<std::string, std::string> kv;
  std::vector<std::string> field_params;

  std::string field, field_file, dims, spacing, origin, kernel, param, deposit, norm_p,
      out, stages;
  std::string half_length, step, k, m, seed, threads, eig_tol, eig_max_iter;

  app.add_option("--config", config_file, "config file with key = value lines");
  app.add_option("--field", field, "analytic field name");
  app.add_option("--field-param", field_params, "analytic field parameter name=value");
  app.add_option("--field-file", field_file, "FFLD1 grid field file");
  app.add_option("--dims", dims, "grid cells per axis, e.g. 64x64");
  app.add_option("--spacing", spacing, "cell size per axis, e.g. 1 or 1x0.5");
  app.add_option("--origin", origin, "cell (0,..) center per axis (default: centered)");
  app.add_option("--kernel", kernel, "box | gaussian | forward | backward");
  app.add_option("--half-length", half_length, "kernel half-length L");
  app.add_option("--step", step, "integration step (0 = 0.5 * min spacing)");
  app.add_option("--param", param, "trajectory parameterization: arc | time");
  app.add_option("--deposit", deposit, "deposition: nearest | multilinear");
  app.add_option("-k,--eigencount", k, "number of smallest eigenpairs");
  app.add_option("-m,--select", m, "embeddings composited (0 = all non-constant)");
  app.add_option("--norm-p", norm_p, "amplitude norm order (>= 1 or inf)");
  app.add_option("--eig-tol", eig_tol, "eigensolver residual tolerance");
  app.add_option("--eig-max-iter", eig_max_iter, "Lanczos step cap (0 = default)");
  app.add_option("--seed", seed, "RNG seed (all randomness flows from it)");
  app.add_option("--out", out, "output directory");
  app.add_option("--stages", stages, "all | lic_only | comma list of stages");
  app.add_option("--threads", threads, "worker pool size (default $FLOWEMBED_THREADS)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_file.empty()) kv = read_config_file(config_file);

    auto override_kv = [&](const std::string& key, const std::string& value) {
      if (!value.empty()) kv[key] = value;
    };
    override_kv("field", field);
    override_kv("field_file", field_file);
    override_kv("dims", dims);
    override_kv("spacing", spacing);
    override_kv("origin", origin);
    override_kv("kernel", kernel);
    override_kv("half_length", half_length);
    override_kv("step", step);
    override_kv("param", param);
    override_kv("deposit", deposit);
    override_kv("k", k);
    override_kv("m", m);
    override_kv("norm_p", norm_p);
    override_kv("eig_tol", eig_tol);
    override_kv("eig_max_iter", eig_max_iter);
    override_kv("seed", seed);
    override_kv("out", out);
    override_kv("stages", stages);
    for (const auto& fp : field_params) {
      const auto eq = fp.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("cli: --field-param expects name=value, got '" + fp + "'");
      kv["field_param." + fp.substr(0, eq)] = fp.substr(eq + 1);
    }
    if (!threads.empty()) {
      kv["threads"] = threads;
    } else if (kv.find("threads") == kv.end()) {
      if (const char* env = std::getenv("FLOWEMBED_THREADS")) kv["threads"] = env;
    }

    const flowembed::PipelineConfig cfg = flowembed::PipelineConfig::from_key_values(kv);
    const flowembed::RunReport report = flowembed::run_pipeline(cfg);
    std::cout << "flowembed: wrote " << cfg.out_dir << "/report.txt ("
              << report.get("total.seconds") << " s)\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "flowembed: error: " << e.what() << "\n";
    return 1;
  }
}
