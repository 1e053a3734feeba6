#include "flowembed/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "flowembed/render.hpp"
#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowembed {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("pipeline: bad number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string join_x(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += "x";
    out += parts[i];
  }
  return out;
}

Parameterization param_from_string(const std::string& s) {
  if (s == "arc") return Parameterization::arc_length;
  if (s == "time") return Parameterization::time;
  throw std::invalid_argument("pipeline: unknown parameterization '" + s + "'");
}

std::string to_string(Parameterization p) {
  return p == Parameterization::arc_length ? "arc" : "time";
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Rescale a vector affinely to [0,1].
std::vector<double> rescale01(std::span<const double> v) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.begin(), v.end());
  if (*mx > *mn) {
    for (auto& x : out) x = (x - *mn) / (*mx - *mn);
  } else {
    for (auto& x : out) x = 0.5;
  }
  return out;
}

RenderVolume to_volume(const Domain& d, std::span<const double> values, int channels) {
  RenderVolume vol;
  vol.dims = {d.dims[0], d.dims[1], d.ndim == 3 ? d.dims[2] : 1};
  vol.channels = channels;
  vol.samples.assign(values.begin(), values.end());
  return vol;
}

void export_volume_with_slices(const RenderVolume& vol, const std::string& stem) {
  export_volume(vol, stem + ".vol");
  const char* axes = "xyz";
  for (int a = 0; a < 3; ++a) {
    const RenderImage slice = volume_mid_slice(vol, a);
    export_image(slice, stem + std::string("_slice_") + axes[a] +
                            (vol.channels == 3 ? ".ppm" : ".pgm"));
  }
}

}  // namespace

StageSet StageSet::from_string(const std::string& s) {
  StageSet set;
  if (s == "all" || s.empty()) return set;
  set = {false, false, false, false};
  if (s == "lic_only") {
    set.lic = true;
    return set;
  }
  for (const std::string& tok : split(s, ',')) {
    if (tok == "lic") set.lic = true;
    else if (tok == "embeddings") set.embeddings = true;
    else if (tok == "composite") set.composite = true;
    else if (tok == "volume") set.volume = true;
    else throw std::invalid_argument("pipeline: unknown stage '" + tok + "'");
  }
  return set;
}

std::string StageSet::to_string() const {
  if (lic && embeddings && composite && volume) return "all";
  if (lic && !embeddings && !composite && !volume) return "lic_only";
  std::vector<std::string> toks;
  if (lic) toks.push_back("lic");
  if (embeddings) toks.push_back("embeddings");
  if (composite) toks.push_back("composite");
  if (volume) toks.push_back("volume");
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) out += (i ? "," : "") + toks[i];
  return out;
}

std::map<std::string, std::string> PipelineConfig::to_key_values() const {
  std::map<std::string, std::string> kv;
  kv["field"] = field;
  kv["field_file"] = field_file;
  for (const auto& [name, value] : field_params)
    kv["field_param." + name] = format_double(value);
  {
    std::vector<std::string> parts;
    for (auto d : dims) parts.push_back(std::to_string(d));
    kv["dims"] = join_x(parts);
  }
  {
    std::vector<std::string> parts;
    for (auto s : spacing) parts.push_back(format_double(s));
    kv["spacing"] = join_x(parts);
  }
  {
    std::vector<std::string> parts;
    for (auto o : origin) parts.push_back(format_double(o));
    kv["origin"] = join_x(parts);
  }
  kv["kernel"] = flowembed::to_string(kernel);
  kv["half_length"] = std::to_string(half_length);
  kv["step"] = format_double(step);
  kv["param"] = to_string(param);
  kv["deposit"] = flowembed::to_string(deposit);
  kv["k"] = std::to_string(eig_count);
  kv["m"] = std::to_string(select_count);
  kv["norm_p"] = std::isinf(norm_p) ? "inf" : format_double(norm_p);
  kv["eig_tol"] = format_double(eig_tol);
  kv["eig_max_iter"] = std::to_string(eig_max_iter);
  kv["seed"] = std::to_string(seed);
  kv["out"] = out_dir;
  kv["stages"] = stages.to_string();
  kv["threads"] = std::to_string(threads);
  return kv;
}

PipelineConfig PipelineConfig::from_key_values(
    const std::map<std::string, std::string>& kv) {
  PipelineConfig cfg;
  cfg.spacing.clear();
  cfg.origin.clear();
  std::vector<std::string> unknown;
  for (const auto& [key, value] : kv) {
    if (key == "field") cfg.field = value;
    else if (key == "field_file") cfg.field_file = value;
    else if (key.starts_with("field_param."))
      cfg.field_params[key.substr(12)] = parse_double(value);
    else if (key == "dims") {
      cfg.dims.clear();
      if (!value.empty())
        for (const auto& p : split(value, 'x')) cfg.dims.push_back(std::stoll(p));
    } else if (key == "spacing") {
      if (!value.empty())
        for (const auto& p : split(value, 'x')) cfg.spacing.push_back(parse_double(p));
    } else if (key == "origin") {
      if (!value.empty())
        for (const auto& p : split(value, 'x')) cfg.origin.push_back(parse_double(p));
    } else if (key == "kernel") cfg.kernel = kernel_shape_from_string(value);
    else if (key == "half_length") cfg.half_length = std::stoi(value);
    else if (key == "step") cfg.step = parse_double(value);
    else if (key == "param") cfg.param = param_from_string(value);
    else if (key == "deposit") cfg.deposit = deposition_from_string(value);
    else if (key == "k") cfg.eig_count = std::stoi(value);
    else if (key == "m") cfg.select_count = std::stoi(value);
    else if (key == "norm_p") cfg.norm_p = value == "inf" ? 0.0 : parse_double(value);
    else if (key == "eig_tol") cfg.eig_tol = parse_double(value);
    else if (key == "eig_max_iter") cfg.eig_max_iter = std::stoll(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "stages") cfg.stages = StageSet::from_string(value);
    else if (key == "threads") cfg.threads = std::stoi(value);
    else unknown.push_back(key);
  }
  if (!unknown.empty()) {
    std::string msg = "pipeline: unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw std::invalid_argument(msg);
  }
  return cfg;
}

void PipelineConfig::validate() const {
  std::vector<std::string> problems;
  if (field.empty() && field_file.empty())
    problems.push_back("one of field/field_file is required");
  if (!field.empty() && !field_file.empty())
    problems.push_back("field and field_file are mutually exclusive");
  if (field_file.empty()) {
    if (dims.size() != 2 && dims.size() != 3)
      problems.push_back("dims (2 or 3 axes) required for analytic fields");
    for (auto d : dims)
      if (d < 2) problems.push_back("dims entries must be >= 2");
  }
  if (!spacing.empty() && !dims.empty() && spacing.size() != dims.size() &&
      spacing.size() != 1)
    problems.push_back("spacing must have one entry or match dims");
  if (half_length < 0) problems.push_back("half_length must be >= 0");
  if (step < 0.0) problems.push_back("step must be >= 0 (0 = auto)");
  if (eig_count < 1) problems.push_back("k must be >= 1");
  if (select_count < 0) problems.push_back("m must be >= 0 (0 = all)");
  if (norm_p != 0.0 && norm_p < 1.0) problems.push_back("norm_p must be >= 1 or inf");
  if (!problems.empty()) {
    std::string msg = "pipeline: invalid config:";
    for (const auto& p : problems) msg += " [" + p + "]";
    throw std::invalid_argument(msg);
  }
}

VectorField PipelineConfig::make_field() const {
  if (!field_file.empty()) return load_grid_field(field_file);
  Domain d;
  d.ndim = int(dims.size());
  for (std::size_t a = 0; a < dims.size(); ++a) {
    d.dims[a] = dims[a];
    d.spacing[a] = spacing.empty() ? 1.0 : spacing[spacing.size() == 1 ? 0 : a];
    // Default origin centers the grid on the coordinate origin.
    d.origin[a] = origin.empty() ? -0.5 * double(d.dims[a] - 1) * d.spacing[a]
                                 : origin[origin.size() == 1 ? 0 : a];
  }
  return make_analytic(field, field_params, d);
}

// ---------------------------------------------------------------------------

void RunReport::put(const std::string& key, const std::string& value) {
  entries[key] = value;
  lines.emplace_back(key, value);
}
void RunReport::put(const std::string& key, double value) { put(key, format_double(value)); }
void RunReport::put(const std::string& key, std::int64_t value) {
  put(key, std::to_string(value));
}

std::string RunReport::get(const std::string& key) const {
  auto it = entries.find(key);
  if (it == entries.end()) throw std::out_of_range("report: missing key '" + key + "'");
  return it->second;
}

void RunReport::write(const std::string& path) const {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : lines) j[k] = v;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot open '" + path + "' for writing");
  out << j.dump(1) << "\n";
}

RunReport RunReport::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("report: cannot open '" + path + "'");
  nlohmann::ordered_json j;
  in >> j;
  RunReport r;
  for (const auto& [k, v] : j.items()) r.put(k, v.get<std::string>());
  return r;
}

// ---------------------------------------------------------------------------

RunReport run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
  fs::create_directories(cfg.out_dir);
  const auto out_path = [&](const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
  };

  RunReport report;
  for (const auto& [k, v] : cfg.to_key_values()) report.put("config." + k, v);
#ifdef _OPENMP
  report.put("threads.used", std::int64_t(omp_get_max_threads()));
#else
  report.put("threads.used", std::int64_t(1));
#endif

  const auto t_total = Clock::now();
  std::string stage = "setup";
  try {
    const VectorField field = cfg.make_field();
    const Domain& domain = field.domain();
    const bool is3d = domain.ndim == 3;
    const double step = cfg.step > 0.0 ? cfg.step : default_step(domain);
    report.put("resolved.step", step);

    // Steps 1-3: trace and deposit.
    stage = "assemble";
    auto t0 = Clock::now();
    AssemblyConfig acfg{make_kernel(cfg.kernel, cfg.half_length), step, cfg.param,
                        cfg.deposit};
    SparseMatrix p = assemble_probability_matrix(field, acfg);
    report.put("stage.assemble.seconds", seconds_since(t0));
    report.put("matrix.P.nnz", p.nnz());

    // Step 4: row normalization.
    stage = "row_normalize";
    t0 = Clock::now();
    const SparseMatrix p_row = normalize_rows(p);
    p = SparseMatrix{};
    report.put("stage.row_normalize.seconds", seconds_since(t0));

    // Optional LIC output.
    const std::uint64_t noise_seed = cfg.seed;
    report.put("noise.seed", std::int64_t(noise_seed));
    std::vector<double> lic;
    if (cfg.stages.lic) {
      stage = "lic";
      t0 = Clock::now();
      const std::vector<double> noise = binary_noise_vector(domain.cell_count(), noise_seed);
      lic = spmv(p_row, noise);
      const std::vector<double> lic_eq = histogram_equalize(std::span<const double>(lic));
      if (is3d) {
        export_volume_with_slices(to_volume(domain, noise, 1), out_path("noise"));
        export_volume_with_slices(to_volume(domain, lic, 1), out_path("lic"));
        export_volume_with_slices(to_volume(domain, lic_eq, 1), out_path("lic_eq"));
      } else {
        RenderImage img{domain.dims[0], domain.dims[1], 1, noise};
        export_image(img, out_path("noise.pgm"));
        img.samples = lic;
        export_image(img, out_path("lic.pgm"));
        img.samples = lic_eq;
        export_image(img, out_path("lic_eq.pgm"));
      }
      report.put("stage.lic.seconds", seconds_since(t0));
    }

    if (!cfg.stages.embeddings && !cfg.stages.composite && !cfg.stages.volume) {
      report.put("total.seconds", seconds_since(t_total));
      report.write(out_path("report.txt"));
      return report;
    }

    // Step 5: column normalization (Bayes transition).
    stage = "col_normalize";
    t0 = Clock::now();
    const SparseMatrix p_col = normalize_cols(p_row);
    report.put("stage.col_normalize.seconds", seconds_since(t0));

    // Step 6: mixture matrix H = P P^T.
    stage = "mixture";
    t0 = Clock::now();
    const SparseMatrix h = mixture_matrix(p_col);
    report.put("stage.mixture.seconds", seconds_since(t0));
    report.put("matrix.H.nnz", h.nnz());

    // Step 7: Laplacian L = D - H.
    stage = "laplacian";
    t0 = Clock::now();
    const SparseMatrix l = laplacian(h);
    report.put("stage.laplacian.seconds", seconds_since(t0));
    report.put("matrix.L.nnz", l.nnz());

    // Step 8: smallest eigenpairs.
    stage = "eigensolve";
    t0 = Clock::now();
    SpectralOptions sopts;
    sopts.tol = cfg.eig_tol;
    sopts.max_iter = cfg.eig_max_iter;
    sopts.seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;  // derived, still config-driven
    report.put("lanczos.seed", std::int64_t(sopts.seed));
    EmbeddingSet set = smallest_eigenpairs(l, cfg.eig_count, sopts);
    set.domain = domain;
    report.put("stage.eigensolve.seconds", seconds_since(t0));
    report.put("eigen.count", std::int64_t(set.pairs.size()));
    if (set.disconnected_warning) report.put("warning.disconnected", "true");

    // Amplitude selection.
    stage = "select";
    const double p_norm =
        cfg.norm_p == 0.0 ? std::numeric_limits<double>::infinity() : cfg.norm_p;
    const int want = cfg.select_count > 0 ? cfg.select_count
                                          : std::max(1, int(set.pairs.size()) - 1);
    const std::vector<int> selected = select_eigenvectors(set, want, p_norm);
    for (std::size_t i = 0; i < set.pairs.size(); ++i) {
      report.put("eigen." + std::to_string(i) + ".value", set.pairs[i].value);
      report.put("eigen." + std::to_string(i) + ".residual", set.pairs[i].residual);
      report.put("eigen." + std::to_string(i) + ".amplitude", set.amplitudes[i]);
    }
    {
      std::string sel;
      for (std::size_t i = 0; i < selected.size(); ++i)
        sel += (i ? "," : "") + std::to_string(selected[std::size_t(i)]);
      report.put("selected.indices", sel);
    }

    // Render artifacts.
    stage = "render";
    t0 = Clock::now();
    if (cfg.stages.embeddings) {
      save_embeddings(set, out_path("embeddings.emb1"));
      for (std::size_t i = 0; i < set.pairs.size(); ++i) {
        const std::vector<double> scaled = rescale01(set.pairs[i].vector);
        const std::string stem = "embedding_" + std::to_string(i);
        if (is3d) {
          if (cfg.stages.volume)
            export_volume_with_slices(to_volume(domain, scaled, 1), out_path(stem));
        } else {
          RenderImage img{domain.dims[0], domain.dims[1], 3, {}};
          img.samples.resize(scaled.size() * 3);
          for (std::size_t t = 0; t < scaled.size(); ++t) {
            const auto rgb = viridis(scaled[t]);
            for (int c = 0; c < 3; ++c) img.samples[3 * t + std::size_t(c)] = rgb[std::size_t(c)];
          }
          if (!lic.empty()) {
            RenderImage backdrop{domain.dims[0], domain.dims[1], 1, lic};
            modulate_luminance(img, backdrop);
          }
          export_image(img, out_path(stem + ".ppm"));
        }
      }
    }
    if (cfg.stages.composite && !selected.empty()) {
      std::vector<std::span<const double>> vecs;
      TransferFunction tf;
      for (int idx : selected) {
        vecs.emplace_back(set.pairs[std::size_t(idx)].vector);
        tf.weights.push_back(set.amplitudes[std::size_t(idx)]);
      }
      if (is3d) {
        // Cluster the composited scalar into regions separated by the largest
        // value jumps and color regions by index.
        const std::vector<double> s = composite_scalar(vecs, tf.weights);
        const std::vector<double> thresholds =
            segment_thresholds(s, int(selected.size()));
        const std::vector<int> regions = segment_regions(s, thresholds);
        const int nregions = int(thresholds.size()) + 1;
        RenderVolume vol;
        vol.dims = {domain.dims[0], domain.dims[1], domain.dims[2]};
        vol.channels = 3;
        vol.samples.resize(s.size() * 3);
        for (std::size_t t = 0; t < s.size(); ++t) {
          const double u = nregions > 1 ? double(regions[t]) / double(nregions - 1) : 0.5;
          const auto rgb = viridis(u);
          for (int c = 0; c < 3; ++c)
            vol.samples[3 * t + std::size_t(c)] = float(rgb[std::size_t(c)]);
        }
        export_volume_with_slices(vol, out_path("composite"));
      } else {
        RenderImage img = composite_transfer(vecs, tf, domain);
        if (!lic.empty()) {
          RenderImage backdrop{domain.dims[0], domain.dims[1], 1, lic};
          modulate_luminance(img, backdrop);
        }
        export_image(img, out_path("composite.ppm"));
      }
    }
    report.put("stage.render.seconds", seconds_since(t0));
    report.put("total.seconds", seconds_since(t_total));
    report.write(out_path("report.txt"));
    return report;
  } catch (const NotConvergedError& e) {
    throw std::runtime_error("pipeline: stage '" + stage + "' failed: " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("pipeline: stage '" + stage + "' failed: " + e.what());
  }
}

}  // namespace flowembed
