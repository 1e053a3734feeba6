#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "flowembed/field.hpp"
#include "flowembed/kernel.hpp"
#include "flowembed/sparse.hpp"
#include "flowembed/spectral.hpp"

namespace flowembed {

/// Pipeline stage toggles. `lic` alone (lic_only) skips column
/// normalization, H, L, and the eigensolver.
struct StageSet {
  bool lic = true;
  bool embeddings = true;
  bool composite = true;
  bool volume = true;  // 3D volume artifacts (ignored for 2D domains)

  static StageSet from_string(const std::string& s);
  std::string to_string() const;
};

struct PipelineConfig {
  // field source: analytic name + params, or a FFLD1 file
  std::string field;
  std::map<std::string, double> field_params;
  std::string field_file;

  std::vector<std::int64_t> dims;   // required for analytic fields
  std::vector<double> spacing;      // default 1 per axis
  std::vector<double> origin;       // default: grid centered at 0

  KernelShape kernel = KernelShape::box;
  int half_length = 10;
  double step = 0.0;  // 0 = 0.5 * min spacing
  Parameterization param = Parameterization::arc_length;
  Deposition deposit = Deposition::multilinear;

  int eig_count = 6;       // k
  int select_count = 0;    // m; 0 = all non-constant
  double norm_p = 0.0;     // 0 = infinity norm
  double eig_tol = 1e-8;
  std::int64_t eig_max_iter = 0;  // 0 = solver default

  std::uint64_t seed = 1;
  std::string out_dir = "out";
  StageSet stages;
  int threads = 0;  // 0 = library default

  /// Flat key/value echo, sufficient to reconstruct the config.
  std::map<std::string, std::string> to_key_values() const;

  /// Inverse of to_key_values; unknown keys are rejected.
  static PipelineConfig from_key_values(const std::map<std::string, std::string>& kv);

  /// Throws std::invalid_argument listing offending/missing keys.
  void validate() const;

  VectorField make_field() const;
};

struct RunReport {
  std::map<std::string, std::string> entries;  // flat, insertion order lost; see lines
  std::vector<std::pair<std::string, std::string>> lines;  // ordered key/value

  void put(const std::string& key, const std::string& value);
  void put(const std::string& key, double value);
  void put(const std::string& key, std::int64_t value);
  std::string get(const std::string& key) const;

  /// Writes a flat JSON object, one key/value pair per line.
  void write(const std::string& path) const;
  static RunReport read(const std::string& path);
};

/// Executes the 8-step pipeline: trace/deposit -> row-normalize -> LIC ->
/// column-normalize -> H = P P^T -> L = D - H -> smallest eigenpairs ->
/// amplitude selection and compositing. Writes artifacts and report.txt to
/// cfg.out_dir.
RunReport run_pipeline(const PipelineConfig& cfg);

}  // namespace flowembed
