#pragma once

// Text formats: flat `key = value` configs, field CSVs and OBJ meshes.

#include "capcm/cap_domain.hpp"
#include "capcm/support_geometry.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace capcm {

/// 17 significant digits.
std::string format_double(double v);

/// Ordered key -> value map of a config file.  Lines are `key = value`; `#` starts a comment.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(const std::string& text);
ConfigMap load_config(const std::filesystem::path& path);

/// Scattered samples read from a CSV: rho,phi,value (full2d) or rho,value (axisym).
struct SampledData {
  bool angular = false;
  std::vector<double> rho;
  std::vector<double> phi;
  std::vector<double> value;
};

/// Reads the named value column (default "value"); throws ConfigError on malformed input.
SampledData read_samples_csv(const std::filesystem::path& path, const std::string& column = "value");

/// Bilinear interpolation onto the domain nodes (periodic in phi, linear extrapolation in rho).
/// Samples on the domain's own node set are copied exactly.
ScalarField interpolate(const SampledData& data, const DomainPtr& domain, bool capillary);

/// rho,phi,value (full2d) or rho,value (axisym).
void write_samples_csv(const std::filesystem::path& path, const ScalarField& f);

/// rho,phi,s,lambda_min,residual.
void write_solution_csv(const std::filesystem::path& path, const ScalarField& s, const ScalarField& residual);

void write_obj(const std::filesystem::path& path, const CapMesh& mesh);

struct ObjMesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<int, 3>> faces;  // 0-based
};

ObjMesh read_obj(const std::filesystem::path& path);

}  // namespace capcm
