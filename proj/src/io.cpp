#include "capcm/io.hpp"

#include "capcm/error.hpp"
#include "capcm/hessian_ops.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace capcm {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) throw ConfigError(where + ": bad number '" + s + "'");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  return os;
}

}  // namespace

ConfigMap parse_config(const std::string& text) {
  ConfigMap out;
  std::istringstream is(text);
  std::string line;
  int no = 0;
  while (std::getline(is, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key.find_first_of(" \t") != std::string::npos)
      throw ConfigError("line " + std::to_string(no) + ": bad key '" + key + "'");
    if (value.empty()) throw ConfigError("line " + std::to_string(no) + ": empty value for '" + key + "'");
    if (!out.emplace(key, value).second)
      throw ConfigError("line " + std::to_string(no) + ": duplicate key '" + key + "'");
  }
  return out;
}

ConfigMap load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

SampledData read_samples_csv(const std::filesystem::path& path, const std::string& column) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ConfigError(path.string() + ": empty file");
  const auto header = split(trim(line), ',');
  auto col = [&](const std::string& name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_rho = col("rho"), c_phi = col("phi"), c_val = col(column);
  if (c_rho < 0 || c_val < 0)
    throw ConfigError(path.string() + ": header needs columns rho and " + column);
  SampledData out;
  out.angular = c_phi >= 0;
  int no = 1;
  while (std::getline(is, line)) {
    ++no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw ConfigError(path.string() + ":" + std::to_string(no) + ": expected " + std::to_string(header.size()) +
                        " columns");
    const std::string where = path.string() + ":" + std::to_string(no);
    out.rho.push_back(parse_number(cells[c_rho], where));
    if (out.angular) out.phi.push_back(parse_number(cells[c_phi], where));
    out.value.push_back(parse_number(cells[c_val], where));
  }
  if (out.value.empty()) throw ConfigError(path.string() + ": no data rows");
  return out;
}

namespace {

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v)
    if (out.empty() || std::abs(x - out.back()) > 1e-12 * std::max(1.0, std::abs(x))) out.push_back(x);
  return out;
}

std::size_t locate(const std::vector<double>& grid, double x) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), x - 1e-12 * std::max(1.0, std::abs(x)));
  std::size_t i = static_cast<std::size_t>(it - grid.begin());
  if (i < grid.size() && std::abs(grid[i] - x) <= 1e-12 * std::max(1.0, std::abs(x))) return i;
  return grid.size();
}

}  // namespace

ScalarField interpolate(const SampledData& data, const DomainPtr& domain, bool capillary) {
  const auto& d = *domain;
  const bool full = d.mode() == GridMode::full2d;
  if (full && !data.angular) throw ConfigError("full2d grid needs CSV columns rho,phi,value");
  if (!full && data.angular) throw ConfigError("axisymmetric grid needs CSV columns rho,value");

  const auto R = unique_sorted(data.rho);
  const auto P = full ? unique_sorted(data.phi) : std::vector<double>{0.0};
  const std::size_t nr = R.size(), np = P.size();
  if (nr * np != data.value.size())
    throw ConfigError("CSV samples must form a tensor grid (" + std::to_string(nr) + " x " + std::to_string(np) +
                      " != " + std::to_string(data.value.size()) + ")");
  std::vector<double> table(nr * np, std::nan(""));
  for (std::size_t q = 0; q < data.value.size(); ++q) {
    const std::size_t a = locate(R, data.rho[q]);
    const std::size_t b = full ? locate(P, data.phi[q]) : 0;
    table[a * np + b] = data.value[q];
  }
  for (double v : table)
    if (std::isnan(v)) throw ConfigError("CSV samples must form a tensor grid (duplicates or holes)");
  if (nr < 2 || (full && np < 2)) throw ConfigError("CSV needs at least two samples per direction");
  for (double p : P)
    if (p < -1e-12 || p >= 2.0 * M_PI + 1e-12) throw ConfigError("CSV phi values must lie in [0, 2 pi)");

  Eigen::VectorXd v(static_cast<Eigen::Index>(d.size()));
  for (int j = 0; j < d.nr(); ++j) {
    const double r = d.rho(j);
    std::size_t a;
    double fa;
    const std::size_t exact_r = locate(R, r);
    if (exact_r < nr) {
      a = exact_r == nr - 1 ? nr - 2 : exact_r;
      fa = exact_r == nr - 1 ? 1.0 : 0.0;
    } else {
      const auto it = std::upper_bound(R.begin(), R.end(), r);
      a = it == R.begin() ? 0 : std::min<std::size_t>(static_cast<std::size_t>(it - R.begin()) - 1, nr - 2);
      fa = (r - R[a]) / (R[a + 1] - R[a]);
    }
    for (int i = 0; i < d.nphi(); ++i) {
      double val;
      auto row = [&](std::size_t rr, std::size_t pp) { return table[rr * np + pp]; };
      auto radial = [&](std::size_t pp) {
        return fa == 0.0 ? row(a, pp) : fa == 1.0 ? row(a + 1, pp) : (1.0 - fa) * row(a, pp) + fa * row(a + 1, pp);
      };
      if (!full) {
        val = radial(0);
      } else {
        const double ph = d.phi(i);
        const std::size_t exact_p = locate(P, ph);
        if (exact_p < np) {
          val = radial(exact_p);
        } else {
          const auto it = std::upper_bound(P.begin(), P.end(), ph);
          const bool wrap_low = it == P.begin();
          const std::size_t b0 = wrap_low ? np - 1 : static_cast<std::size_t>(it - P.begin()) - 1;
          const std::size_t b1 = (b0 + 1) % np;
          const double p0 = wrap_low ? P[b0] - 2.0 * M_PI : P[b0];
          const double p1 = b1 == 0 && !wrap_low ? P[0] + 2.0 * M_PI : P[b1];
          const double fb = (ph - p0) / (p1 - p0);
          val = (1.0 - fb) * radial(b0) + fb * radial(b1);
        }
      }
      v[static_cast<Eigen::Index>(d.index(j, i))] = val;
    }
  }
  return ScalarField(domain, std::move(v), capillary);
}

void write_samples_csv(const std::filesystem::path& path, const ScalarField& f) {
  const auto& d = f.domain();
  auto os = open_out(path);
  const bool full = d.mode() == GridMode::full2d;
  os << (full ? "rho,phi,value\n" : "rho,value\n");
  for (int j = 0; j < d.nr(); ++j)
    for (int i = 0; i < d.nphi(); ++i) {
      os << format_double(d.rho(j)) << ',';
      if (full) os << format_double(d.phi(i)) << ',';
      os << format_double(f.at(j, i)) << '\n';
    }
}

void write_solution_csv(const std::filesystem::path& path, const ScalarField& s, const ScalarField& residual) {
  const auto& d = s.domain();
  const auto lam = lambda_min_field(tau(s));
  auto os = open_out(path);
  os << "rho,phi,s,lambda_min,residual\n";
  for (int j = 0; j < d.nr(); ++j)
    for (int i = 0; i < d.nphi(); ++i) {
      const auto p = d.index(j, i);
      os << format_double(d.rho(j)) << ',' << format_double(d.phi(i)) << ',' << format_double(s[p]) << ','
         << format_double(lam[p]) << ',' << format_double(residual[p]) << '\n';
    }
}

void write_obj(const std::filesystem::path& path, const CapMesh& mesh) {
  if (mesh.vertices.cols() != 3) throw InvalidArgument("OBJ export needs a surface in R^3 (n = 2)");
  auto os = open_out(path);
  for (Eigen::Index v = 0; v < mesh.vertices.rows(); ++v)
    os << "v " << format_double(mesh.vertices(v, 0)) << ' ' << format_double(mesh.vertices(v, 1)) << ' '
       << format_double(mesh.vertices(v, 2)) << '\n';
  for (const auto* set : {&mesh.faces, &mesh.base_faces})
    for (const auto& f : *set) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

ObjMesh read_obj(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  ObjMesh out;
  std::string line;
  int no = 0;
  while (std::getline(is, line)) {
    ++no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(no);
    if (tag == "v") {
      std::array<std::string, 3> t;
      if (!(ls >> t[0] >> t[1] >> t[2])) throw ConfigError(where + ": bad vertex");
      out.vertices.push_back({parse_number(t[0], where), parse_number(t[1], where), parse_number(t[2], where)});
    } else if (tag == "f") {
      std::array<int, 3> f{};
      for (int& x : f) {
        std::string tok;
        if (!(ls >> tok)) throw ConfigError(where + ": bad face");
        x = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      out.faces.push_back(f);
    }
  }
  for (const auto& f : out.faces)
    for (int x : f)
      if (x < 0 || x >= static_cast<int>(out.vertices.size())) throw ConfigError(path.string() + ": face index out of range");
  return out;
}

}  // namespace capcm
