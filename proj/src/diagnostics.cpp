#include "vfl/diagnostics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "vfl/error.hpp"

namespace vfl {

namespace {

int wrap(int j, int n) {
  const int r = j % n;
  return r < 0 ? r + n : r;
}

// X ^ X_s at any integer node index, following the boundary map.
class DensityAt {
 public:
  explicit DensityAt(const Filament& f) : f_(f), xs_(derivative_fields(f).xs) {}

  Vec3 operator()(int j) const {
    const int n = f_.size();
    const int r = wrap(j, n);
    const int periods = (j - r) / n;
    Vec3 xs = xs_[static_cast<std::size_t>(r)];
    if (is_mirror(f_.boundary) && periods % 2 != 0) xs = mirror_d(xs);
    return cross(node_at(f_, j), xs);
  }

 private:
  const Filament& f_;
  std::vector<Vec3> xs_;
};

double wrapped_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

double swap_if_big_endian(double v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto u = std::bit_cast<std::uint64_t>(v);
    u = __builtin_bswap64(u);
    return std::bit_cast<double>(u);
  } else {
    return v;
  }
}

std::filesystem::path data_path_for(const std::filesystem::path& header, const nlohmann::json& j) {
  if (j.contains("data_file")) {
    std::filesystem::path p = j.at("data_file").get<std::string>();
    return p.is_absolute() ? p : header.parent_path() / p;
  }
  auto p = header;
  p.replace_extension(".bin");
  return p;
}

}  // namespace

std::vector<Vec3> impulse_density(const Filament& f) {
  const auto xs = derivative_fields(f).xs;
  std::vector<Vec3> g(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) g[j] = cross(f.nodes[j], xs[j]);
  return g;
}

Vec3 fluid_impulse(const Filament& f, double l) {
  if (!(l >= 0.0) || l > kTwoPi * (1.0 + 1e-12)) {
    throw std::invalid_argument("fluid_impulse: window length must lie in [0, 2pi]");
  }
  const DensityAt g(f);
  const double a = -0.5 * l / f.h();
  const double b = 0.5 * l / f.h();
  Vec3 acc{};
  for (int m = static_cast<int>(std::floor(a)); m < b; ++m) {
    const double lo = std::max<double>(a, m);
    const double hi = std::min<double>(b, m + 1);
    if (hi <= lo) continue;
    const double theta = 0.5 * (lo + hi) - m;
    acc += (hi - lo) * ((1.0 - theta) * g(m) + theta * g(m + 1));
  }
  return 0.5 * f.h() * acc;
}

Vec3 fluid_impulse(const Filament& f) {
  Vec3 acc{};
  for (const auto& v : impulse_density(f)) acc += v;
  return 0.5 * f.h() * acc;
}

Vec3 loop_impulse(const Filament& f) {
  if (!is_mirror(f.boundary)) throw std::invalid_argument("loop_impulse: filament is not mirror-antisymmetric");
  const Vec3 p = fluid_impulse(f);
  return p + mirror_d(p);
}

SliceProfile sliced_impulse_by_coordinate(const Filament& f, double dq) {
  if (!(dq > 0.0)) throw std::invalid_argument("sliced_impulse_by_coordinate: dq must be positive");
  const auto g = impulse_density(f);
  long kmin = 0;
  long kmax = -1;
  std::vector<long> bin(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    bin[j] = static_cast<long>(std::floor(f.nodes[j].x3 / dq));
    if (j == 0 || bin[j] < kmin) kmin = bin[j];
    if (j == 0 || bin[j] > kmax) kmax = bin[j];
  }
  SliceProfile p;
  const auto bins = static_cast<std::size_t>(kmax - kmin + 1);
  p.vectors.assign(bins, Vec3{});
  for (std::size_t j = 0; j < g.size(); ++j) {
    p.vectors[static_cast<std::size_t>(bin[j] - kmin)] += 0.5 * f.h() * g[j];
  }
  for (std::size_t b = 0; b < bins; ++b) {
    p.q.push_back(static_cast<double>(kmin + static_cast<long>(b)) * dq);
    p.moduli.push_back(norm(p.vectors[b]));
  }
  return p;
}

SliceProfile sliced_impulse_by_parameter(const Filament& f, double dq) {
  if (!(dq > 0.0) || dq > kTwoPi * (1.0 + 1e-12)) {
    throw std::invalid_argument("sliced_impulse_by_parameter: dq must lie in (0, 2pi]");
  }
  const auto g = impulse_density(f);
  const auto bins = static_cast<std::size_t>(std::max(1.0, std::ceil(kTwoPi / dq - 1e-9)));
  SliceProfile p;
  p.vectors.assign(bins, Vec3{});
  for (int j = 0; j < f.size(); ++j) {
    auto b = static_cast<std::size_t>(std::floor(f.grid.s(j) / dq + 1e-9));
    b = std::min(b, bins - 1);
    p.vectors[b] += 0.5 * f.h() * g[static_cast<std::size_t>(j)];
  }
  for (std::size_t b = 0; b < bins; ++b) {
    p.q.push_back(static_cast<double>(b) * dq);
    p.moduli.push_back(norm(p.vectors[b]));
  }
  return p;
}

double curvature_mass_fraction(const Filament& f, std::span<const double> stations, double half_width,
                               int chord_stride) {
  const int n = f.size();
  if (chord_stride < 1 || n % chord_stride != 0) {
    throw std::invalid_argument("curvature_mass_fraction: chord stride must divide the node count");
  }
  std::vector<double> angle;
  if (chord_stride == 1) {
    angle = turning_angles(f);
  } else {
    // Turning between successive chords of the polygon through every m-th node.
    const int m = chord_stride;
    angle.assign(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; j += m) {
      const Vec3 a = node_at(f, j) - node_at(f, j - m);
      const Vec3 b = node_at(f, j + m) - node_at(f, j);
      angle[static_cast<std::size_t>(j)] = std::atan2(norm(cross(a, b)), dot(a, b));
    }
  }
  double total = 0.0;
  double inside = 0.0;
  for (int j = 0; j < n; ++j) {
    const double a = angle[static_cast<std::size_t>(j)];
    if (a == 0.0) continue;
    total += a;
    for (double c : stations) {
      if (wrapped_distance(f.grid.s(j), c) <= half_width) {
        inside += a;
        break;
      }
    }
  }
  return total > 0.0 ? inside / total : 0.0;
}

void validate(const VorticityGrid& g) {
  if (g.nx <= 0 || g.ny <= 0 || g.nz <= 0) throw std::invalid_argument("VorticityGrid: dimensions must be positive");
  if (!(g.dx > 0.0) || !(g.dy > 0.0) || !(g.dz > 0.0)) {
    throw std::invalid_argument("VorticityGrid: spacings must be positive");
  }
  if (g.omega.size() != 3 * g.cells()) {
    throw std::invalid_argument("VorticityGrid: field holds " + std::to_string(g.omega.size()) + " values, expected " +
                                std::to_string(3 * g.cells()));
  }
}

SliceProfile grid_impulse(const VorticityGrid& g, double slab_dz) {
  validate(g);
  if (!(slab_dz >= g.dz * (1.0 - 1e-12))) throw std::invalid_argument("grid_impulse: slab thinner than the grid spacing");
  const auto slabs = static_cast<std::size_t>(std::ceil(g.nz * g.dz / slab_dz - 1e-9));
  const std::size_t N = g.cells();
  const double dv = g.dx * g.dy * g.dz;
  SliceProfile p;
  p.vectors.assign(slabs, Vec3{});
  for (int k = 0; k < g.nz; ++k) {
    auto slab = static_cast<std::size_t>(std::floor(k * g.dz / slab_dz + 1e-9));
    slab = std::min(slab, slabs - 1);
    Vec3 acc{};
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t idx = (static_cast<std::size_t>(k) * g.ny + j) * g.nx + i;
        const Vec3 w{g.omega[idx], g.omega[N + idx], g.omega[2 * N + idx]};
        acc += cross(g.position(i, j, k), w);
      }
    }
    p.vectors[slab] += 0.5 * dv * acc;
  }
  for (std::size_t s = 0; s < slabs; ++s) {
    p.q.push_back(g.origin.x3 + static_cast<double>(s) * slab_dz);
    p.moduli.push_back(norm(p.vectors[s]));
  }
  return p;
}

VorticityGrid make_vortex_ring_grid(int n, double half_width, double radius, double gamma, double core,
                                    double z_center) {
  if (n <= 0 || !(half_width > 0.0) || !(radius > 0.0) || !(core > 0.0)) {
    throw std::invalid_argument("make_vortex_ring_grid: invalid parameters");
  }
  VorticityGrid g;
  g.nx = g.ny = g.nz = n;
  g.dx = g.dy = g.dz = 2.0 * half_width / n;
  g.origin = {-half_width, -half_width, -half_width};
  const std::size_t N = g.cells();
  g.omega.assign(3 * N, 0.0);
  const double amp = gamma / (std::numbers::pi * core * core);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const Vec3 x = g.position(i, j, k);
        const double r = std::hypot(x.x1, x.x2);
        if (r == 0.0) continue;
        const double dz = x.x3 - z_center;
        const double d2 = (r - radius) * (r - radius) + dz * dz;
        const double w = amp * std::exp(-d2 / (core * core));
        const std::size_t idx = (static_cast<std::size_t>(k) * n + j) * n + i;
        g.omega[idx] = -w * x.x2 / r;
        g.omega[N + idx] = w * x.x1 / r;
      }
    }
  }
  return g;
}

void accumulate(VorticityGrid& g, const VorticityGrid& other) {
  if (g.nx != other.nx || g.ny != other.ny || g.nz != other.nz || g.omega.size() != other.omega.size()) {
    throw std::invalid_argument("accumulate: grid layouts differ");
  }
  for (std::size_t i = 0; i < g.omega.size(); ++i) g.omega[i] += other.omega[i];
}

VorticityGrid read_vorticity_grid(const std::filesystem::path& header) {
  std::ifstream in(header);
  if (!in) throw IoError("cannot open vorticity header " + header.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed vorticity header " + header.string() + ": " + e.what());
  }
  VorticityGrid g;
  try {
    g.nx = j.at("nx").get<int>();
    g.ny = j.at("ny").get<int>();
    g.nz = j.at("nz").get<int>();
    g.dx = j.at("dx").get<double>();
    g.dy = j.at("dy").get<double>();
    g.dz = j.at("dz").get<double>();
    const auto o = j.at("origin").get<std::vector<double>>();
    if (o.size() != 3) throw ConfigError("vorticity header origin must have 3 entries");
    g.origin = {o[0], o[1], o[2]};
    if (j.value("component_order", std::string("x-fastest")) != "x-fastest") {
      throw ConfigError("unsupported component_order in " + header.string());
    }
    if (j.value("scalar", std::string("f64-le")) != "f64-le") {
      throw ConfigError("unsupported scalar type in " + header.string());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("vorticity header " + header.string() + ": " + e.what());
  }
  if (g.nx <= 0 || g.ny <= 0 || g.nz <= 0) throw ConfigError("vorticity header has non-positive dimensions");

  const auto data = data_path_for(header, j);
  std::ifstream bin(data, std::ios::binary);
  if (!bin) throw IoError("cannot open vorticity data " + data.string());
  g.omega.resize(3 * g.cells());
  bin.read(reinterpret_cast<char*>(g.omega.data()), static_cast<std::streamsize>(g.omega.size() * sizeof(double)));
  if (bin.gcount() != static_cast<std::streamsize>(g.omega.size() * sizeof(double))) {
    throw ConfigError("vorticity data " + data.string() + " is shorter than 3*nx*ny*nz doubles");
  }
  bin.peek();
  if (!bin.eof()) throw ConfigError("vorticity data " + data.string() + " is longer than 3*nx*ny*nz doubles");
  for (auto& v : g.omega) v = swap_if_big_endian(v);
  try {
    validate(g);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

void write_vorticity_grid(const VorticityGrid& g, const std::filesystem::path& header) {
  validate(g);
  auto data = header;
  data.replace_extension(".bin");
  nlohmann::json j = {{"nx", g.nx},
                      {"ny", g.ny},
                      {"nz", g.nz},
                      {"dx", g.dx},
                      {"dy", g.dy},
                      {"dz", g.dz},
                      {"origin", {g.origin.x1, g.origin.x2, g.origin.x3}},
                      {"component_order", "x-fastest"},
                      {"scalar", "f64-le"},
                      {"data_file", data.filename().string()}};
  std::ofstream out(header);
  if (!out) throw IoError("cannot write vorticity header " + header.string());
  out << j.dump(2) << '\n';
  std::ofstream bin(data, std::ios::binary);
  if (!bin) throw IoError("cannot write vorticity data " + data.string());
  for (double v : g.omega) {
    const double le = swap_if_big_endian(v);
    bin.write(reinterpret_cast<const char*>(&le), sizeof le);
  }
  if (!out || !bin) throw IoError("write failed for " + header.string());
}

Spectrum spectrum(std::span<const double> samples) {
  const int N = static_cast<int>(samples.size());
  if (N < kMinSpectrumSamples) {
    throw std::invalid_argument("spectrum: need at least " + std::to_string(kMinSpectrumSamples) + " samples, got " +
                                std::to_string(N));
  }
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= N;

  const int nk = N / 2 + 1;
  double* in = fftw_alloc_real(static_cast<std::size_t>(N));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(nk));
  fftw_plan plan = fftw_plan_dft_r2c_1d(N, in, out, FFTW_ESTIMATE);
  for (int j = 0; j < N; ++j) in[j] = samples[static_cast<std::size_t>(j)] - mean;
  fftw_execute(plan);

  Spectrum s;
  for (int k = 0; k < nk; ++k) {
    const std::complex<double> c{out[k][0] / N, out[k][1] / N};
    const double m = std::abs(c);
    const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
    s.k.push_back(k);
    s.coeff.push_back(c);
    s.coeff_modulus.push_back(m);
    s.weighted.push_back(k * m);
    s.is_square.push_back(r * r == k);
  }
  fftw_destroy_plan(plan);
  fftw_free(in);
  fftw_free(out);
  return s;
}

DominanceReport square_dominance(const Spectrum& s, int n_max) {
  const int kmax = s.k.empty() ? -1 : s.k.back();
  DominanceReport r;
  int hits = 0;
  for (int n = 2; n <= n_max && (n + 1) * (n + 1) - 1 <= kmax; ++n) {
    const double peak = s.weighted[static_cast<std::size_t>(n * n)];
    bool ok = true;
    for (int k = (n - 1) * (n - 1) + 1; k < (n + 1) * (n + 1); ++k) {
      if (k == n * n) continue;
      if (s.weighted[static_cast<std::size_t>(k)] >= peak) {
        ok = false;
        break;
      }
    }
    r.n.push_back(n);
    r.dominant.push_back(ok);
    hits += ok ? 1 : 0;
  }
  if (r.n.empty()) throw std::invalid_argument("square_dominance: spectrum too short for n = 2");
  r.fraction = static_cast<double>(hits) / static_cast<double>(r.n.size());
  return r;
}

ExponentFit separation_exponent_fit(std::span<const double> t, std::span<const double> z, double t_ref) {
  if (t.size() != z.size()) throw std::invalid_argument("separation_exponent_fit: size mismatch");
  if (t.size() < static_cast<std::size_t>(kMinFitPoints)) {
    throw std::invalid_argument("separation_exponent_fit: need at least " + std::to_string(kMinFitPoints) + " points");
  }
  const std::size_t m = t.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(t[i] > t_ref)) throw std::invalid_argument("separation_exponent_fit: times must follow the reference time");
    if (!(z[i] > 0.0)) throw std::invalid_argument("separation_exponent_fit: ordinates must be positive");
    lx[i] = std::log(t[i] - t_ref);
    ly[i] = std::log(z[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("separation_exponent_fit: times are all equal");
  ExponentFit fit;
  fit.exponent = sxy / sxx;
  fit.log_prefactor = my - fit.exponent * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double e = ly[i] - fit.log_prefactor - fit.exponent * lx[i];
    ssr += e * e;
  }
  fit.stderr_exponent = std::sqrt(ssr / static_cast<double>(m - 2) / sxx);
  fit.points = static_cast<int>(m);
  return fit;
}

}  // namespace vfl
