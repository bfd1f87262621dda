#include "fpv/varmap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "fft_util.hpp"

namespace fpv {

namespace {

constexpr std::array<char, 8> kMapMagic = {'F', 'P', 'V', 'M', 'A', 'P', '0', '1'};

std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

// Real spectrum of a periodic 1-D Gaussian exp(-d^2 / s^2) sampled on n points.
std::vector<double> kernel_spectrum(int n, double mesh, double s, double* sum_sq) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) {
    const double d = std::min(i, n - i) * mesh;
    g[i] = std::exp(-(d * d) / (s * s));
  }
  double sq = 0.0;
  for (double v : g) sq += v * v;
  *sum_sq = sq;
  // The kernel is even, so its DFT is real: G[k] = sum g[i] cos(2 pi i k / n).
  std::vector<double> spectrum(n);
  std::vector<std::complex<double>> in(n), out(n);
  for (int i = 0; i < n; ++i) in[i] = g[i];
  {
    detail::FftwPlan plan;
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      plan.plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()),
                                   reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                                   FFTW_ESTIMATE);
    }
    fftw_execute(plan.plan);
  }
  for (int k = 0; k < n; ++k) spectrum[k] = out[k].real();
  return spectrum;
}

// Stationary Gaussian field with covariance sigma^2 exp(-d^2 / l^2), produced by
// filtering white noise on a padded periodic grid and cropping the interior.
std::vector<double> gaussian_field(int cols, int rows, double mesh, double corr_length,
                                   double sigma, std::mt19937_64& rng) {
  const int pad = static_cast<int>(std::ceil(3.0 * corr_length / mesh)) + 1;
  const int nx = detail::fft_friendly_size(cols + 2 * pad);
  const int ny = detail::fft_friendly_size(rows + 2 * pad);
  const int nxc = nx / 2 + 1;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(static_cast<std::size_t>(nx) * ny);
  for (double& v : noise) v = normal(rng);

  std::vector<std::complex<double>> spec(static_cast<std::size_t>(ny) * nxc);
  detail::FftwPlan forward;
  detail::FftwPlan backward;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    forward.plan = fftw_plan_dft_r2c_2d(ny, nx, noise.data(),
                                        reinterpret_cast<fftw_complex*>(spec.data()),
                                        FFTW_ESTIMATE);
    backward.plan = fftw_plan_dft_c2r_2d(ny, nx, reinterpret_cast<fftw_complex*>(spec.data()),
                                         noise.data(), FFTW_ESTIMATE);
  }
  fftw_execute(forward.plan);

  // Kernel scale l/sqrt(2) makes the filtered autocorrelation exp(-d^2 / l^2).
  const double s = corr_length / std::sqrt(2.0);
  double sx = 0.0;
  double sy = 0.0;
  const std::vector<double> gx = kernel_spectrum(nx, mesh, s, &sx);
  const std::vector<double> gy = kernel_spectrum(ny, mesh, s, &sy);
  const double scale = sigma / std::sqrt(sx * sy) / (static_cast<double>(nx) * ny);
  for (int r = 0; r < ny; ++r) {
    for (int c = 0; c < nxc; ++c) {
      spec[static_cast<std::size_t>(r) * nxc + c] *= gy[r] * gx[c] * scale;
    }
  }
  fftw_execute(backward.plan);

  std::vector<double> field(static_cast<std::size_t>(cols) * rows);
  for (int r = 0; r < rows; ++r) {
    const double* src = noise.data() + static_cast<std::size_t>(r + pad) * nx + pad;
    std::copy(src, src + cols, field.begin() + static_cast<std::ptrdiff_t>(r) * cols);
  }
  return field;
}

int cells_for(double length, double mesh) {
  return static_cast<int>(std::ceil(length / mesh - 1e-9));
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated variation map file");
  return v;
}

}  // namespace

void VariationParams::validate() const {
  if (!(sigma_w >= 0.0) || !(sigma_t >= 0.0)) {
    throw std::invalid_argument("variation sigma must be non-negative");
  }
  if (!(corr_length > 0.0)) throw std::invalid_argument("correlation length must be positive");
  if (!(mesh_size > 0.0)) throw std::invalid_argument("mesh size must be positive");
  if (!std::isfinite(radial_amplitude)) {
    throw std::invalid_argument("radial amplitude must be finite");
  }
}

VariationParams VariationParams::scaled(double factor) const {
  VariationParams p = *this;
  p.sigma_w *= factor;
  p.sigma_t *= factor;
  return p;
}

VariationMap::VariationMap(VariationParams params, double origin_x, double origin_y, int cols,
                           int rows, std::vector<double> width_dev, std::vector<double> thick_dev)
    : params_(params),
      origin_x_(origin_x),
      origin_y_(origin_y),
      cols_(cols),
      rows_(rows),
      width_dev_(std::move(width_dev)),
      thick_dev_(std::move(thick_dev)) {
  const auto n = static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows);
  if (cols <= 0 || rows <= 0 || width_dev_.size() != n || thick_dev_.size() != n) {
    throw std::invalid_argument("variation map grids do not match their dimensions");
  }
}

Rect VariationMap::bounds() const {
  return {origin_x_, origin_y_, origin_x_ + cols_ * mesh_size(), origin_y_ + rows_ * mesh_size()};
}

VariationMap VariationMap::without_thickness() const {
  return VariationMap(params_, origin_x_, origin_y_, cols_, rows_, width_dev_,
                      std::vector<double>(thick_dev_.size(), 0.0));
}

VariationMap generate_die_map(const VariationParams& params, double origin_x, double origin_y,
                              double width, double height, double wafer_diameter) {
  params.validate();
  if (!(width > 0.0) || !(height > 0.0)) {
    throw std::invalid_argument("map extent must be positive");
  }
  const int cols = cells_for(width, params.mesh_size);
  const int rows = cells_for(height, params.mesh_size);

  auto w_rng = make_stream(params.seed, 0);
  auto t_rng = make_stream(params.seed, 1);
  std::vector<double> w = gaussian_field(cols, rows, params.mesh_size, params.corr_length,
                                         params.sigma_w, w_rng);
  std::vector<double> t = gaussian_field(cols, rows, params.mesh_size, params.corr_length,
                                         params.sigma_t, t_rng);

  if (params.radial_amplitude != 0.0 && wafer_diameter > 0.0) {
    // Rotationally symmetric bowl: zero at the wafer center, full amplitude at the edge.
    const double radius = 0.5 * wafer_diameter;
    for (int r = 0; r < rows; ++r) {
      const double y = origin_y + (r + 0.5) * params.mesh_size - radius;
      for (int c = 0; c < cols; ++c) {
        const double x = origin_x + (c + 0.5) * params.mesh_size - radius;
        const double trend = params.radial_amplitude * (x * x + y * y) / (radius * radius);
        const auto i = static_cast<std::size_t>(r) * cols + c;
        w[i] += trend;
        t[i] += trend;
      }
    }
  }
  return VariationMap(params, origin_x, origin_y, cols, rows, std::move(w), std::move(t));
}

VariationMap generate_wafer_map(const VariationParams& params, double wafer_diameter) {
  params.validate();
  if (!(wafer_diameter >= 10.0 * params.mesh_size)) {
    throw std::invalid_argument("wafer diameter must span at least 10 mesh cells");
  }
  return generate_die_map(params, 0.0, 0.0, wafer_diameter, wafer_diameter, wafer_diameter);
}

VariationMap extract_die(const VariationMap& map, double origin_x, double origin_y, double width,
                         double height) {
  if (!(width > 0.0) || !(height > 0.0)) throw std::out_of_range("empty die rectangle");
  const double mesh = map.mesh_size();
  const int c0 = static_cast<int>(std::floor((origin_x - map.origin_x()) / mesh + 1e-9));
  const int r0 = static_cast<int>(std::floor((origin_y - map.origin_y()) / mesh + 1e-9));
  const int c1 = static_cast<int>(std::ceil((origin_x + width - map.origin_x()) / mesh - 1e-9));
  const int r1 = static_cast<int>(std::ceil((origin_y + height - map.origin_y()) / mesh - 1e-9));
  if (c0 < 0 || r0 < 0 || c1 > map.cols() || r1 > map.rows() || c1 <= c0 || r1 <= r0) {
    throw std::out_of_range("die rectangle lies outside the variation map");
  }
  const int cols = c1 - c0;
  const int rows = r1 - r0;
  std::vector<double> w(static_cast<std::size_t>(cols) * rows);
  std::vector<double> t(w.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto i = static_cast<std::size_t>(r) * cols + c;
      w[i] = map.width_at(r0 + r, c0 + c);
      t[i] = map.thick_at(r0 + r, c0 + c);
    }
  }
  return VariationMap(map.params(), map.origin_x() + c0 * mesh, map.origin_y() + r0 * mesh, cols,
                      rows, std::move(w), std::move(t));
}

RegionMean sample_region(const VariationMap& map, const Rect& rect) {
  const Rect b = map.bounds();
  const double x0 = std::max(rect.x0, b.x0);
  const double x1 = std::min(rect.x1, b.x1);
  const double y0 = std::max(rect.y0, b.y0);
  const double y1 = std::min(rect.y1, b.y1);
  if (!(x1 > x0) || !(y1 > y0)) throw std::out_of_range("region does not intersect the map");

  const double mesh = map.mesh_size();
  const int c0 = std::max(0, static_cast<int>(std::floor((x0 - b.x0) / mesh)));
  const int c1 = std::min(map.cols(), static_cast<int>(std::ceil((x1 - b.x0) / mesh)));
  const int r0 = std::max(0, static_cast<int>(std::floor((y0 - b.y0) / mesh)));
  const int r1 = std::min(map.rows(), static_cast<int>(std::ceil((y1 - b.y0) / mesh)));

  double area = 0.0;
  double w = 0.0;
  double t = 0.0;
  for (int r = r0; r < r1; ++r) {
    const double cy0 = b.y0 + r * mesh;
    const double oy = std::min(y1, cy0 + mesh) - std::max(y0, cy0);
    if (oy <= 0.0) continue;
    for (int c = c0; c < c1; ++c) {
      const double cx0 = b.x0 + c * mesh;
      const double ox = std::min(x1, cx0 + mesh) - std::max(x0, cx0);
      if (ox <= 0.0) continue;
      const double a = ox * oy;
      area += a;
      w += a * map.width_at(r, c);
      t += a * map.thick_at(r, c);
    }
  }
  if (area <= 0.0) throw std::out_of_range("region does not intersect the map");
  return {w / area, t / area};
}

nlohmann::json to_json(const VariationMap& map) {
  const auto& p = map.params();
  return {
      {"format", "fpv-variation-map"},
      {"params",
       {{"sigma_w", p.sigma_w},
        {"sigma_t", p.sigma_t},
        {"corr_length", p.corr_length},
        {"mesh_size", p.mesh_size},
        {"radial_amplitude", p.radial_amplitude},
        {"seed", p.seed}}},
      {"origin", {map.origin_x(), map.origin_y()}},
      {"mesh_size", map.mesh_size()},
      {"cols", map.cols()},
      {"rows", map.rows()},
      {"width_dev", map.width_dev()},
      {"thick_dev", map.thick_dev()},
  };
}

VariationMap variation_map_from_json(const nlohmann::json& j) {
  VariationParams p;
  const auto& jp = j.at("params");
  p.sigma_w = jp.at("sigma_w").get<double>();
  p.sigma_t = jp.at("sigma_t").get<double>();
  p.corr_length = jp.at("corr_length").get<double>();
  p.mesh_size = jp.at("mesh_size").get<double>();
  p.radial_amplitude = jp.value("radial_amplitude", 0.0);
  p.seed = jp.at("seed").get<std::uint64_t>();
  return VariationMap(p, j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>(),
                      j.at("cols").get<int>(), j.at("rows").get<int>(),
                      j.at("width_dev").get<std::vector<double>>(),
                      j.at("thick_dev").get<std::vector<double>>());
}

void save_map(const VariationMap& map, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kMapMagic.data(), kMapMagic.size());
  const auto& p = map.params();
  write_pod(os, p.sigma_w);
  write_pod(os, p.sigma_t);
  write_pod(os, p.corr_length);
  write_pod(os, p.mesh_size);
  write_pod(os, p.radial_amplitude);
  write_pod(os, p.seed);
  write_pod(os, map.origin_x());
  write_pod(os, map.origin_y());
  write_pod(os, static_cast<std::int32_t>(map.cols()));
  write_pod(os, static_cast<std::int32_t>(map.rows()));
  const auto bytes = static_cast<std::streamsize>(map.cell_count() * sizeof(double));
  os.write(reinterpret_cast<const char*>(map.width_dev().data()), bytes);
  os.write(reinterpret_cast<const char*>(map.thick_dev().data()), bytes);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

VariationMap load_map(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMapMagic) throw std::runtime_error(path.string() + " is not a map file");
  VariationParams p;
  p.sigma_w = read_pod<double>(is);
  p.sigma_t = read_pod<double>(is);
  p.corr_length = read_pod<double>(is);
  p.mesh_size = read_pod<double>(is);
  p.radial_amplitude = read_pod<double>(is);
  p.seed = read_pod<std::uint64_t>(is);
  const double ox = read_pod<double>(is);
  const double oy = read_pod<double>(is);
  const int cols = read_pod<std::int32_t>(is);
  const int rows = read_pod<std::int32_t>(is);
  if (cols <= 0 || rows <= 0) throw std::runtime_error("corrupt map dimensions");
  std::vector<double> w(static_cast<std::size_t>(cols) * rows);
  std::vector<double> t(w.size());
  const auto bytes = static_cast<std::streamsize>(w.size() * sizeof(double));
  is.read(reinterpret_cast<char*>(w.data()), bytes);
  is.read(reinterpret_cast<char*>(t.data()), bytes);
  if (!is) throw std::runtime_error("truncated variation map file");
  return VariationMap(p, ox, oy, cols, rows, std::move(w), std::move(t));
}

}  // namespace fpv
