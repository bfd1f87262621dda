#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace fpv {

// Parameters of a correlated fabrication-variation field. Deviations are in
// nanometers, lengths in micrometers.
struct VariationParams {
  double sigma_w = 5.0;
  double sigma_t = 2.0;
  double corr_length = 1000.0;
  double mesh_size = 10.0;
  double radial_amplitude = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
  // Copy with both standard deviations multiplied by `factor`.
  VariationParams scaled(double factor) const;

  bool operator==(const VariationParams&) const = default;
};

struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
};

struct RegionMean {
  double width_nm = 0.0;
  double thick_nm = 0.0;
};

// Gridded width/thickness deviations over a rectangular area. Cell (row, col)
// covers [x0 + col*mesh, x0 + (col+1)*mesh) x [y0 + row*mesh, y0 + (row+1)*mesh).
// Immutable after construction; grids are row-major.
class VariationMap {
 public:
  VariationMap() = default;
  VariationMap(VariationParams params, double origin_x, double origin_y, int cols, int rows,
               std::vector<double> width_dev, std::vector<double> thick_dev);

  const VariationParams& params() const { return params_; }
  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  double mesh_size() const { return params_.mesh_size; }
  int cols() const { return cols_; }
  int rows() const { return rows_; }
  std::size_t cell_count() const { return width_dev_.size(); }
  Rect bounds() const;

  double width_at(int row, int col) const { return width_dev_[index(row, col)]; }
  double thick_at(int row, int col) const { return thick_dev_[index(row, col)]; }
  const std::vector<double>& width_dev() const { return width_dev_; }
  const std::vector<double>& thick_dev() const { return thick_dev_; }

  // Same geometry with the thickness grid set to zero (width-only studies).
  VariationMap without_thickness() const;

  bool operator==(const VariationMap&) const = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(col);
  }

  VariationParams params_{};
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  int cols_ = 0;
  int rows_ = 0;
  std::vector<double> width_dev_;
  std::vector<double> thick_dev_;
};

// Square map covering a wafer of the given diameter. The radial trend is
// centered on the wafer center (diameter/2, diameter/2).
VariationMap generate_wafer_map(const VariationParams& params, double wafer_diameter);

// Rectangular map with its lower-left corner at `origin` in wafer coordinates.
// `wafer_diameter` only positions the radial trend; pass 0 to disable it.
VariationMap generate_die_map(const VariationParams& params, double origin_x, double origin_y,
                              double width, double height, double wafer_diameter = 0.0);

// Exact sub-grid covering the requested rectangle.
VariationMap extract_die(const VariationMap& map, double origin_x, double origin_y, double width,
                         double height);

// Area-weighted mean over every cell overlapping `rect`.
RegionMean sample_region(const VariationMap& map, const Rect& rect);

nlohmann::json to_json(const VariationMap& map);
VariationMap variation_map_from_json(const nlohmann::json& j);

// Binary container: magic "FPVMAP01", params, origin, dims, two f64 grids.
void save_map(const VariationMap& map, const std::filesystem::path& path);
VariationMap load_map(const std::filesystem::path& path);

}  // namespace fpv
