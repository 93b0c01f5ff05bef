#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cropref/geo.hpp"
#include "cropref/imageclassifier.hpp"
#include "cropref/imagery.hpp"
#include "cropref/raster.hpp"
#include "cropref/refgen.hpp"

namespace cropref::synth {

struct WorldConfig {
  geo::GeoPoint origin{35.40, -119.40};  // south-west corner
  int nrows = 200;
  int ncols = 200;
  double cell_m = 30.0;
  int parcel_cells = 12;
  int road_cells = 1;
  double road_width_y_m = 12.0;  // camera-to-parcel road width used for shifting
  images::LabelTaxonomy taxonomy = images::california_taxonomy();
  std::vector<double> proportions;  // per taxonomy class; empty means equal
  int year = 2012;
  std::vector<int> scene_doys{30, 75, 105, 135, 160, 185, 210, 235, 260, 290};
  double sigma = 0.02;
  double cloud_fraction = 0.1;
  double quantum = 1e-4;  // reflectance rounding step; 0 keeps full precision
  int image_size = 32;
  int capture_stride = 8;  // road cells between capture points
  std::uint64_t seed = 1;

  void validate() const;
  double cellsize_deg() const { return cell_m / geo::kMetersPerDegree; }
  geo::BoundingBox extent() const;
  std::vector<double> effective_proportions() const;
};

struct Parcel {
  int row0 = 0;
  int col0 = 0;
  int rows = 0;
  int cols = 0;
  int label = 0;
};

struct World {
  WorldConfig config;
  raster::RasterGrid truth;      // class index per cell, roads carry "others"
  raster::RasterGrid road_mask;  // 1 on roads
  std::vector<Parcel> parcels;

  bool is_road(int row, int col) const { return road_mask.at(row, col) != 0.0; }
};

World generate_world(const WorldConfig& cfg);

// Reflectance trajectories sampled at knot days, linear in between.
struct PhenologyCurve {
  std::vector<int> knots;
  std::array<std::vector<double>, 6> bands;  // Blue, Green, Red, NIR, SWIR1, SWIR2

  double value(raster::Band band, double doy) const;
};

PhenologyCurve phenology_for(std::string_view class_name);

struct SceneData {
  raster::Date date;
  std::array<raster::RasterGrid, 6> bands;
  raster::RasterGrid qa;
};

SceneData render_scene(const World& world, std::size_t date_index);

// Writes band grids, QA grids and one manifest per date under `dir`.
std::vector<raster::SceneManifest> synthesize_scenes(const World& world,
                                                     const std::filesystem::path& dir);

// Class the camera sees: first non-road cell within four cells along the
// heading, "others" when there is none.
int visible_class(const World& world, int row, int col, geo::Heading h);

imagery::ImageTensor render_class_image(std::string_view class_name, int size, std::uint64_t seed);
// `p` must lie on a road cell.
imagery::ImageTensor render_street_image(const World& world, const geo::GeoPoint& p,
                                         geo::Heading h, int size, std::uint64_t seed);

struct Capture {
  geo::GeoPoint point;
  int row = 0;
  int col = 0;
};

// Road cells every capture_stride cells, intersections excluded.
std::vector<Capture> capture_points(const World& world);

inline constexpr imagery::CaptureDate kFixtureDate{2012, 7};

// Renders all four headings at every capture point into PPM fixtures.
// Returns the catalog entries (labels left empty).
std::vector<images::CatalogEntry> write_fixtures(const World& world, const std::filesystem::path& dir);

// Hand-labelled training images drawn from `world` (normally generated with
// a different seed). Visits capture views in order until each class has
// `per_class` images, re-rendering views with fresh seeds if needed.
std::vector<images::LabeledImage> render_training_set(const World& world, int per_class,
                                                      std::uint64_t seed);

// Reference points at the centres of randomly chosen "others" cells.
std::vector<refgen::ReferencePoint> sample_others_points(const World& world, int count,
                                                         std::uint64_t seed);

std::string format_points_csv(std::span<const geo::GeoPoint> points);
std::vector<geo::GeoPoint> parse_points_csv(std::string_view text, std::string_view source = "points");

}  // namespace cropref::synth
