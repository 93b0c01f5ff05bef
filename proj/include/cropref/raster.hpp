#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cropref/geo.hpp"

namespace cropref::raster {

inline constexpr double kDefaultNodata = -9999.0;

// Georeferenced grid in degrees; row 0 is the northernmost row.
struct RasterGrid {
  int ncols = 0;
  int nrows = 0;
  double xll = 0.0;  // lower-left corner longitude
  double yll = 0.0;  // lower-left corner latitude
  double cellsize = 0.0;
  double nodata = kDefaultNodata;
  std::vector<double> values;  // nrows * ncols, row-major

  static RasterGrid like(const RasterGrid& other, double fill);

  std::size_t size() const { return values.size(); }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * ncols + col;
  }
  double at(int row, int col) const { return values[index(row, col)]; }
  double& at(int row, int col) { return values[index(row, col)]; }
  bool is_nodata(double v) const { return v == nodata; }

  geo::BoundingBox extent() const;
  geo::GeoPoint cell_center(int row, int col) const;
  // Cell containing p (no interpolation); the far edges belong to the last
  // row/column. nullopt outside the extent.
  std::optional<std::pair<int, int>> cell_of(const geo::GeoPoint& p) const;
  bool same_georeference(const RasterGrid& other) const;

  // Throws InvalidArgument when the invariants do not hold.
  void validate() const;
};

std::string format_grid(const RasterGrid& grid);
RasterGrid parse_grid(std::string_view text, std::string_view source = "grid");
RasterGrid read_grid(const std::filesystem::path& path);
void write_grid(const RasterGrid& grid, const std::filesystem::path& path);

void require_same_georeference(const RasterGrid& a, const RasterGrid& b,
                               std::string_view what);

enum class Band { Blue, Green, Red, NIR, SWIR1, SWIR2 };
inline constexpr std::array<Band, 6> kAllBands = {Band::Blue, Band::Green, Band::Red,
                                                  Band::NIR,  Band::SWIR1, Band::SWIR2};
std::string_view to_string(Band b);
std::optional<Band> parse_band(std::string_view name);

// Candidate model inputs, in tie-breaking order.
enum class FeatureName { NDVI, EVI, ENDVI, LSWI, Red, Blue, Green, NIR, SWIR1, SWIR2 };
inline constexpr std::array<FeatureName, 10> kAllFeatures = {
    FeatureName::NDVI, FeatureName::EVI,   FeatureName::ENDVI, FeatureName::LSWI,
    FeatureName::Red,  FeatureName::Blue,  FeatureName::Green, FeatureName::NIR,
    FeatureName::SWIR1, FeatureName::SWIR2};
std::string_view to_string(FeatureName f);
std::optional<FeatureName> parse_feature(std::string_view name);
std::vector<FeatureName> parse_feature_list(std::string_view comma_separated);
std::string join_features(std::span<const FeatureName> features, std::string_view sep = ",");
bool is_index(FeatureName f);
std::optional<Band> band_of(FeatureName f);
// Bands an index (or raw band feature) reads.
std::vector<Band> required_bands(FeatureName f);

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  static std::optional<Date> parse(std::string_view text);  // YYYY-MM-DD
  static Date from_day_of_year(int year, int doy);
  std::string to_string() const;
  std::string compact() const;  // YYYYMMDD
  long long days_since_epoch() const;
  auto operator<=>(const Date&) const = default;
};

struct SceneManifest {
  Date scene_date;
  std::map<Band, std::filesystem::path> band_paths;
  std::filesystem::path qa_path;

  void validate() const;  // all six bands and a QA path present
};

// Relative paths in the file resolve against the manifest's directory.
SceneManifest read_manifest(const std::filesystem::path& path);
// Paths are written as given.
void write_manifest(const SceneManifest& manifest, const std::filesystem::path& path);
std::string format_manifest(const SceneManifest& manifest);

// band where qa == 0, nodata elsewhere.
RasterGrid apply_qa_mask(const RasterGrid& band, const RasterGrid& qa);

using BandGrids = std::map<Band, const RasterGrid*>;

// Per-cell NDVI/EVI/ENDVI/LSWI; raw band features return a copy of the band.
RasterGrid compute_index(FeatureName kind, const BandGrids& bands);

double sample_pixel(const RasterGrid& grid, const geo::GeoPoint& p);

// T x F matrix of temporal-spectral features at one location.
struct FeatureStack {
  geo::GeoPoint point;
  int scenes = 0;    // T
  int features = 0;  // F
  std::vector<double> matrix;      // row-major T x F, gap-filled
  std::vector<std::uint8_t> valid; // 1 where the observation was clear

  double at(int t, int f) const { return matrix[static_cast<std::size_t>(t) * features + f]; }
  bool is_valid(int t, int f) const { return valid[static_cast<std::size_t>(t) * features + f] != 0; }
};

// Fills invalid entries of one time series in place: linear in time between
// valid neighbours, nearest valid value at the ends. Throws UnusablePixel
// when nothing is valid.
void fill_gaps(std::span<double> series, std::span<const std::uint8_t> valid,
               std::span<const long long> days);

struct IngestOptions {
  // Applied to band values on load (0.0001 for raw Landsat SR integers).
  double reflectance_scale = 1.0;
};

// Scenes loaded into memory with QA masks applied and all ten features
// precomputed per date. Immutable after construction.
class SceneStack {
 public:
  SceneStack(std::span<const SceneManifest> manifests, const IngestOptions& options = {});

  int scene_count() const { return static_cast<int>(dates_.size()); }
  const std::vector<Date>& dates() const { return dates_; }
  const RasterGrid& reference() const { return feature_grids_.front().front(); }
  const RasterGrid& feature_grid(int scene, FeatureName f) const {
    return feature_grids_[static_cast<std::size_t>(scene)][static_cast<std::size_t>(f)];
  }

  FeatureStack extract(std::span<const FeatureName> features, const geo::GeoPoint& p) const;
  FeatureStack extract_cell(std::span<const FeatureName> features, int row, int col) const;

 private:
  std::vector<Date> dates_;
  std::vector<long long> days_;
  std::vector<std::array<RasterGrid, 10>> feature_grids_;
};

FeatureStack extract_feature_stack(std::span<const SceneManifest> scenes,
                                   std::span<const FeatureName> features,
                                   const geo::GeoPoint& p);

// Manifests (*.manifest) in a directory, sorted by scene date.
std::vector<SceneManifest> load_scene_directory(const std::filesystem::path& dir);

}  // namespace cropref::raster
