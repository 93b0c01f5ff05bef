#include "cropref/raster.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cropref/error.hpp"
#include "cropref/simd.hpp"
#include "cropref/textio.hpp"

namespace cropref::raster {
namespace {

using textio::format_double;

constexpr std::array<std::string_view, 6> kBandNames = {"Blue", "Green", "Red",
                                                        "NIR",  "SWIR1", "SWIR2"};
constexpr std::array<std::string_view, 10> kFeatureNames = {
    "NDVI", "EVI", "ENDVI", "LSWI", "Red", "Blue", "Green", "NIR", "SWIR1", "SWIR2"};

bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

const RasterGrid& band_or_throw(const BandGrids& bands, Band b, FeatureName kind) {
  const auto it = bands.find(b);
  if (it == bands.end() || it->second == nullptr)
    throw Error(ErrorCode::MissingBand, std::string(to_string(kind)) + " needs band " +
                                            std::string(to_string(b)));
  return *it->second;
}

}  // namespace

RasterGrid RasterGrid::like(const RasterGrid& other, double fill) {
  RasterGrid g = other;
  g.values.assign(other.values.size(), fill);
  return g;
}

geo::BoundingBox RasterGrid::extent() const {
  return {yll, xll, yll + nrows * cellsize, xll + ncols * cellsize};
}

geo::GeoPoint RasterGrid::cell_center(int row, int col) const {
  return {yll + (nrows - row - 0.5) * cellsize, xll + (col + 0.5) * cellsize};
}

std::optional<std::pair<int, int>> RasterGrid::cell_of(const geo::GeoPoint& p) const {
  const double fx = (p.lon_deg - xll) / cellsize;
  const double fy = (p.lat_deg - yll) / cellsize;
  // Edge coordinates recomputed from the header can land a few ulps outside.
  constexpr double slack = 1e-9;
  if (!(fx >= -slack && fx <= ncols + slack) || !(fy >= -slack && fy <= nrows + slack))
    return std::nullopt;
  const int col = std::clamp(static_cast<int>(std::floor(fx)), 0, ncols - 1);
  const int row_from_bottom = std::clamp(static_cast<int>(std::floor(fy)), 0, nrows - 1);
  return std::pair{nrows - 1 - row_from_bottom, col};
}

bool RasterGrid::same_georeference(const RasterGrid& other) const {
  const double tol = 1e-6 * std::max(cellsize, other.cellsize);
  return ncols == other.ncols && nrows == other.nrows && close(xll, other.xll, tol) &&
         close(yll, other.yll, tol) && close(cellsize, other.cellsize, 1e-9 * cellsize);
}

void RasterGrid::validate() const {
  if (ncols < 1 || nrows < 1) throw Error(ErrorCode::InvalidArgument, "grid must be at least 1x1");
  if (!(cellsize > 0.0) || !std::isfinite(cellsize))
    throw Error(ErrorCode::InvalidArgument, "cellsize must be positive");
  if (values.size() != static_cast<std::size_t>(ncols) * nrows)
    throw Error(ErrorCode::InvalidArgument, "grid value count does not match dimensions");
  for (double v : values)
    if (!std::isfinite(v) && v != nodata)
      throw Error(ErrorCode::InvalidArgument, "grid holds a non-finite value");
}

void require_same_georeference(const RasterGrid& a, const RasterGrid& b,
                               std::string_view what) {
  if (!a.same_georeference(b))
    throw Error(ErrorCode::GeoreferenceMismatch,
                std::string(what) + ": grids do not share georeferencing");
}

std::string format_grid(const RasterGrid& grid) {
  grid.validate();
  std::string out;
  out.reserve(grid.values.size() * 8 + 128);
  out += "ncols " + std::to_string(grid.ncols) + "\n";
  out += "nrows " + std::to_string(grid.nrows) + "\n";
  out += "xllcorner " + format_double(grid.xll) + "\n";
  out += "yllcorner " + format_double(grid.yll) + "\n";
  out += "cellsize " + format_double(grid.cellsize) + "\n";
  out += "NODATA_value " + format_double(grid.nodata) + "\n";
  for (int r = 0; r < grid.nrows; ++r) {
    for (int c = 0; c < grid.ncols; ++c) {
      if (c > 0) out += ' ';
      out += format_double(grid.at(r, c));
    }
    out += '\n';
  }
  return out;
}

RasterGrid parse_grid(std::string_view text, std::string_view source) {
  const std::string src(source);
  std::map<std::string, std::string> header;
  std::size_t pos = 0;
  std::vector<std::string_view> data_lines;
  bool in_header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = textio::trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty()) continue;
    if (in_header && std::isalpha(static_cast<unsigned char>(line.front()))) {
      const auto toks = textio::tokens(line);
      if (toks.size() != 2)
        throw Error(ErrorCode::Parse, src + ": malformed header line '" + std::string(line) + "'");
      header[textio::lower(toks[0])] = std::string(toks[1]);
      continue;
    }
    in_header = false;
    data_lines.push_back(line);
  }

  const auto need = [&](const char* key) -> const std::string& {
    const auto it = header.find(key);
    if (it == header.end())
      throw Error(ErrorCode::Parse, src + ": missing header key '" + key + "'");
    return it->second;
  };

  RasterGrid g;
  g.ncols = static_cast<int>(textio::parse_int(need("ncols"), "ncols"));
  g.nrows = static_cast<int>(textio::parse_int(need("nrows"), "nrows"));
  g.cellsize = textio::parse_double(need("cellsize"), "cellsize");
  if (g.ncols < 1 || g.nrows < 1 || !(g.cellsize > 0.0))
    throw Error(ErrorCode::Parse, src + ": non-positive dimensions or cellsize");
  if (header.count("xllcorner")) {
    g.xll = textio::parse_double(header["xllcorner"], "xllcorner");
  } else {
    g.xll = textio::parse_double(need("xllcenter"), "xllcenter") - 0.5 * g.cellsize;
  }
  if (header.count("yllcorner")) {
    g.yll = textio::parse_double(header["yllcorner"], "yllcorner");
  } else {
    g.yll = textio::parse_double(need("yllcenter"), "yllcenter") - 0.5 * g.cellsize;
  }
  if (header.count("nodata_value"))
    g.nodata = textio::parse_double(header["nodata_value"], "NODATA_value");

  if (data_lines.size() != static_cast<std::size_t>(g.nrows))
    throw Error(ErrorCode::Parse, src + ": header says " + std::to_string(g.nrows) +
                                      " rows, found " + std::to_string(data_lines.size()));
  g.values.reserve(static_cast<std::size_t>(g.ncols) * g.nrows);
  for (std::size_t r = 0; r < data_lines.size(); ++r) {
    const auto toks = textio::tokens(data_lines[r]);
    if (toks.size() != static_cast<std::size_t>(g.ncols))
      throw Error(ErrorCode::Parse, src + ": row " + std::to_string(r) + " has " +
                                        std::to_string(toks.size()) + " values, expected " +
                                        std::to_string(g.ncols));
    for (auto t : toks) g.values.push_back(textio::parse_double(t, "cell value"));
  }
  return g;
}

RasterGrid read_grid(const std::filesystem::path& path) {
  return parse_grid(textio::read_file(path), path.string());
}

void write_grid(const RasterGrid& grid, const std::filesystem::path& path) {
  textio::write_file(path, format_grid(grid));
}

std::string_view to_string(Band b) { return kBandNames[static_cast<std::size_t>(b)]; }

std::optional<Band> parse_band(std::string_view name) {
  const std::string n = textio::lower(name);
  for (std::size_t i = 0; i < kBandNames.size(); ++i)
    if (textio::lower(kBandNames[i]) == n) return static_cast<Band>(i);
  return std::nullopt;
}

std::string_view to_string(FeatureName f) { return kFeatureNames[static_cast<std::size_t>(f)]; }

std::optional<FeatureName> parse_feature(std::string_view name) {
  const std::string n = textio::lower(textio::trim(name));
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i)
    if (textio::lower(kFeatureNames[i]) == n) return static_cast<FeatureName>(i);
  return std::nullopt;
}

std::vector<FeatureName> parse_feature_list(std::string_view comma_separated) {
  std::vector<FeatureName> out;
  for (auto part : textio::split(comma_separated, ',')) {
    part = textio::trim(part);
    if (part.empty()) continue;
    auto f = parse_feature(part);
    if (!f) throw Error(ErrorCode::Parse, "unknown feature '" + std::string(part) + "'");
    if (std::find(out.begin(), out.end(), *f) != out.end())
      throw Error(ErrorCode::InvalidArgument, "duplicate feature '" + std::string(part) + "'");
    out.push_back(*f);
  }
  return out;
}

std::string join_features(std::span<const FeatureName> features, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (i > 0) out += sep;
    out += to_string(features[i]);
  }
  return out;
}

bool is_index(FeatureName f) { return static_cast<int>(f) <= static_cast<int>(FeatureName::LSWI); }

std::optional<Band> band_of(FeatureName f) {
  switch (f) {
    case FeatureName::Red: return Band::Red;
    case FeatureName::Blue: return Band::Blue;
    case FeatureName::Green: return Band::Green;
    case FeatureName::NIR: return Band::NIR;
    case FeatureName::SWIR1: return Band::SWIR1;
    case FeatureName::SWIR2: return Band::SWIR2;
    default: return std::nullopt;
  }
}

std::vector<Band> required_bands(FeatureName f) {
  switch (f) {
    case FeatureName::NDVI: return {Band::NIR, Band::Red};
    case FeatureName::EVI: return {Band::NIR, Band::Red, Band::Blue};
    case FeatureName::ENDVI: return {Band::NIR, Band::Green, Band::Blue};
    case FeatureName::LSWI: return {Band::NIR, Band::SWIR1};
    default: return {*band_of(f)};
  }
}

std::optional<Date> Date::parse(std::string_view text) {
  const auto parts = textio::split(textio::trim(text), '-');
  if (parts.size() != 3) return std::nullopt;
  try {
    Date d{static_cast<int>(textio::parse_int(parts[0], "year")),
           static_cast<int>(textio::parse_int(parts[1], "month")),
           static_cast<int>(textio::parse_int(parts[2], "day"))};
    const std::chrono::year_month_day ymd{std::chrono::year{d.year},
                                          std::chrono::month{static_cast<unsigned>(d.month)},
                                          std::chrono::day{static_cast<unsigned>(d.day)}};
    if (!ymd.ok()) return std::nullopt;
    return d;
  } catch (const Error&) {
    return std::nullopt;
  }
}

Date Date::from_day_of_year(int year, int doy) {
  using namespace std::chrono;
  const sys_days start{std::chrono::year{year} / January / 1};
  const year_month_day ymd{start + days{doy - 1}};
  return {static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
          static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

std::string Date::to_string() const {
  const auto two = [](int v) { return (v < 10 ? "0" : "") + std::to_string(v); };
  return std::to_string(year) + "-" + two(month) + "-" + two(day);
}

std::string Date::compact() const {
  std::string s = to_string();
  s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
  return s;
}

long long Date::days_since_epoch() const {
  using namespace std::chrono;
  const sys_days d{year_month_day{std::chrono::year{year},
                                  std::chrono::month{static_cast<unsigned>(month)},
                                  std::chrono::day{static_cast<unsigned>(day)}}};
  return d.time_since_epoch().count();
}

void SceneManifest::validate() const {
  for (Band b : kAllBands)
    if (!band_paths.count(b))
      throw Error(ErrorCode::MissingBand,
                  "scene " + scene_date.to_string() + " lacks band " + std::string(to_string(b)));
  if (qa_path.empty())
    throw Error(ErrorCode::Parse, "scene " + scene_date.to_string() + " lacks a qa path");
}

SceneManifest read_manifest(const std::filesystem::path& path) {
  SceneManifest m;
  bool have_date = false;
  const auto base = path.parent_path();
  const auto resolve = [&](std::string_view p) {
    std::filesystem::path fp{std::string(p)};
    return fp.is_absolute() ? fp : base / fp;
  };
  for (const auto& raw : textio::read_lines(path)) {
    const auto line = textio::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::Parse, path.string() + ": expected key=value, got '" +
                                        std::string(line) + "'");
    const auto key = textio::trim(line.substr(0, eq));
    const auto value = textio::trim(line.substr(eq + 1));
    if (key == "date") {
      auto d = Date::parse(value);
      if (!d) throw Error(ErrorCode::Parse, path.string() + ": bad date '" + std::string(value) + "'");
      m.scene_date = *d;
      have_date = true;
    } else if (key == "qa") {
      m.qa_path = resolve(value);
    } else if (key.starts_with("band.")) {
      auto b = parse_band(key.substr(5));
      if (!b) throw Error(ErrorCode::Parse, path.string() + ": unknown band '" + std::string(key) + "'");
      m.band_paths[*b] = resolve(value);
    } else {
      throw Error(ErrorCode::Parse, path.string() + ": unknown key '" + std::string(key) + "'");
    }
  }
  if (!have_date) throw Error(ErrorCode::Parse, path.string() + ": missing date");
  m.validate();
  return m;
}

std::string format_manifest(const SceneManifest& manifest) {
  std::string out = "date=" + manifest.scene_date.to_string() + "\n";
  for (Band b : kAllBands) {
    const auto it = manifest.band_paths.find(b);
    if (it != manifest.band_paths.end())
      out += "band." + std::string(to_string(b)) + "=" + it->second.generic_string() + "\n";
  }
  out += "qa=" + manifest.qa_path.generic_string() + "\n";
  return out;
}

void write_manifest(const SceneManifest& manifest, const std::filesystem::path& path) {
  textio::write_file(path, format_manifest(manifest));
}

RasterGrid apply_qa_mask(const RasterGrid& band, const RasterGrid& qa) {
  require_same_georeference(band, qa, "apply_qa_mask");
  RasterGrid out = band;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (qa.values[i] != 0.0) out.values[i] = out.nodata;
  return out;
}

RasterGrid compute_index(FeatureName kind, const BandGrids& bands) {
  if (auto b = band_of(kind)) return band_or_throw(bands, *b, kind);

  const RasterGrid& nir = band_or_throw(bands, Band::NIR, kind);
  RasterGrid out = RasterGrid::like(nir, nir.nodata);
  const auto co_registered = [&](Band b) -> const RasterGrid& {
    const RasterGrid& g = band_or_throw(bands, b, kind);
    require_same_georeference(nir, g, "compute_index");
    if (g.nodata != nir.nodata)
      throw Error(ErrorCode::InvalidArgument, "compute_index: bands use different nodata values");
    return g;
  };
  switch (kind) {
    case FeatureName::NDVI:
      simd::ndvi(nir.values, co_registered(Band::Red).values, nir.nodata, out.values);
      break;
    case FeatureName::EVI:
      simd::evi(nir.values, co_registered(Band::Red).values, co_registered(Band::Blue).values,
                nir.nodata, out.values);
      break;
    case FeatureName::ENDVI:
      simd::endvi(nir.values, co_registered(Band::Green).values,
                  co_registered(Band::Blue).values, nir.nodata, out.values);
      break;
    case FeatureName::LSWI:
      simd::lswi(nir.values, co_registered(Band::SWIR1).values, nir.nodata, out.values);
      break;
    default: break;
  }
  return out;
}

double sample_pixel(const RasterGrid& grid, const geo::GeoPoint& p) {
  const auto cell = grid.cell_of(p);
  if (!cell)
    throw Error(ErrorCode::OutOfExtent,
                "point " + textio::format_fixed(p.lat_deg, 6) + "," +
                    textio::format_fixed(p.lon_deg, 6) + " outside grid extent");
  return grid.at(cell->first, cell->second);
}

void fill_gaps(std::span<double> series, std::span<const std::uint8_t> valid,
               std::span<const long long> days) {
  const std::size_t n = series.size();
  std::vector<std::size_t> good;
  for (std::size_t t = 0; t < n; ++t)
    if (valid[t]) good.push_back(t);
  if (good.empty()) throw Error(ErrorCode::UnusablePixel, "no valid observation in time series");

  std::size_t next = 0;  // index into `good` of the first valid entry >= t
  for (std::size_t t = 0; t < n; ++t) {
    while (next < good.size() && good[next] < t) ++next;
    if (valid[t]) continue;
    if (next == 0) {
      series[t] = series[good.front()];
    } else if (next == good.size()) {
      series[t] = series[good.back()];
    } else {
      const std::size_t a = good[next - 1];
      const std::size_t b = good[next];
      const double w = static_cast<double>(days[t] - days[a]) /
                       static_cast<double>(days[b] - days[a]);
      series[t] = series[a] + (series[b] - series[a]) * w;
    }
  }
}

SceneStack::SceneStack(std::span<const SceneManifest> manifests, const IngestOptions& options) {
  if (manifests.empty()) throw Error(ErrorCode::InvalidArgument, "no scenes given");
  for (std::size_t i = 1; i < manifests.size(); ++i)
    if (!(manifests[i - 1].scene_date < manifests[i].scene_date))
      throw Error(ErrorCode::InvalidArgument, "scenes must be sorted by strictly increasing date");

  const RasterGrid* reference = nullptr;
  for (const auto& m : manifests) {
    m.validate();
    const RasterGrid qa = read_grid(m.qa_path);
    std::map<Band, RasterGrid> masked;
    for (Band b : kAllBands) {
      RasterGrid band = read_grid(m.band_paths.at(b));
      if (options.reflectance_scale != 1.0)
        for (double& v : band.values)
          if (v != band.nodata) v *= options.reflectance_scale;
      masked.emplace(b, apply_qa_mask(band, qa));
    }
    BandGrids view;
    for (auto& [b, g] : masked) view[b] = &g;

    std::array<RasterGrid, 10> features;
    for (FeatureName f : kAllFeatures)
      features[static_cast<std::size_t>(f)] = compute_index(f, view);
    if (reference != nullptr)
      require_same_georeference(*reference, features[0], "scene " + m.scene_date.to_string());
    feature_grids_.push_back(std::move(features));
    reference = &feature_grids_.front()[0];
    dates_.push_back(m.scene_date);
    days_.push_back(m.scene_date.days_since_epoch());
  }
}

FeatureStack SceneStack::extract_cell(std::span<const FeatureName> features, int row,
                                      int col) const {
  if (features.empty()) throw Error(ErrorCode::InvalidArgument, "feature list is empty");
  const RasterGrid& ref = reference();
  if (row < 0 || row >= ref.nrows || col < 0 || col >= ref.ncols)
    throw Error(ErrorCode::OutOfExtent, "cell outside scene grid");

  FeatureStack stack;
  stack.point = ref.cell_center(row, col);
  stack.scenes = scene_count();
  stack.features = static_cast<int>(features.size());
  const std::size_t cells = static_cast<std::size_t>(stack.scenes) * stack.features;
  stack.matrix.assign(cells, 0.0);
  stack.valid.assign(cells, 0);
  const std::size_t idx = ref.index(row, col);

  std::vector<double> series(static_cast<std::size_t>(stack.scenes));
  std::vector<std::uint8_t> valid(series.size());
  for (int f = 0; f < stack.features; ++f) {
    for (int t = 0; t < stack.scenes; ++t) {
      const RasterGrid& g = feature_grid(t, features[static_cast<std::size_t>(f)]);
      const double v = g.values[idx];
      valid[static_cast<std::size_t>(t)] = g.is_nodata(v) ? 0 : 1;
      series[static_cast<std::size_t>(t)] = g.is_nodata(v) ? 0.0 : v;
    }
    try {
      fill_gaps(series, valid, days_);
    } catch (const Error&) {
      throw Error(ErrorCode::UnusablePixel,
                  "feature " + std::string(to_string(features[static_cast<std::size_t>(f)])) +
                      " has no valid observation at cell " + std::to_string(row) + "," +
                      std::to_string(col));
    }
    for (int t = 0; t < stack.scenes; ++t) {
      const std::size_t k = static_cast<std::size_t>(t) * stack.features + f;
      stack.matrix[k] = series[static_cast<std::size_t>(t)];
      stack.valid[k] = valid[static_cast<std::size_t>(t)];
    }
  }
  return stack;
}

FeatureStack SceneStack::extract(std::span<const FeatureName> features,
                                 const geo::GeoPoint& p) const {
  const auto cell = reference().cell_of(p);
  if (!cell) throw Error(ErrorCode::OutOfExtent, "point outside scene extent");
  FeatureStack s = extract_cell(features, cell->first, cell->second);
  s.point = p;
  return s;
}

FeatureStack extract_feature_stack(std::span<const SceneManifest> scenes,
                                   std::span<const FeatureName> features,
                                   const geo::GeoPoint& p) {
  if (features.empty()) throw Error(ErrorCode::InvalidArgument, "feature list is empty");
  return SceneStack(scenes).extract(features, p);
}

std::vector<SceneManifest> load_scene_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw Error(ErrorCode::NotFound, "scene manifest directory " + dir.string() + " does not exist");
  std::vector<std::filesystem::path> paths;
  for (const auto& item : std::filesystem::directory_iterator(dir))
    if (item.is_regular_file() && item.path().extension() == ".manifest")
      paths.push_back(item.path());
  std::sort(paths.begin(), paths.end());
  std::vector<SceneManifest> out;
  for (const auto& p : paths) out.push_back(read_manifest(p));
  if (out.empty()) throw Error(ErrorCode::NotFound, "no *.manifest files in " + dir.string());
  std::sort(out.begin(), out.end(),
            [](const SceneManifest& a, const SceneManifest& b) { return a.scene_date < b.scene_date; });
  return out;
}

}  // namespace cropref::raster
