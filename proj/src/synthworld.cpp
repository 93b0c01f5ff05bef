#include "cropref/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cropref/error.hpp"
#include "cropref/textio.hpp"

namespace cropref::synth {
namespace {

using raster::Band;

constexpr std::array<double, 6> kSoil{0.10, 0.14, 0.18, 0.22, 0.32, 0.26};
constexpr std::array<double, 6> kVegetation{0.03, 0.08, 0.04, 0.55, 0.22, 0.11};
constexpr std::array<int, 7> kKnots{0, 60, 120, 180, 240, 300, 366};

struct ClassSignature {
  const char* name;
  std::array<double, 7> greenness;
  std::array<double, 6> offset;
};

// Annual crops peak at staggered dates; perennials hold broad plateaus and
// differ in their SWIR levels.
constexpr ClassSignature kSignatures[] = {
    {"alfalfa", {0.60, 0.70, 0.80, 0.75, 0.80, 0.70, 0.60}, {0, 0, 0, 0, -0.04, -0.03}},
    {"almond", {0.30, 0.50, 0.70, 0.70, 0.65, 0.50, 0.30}, {0, 0, 0, 0, 0.07, 0.06}},
    {"corn", {0.05, 0.05, 0.25, 0.95, 0.55, 0.10, 0.05}, {0, 0, 0, 0, 0, 0}},
    {"cotton", {0.05, 0.05, 0.05, 0.35, 0.90, 0.45, 0.05}, {0, 0, 0, 0, 0.07, 0.06}},
    {"grape", {0.10, 0.10, 0.45, 0.60, 0.60, 0.35, 0.10}, {0, 0.03, 0.06, 0, -0.08, -0.07}},
    {"pistachio", {0.15, 0.20, 0.50, 0.55, 0.50, 0.30, 0.15}, {0, 0, 0, 0, 0.17, 0.14}},
    {"soybean", {0.05, 0.05, 0.05, 0.55, 0.90, 0.20, 0.05}, {0, 0, 0, 0, -0.09, -0.07}},
    {"others", {0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05}, {0, 0, 0, 0, 0, 0}},
};

struct ClassLook {
  const char* name;
  std::array<double, 3> color;
  double stripes;    // cycles across the image width
  double amplitude;  // stripe contrast
  double speckle;
};

constexpr ClassLook kLooks[] = {
    {"alfalfa", {0.33, 0.62, 0.24}, 0.0, 0.00, 0.03},
    {"almond", {0.45, 0.50, 0.30}, 3.0, 0.16, 0.03},
    {"corn", {0.28, 0.52, 0.18}, 8.0, 0.12, 0.03},
    {"cotton", {0.62, 0.60, 0.52}, 6.0, 0.10, 0.05},
    {"grape", {0.42, 0.42, 0.22}, 5.0, 0.20, 0.03},
    {"pistachio", {0.52, 0.44, 0.36}, 2.0, 0.20, 0.03},
    {"soybean", {0.36, 0.64, 0.32}, 12.0, 0.08, 0.03},
    {"others", {0.55, 0.52, 0.48}, 0.0, 0.00, 0.08},
};

const ClassSignature& signature(std::string_view name) {
  for (const auto& s : kSignatures)
    if (name == s.name) return s;
  throw Error(ErrorCode::InvalidArgument, "no synthetic phenology for class '" + std::string(name) + "'");
}

const ClassLook& look(std::string_view name) {
  for (const auto& l : kLooks)
    if (name == l.name) return l;
  throw Error(ErrorCode::InvalidArgument, "no synthetic texture for class '" + std::string(name) + "'");
}

// [start, length) runs of parcel cells along one axis.
std::vector<std::pair<int, int>> parcel_runs(int n, int parcel, int road) {
  std::vector<std::pair<int, int>> runs;
  for (int start = road; start < n; start += parcel + road) {
    const int len = std::min(parcel, n - start);
    if (len >= 2) runs.emplace_back(start, len);
  }
  return runs;
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

double quantize(double v, double quantum) {
  if (quantum <= 0.0) return v;
  const double inv = std::round(1.0 / quantum);
  return std::round(v * inv) / inv;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x ^= x >> 31;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 29;
  return x;
}

raster::RasterGrid empty_grid(const WorldConfig& cfg, double fill) {
  raster::RasterGrid g;
  g.ncols = cfg.ncols;
  g.nrows = cfg.nrows;
  g.xll = cfg.origin.lon_deg;
  g.yll = cfg.origin.lat_deg;
  g.cellsize = cfg.cellsize_deg();
  g.values.assign(static_cast<std::size_t>(cfg.ncols) * cfg.nrows, fill);
  return g;
}

std::pair<int, int> step_of(geo::Heading h) {
  switch (h) {
    case geo::Heading::North: return {-1, 0};
    case geo::Heading::East: return {0, 1};
    case geo::Heading::South: return {1, 0};
    case geo::Heading::West: return {0, -1};
  }
  return {0, 0};
}

}  // namespace

void WorldConfig::validate() const {
  taxonomy.validate();
  if (nrows < 4 || ncols < 4) throw Error(ErrorCode::InvalidArgument, "world needs at least 4x4 cells");
  if (!(cell_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "cell size must be positive");
  if (parcel_cells < 2) throw Error(ErrorCode::InvalidArgument, "parcels must span at least 2 raster cells");
  if (road_cells < 1) throw Error(ErrorCode::InvalidArgument, "roads must span at least one cell");
  if (!(road_width_y_m >= 0.0)) throw Error(ErrorCode::InvalidArgument, "road width must be non-negative");
  if (!proportions.empty()) {
    if (proportions.size() != taxonomy.classes.size())
      throw Error(ErrorCode::InvalidArgument, "one proportion per taxonomy class is required");
    double sum = 0.0;
    for (double p : proportions) {
      if (!(p >= 0.0)) throw Error(ErrorCode::InvalidArgument, "proportions must be non-negative");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-6) throw Error(ErrorCode::InvalidArgument, "proportions must sum to 1");
  }
  if (scene_doys.size() < 3) throw Error(ErrorCode::InvalidArgument, "at least three scene dates are required");
  for (std::size_t i = 0; i < scene_doys.size(); ++i) {
    if (scene_doys[i] < 1 || scene_doys[i] > 365)
      throw Error(ErrorCode::InvalidArgument, "scene day-of-year outside 1..365");
    if (i && scene_doys[i] <= scene_doys[i - 1])
      throw Error(ErrorCode::InvalidArgument, "scene dates must be strictly increasing");
  }
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be non-negative");
  if (!(cloud_fraction >= 0.0 && cloud_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "cloud fraction must lie in [0, 1)");
  if (!(quantum >= 0.0)) throw Error(ErrorCode::InvalidArgument, "quantum must be non-negative");
  // smallest size the three conv/pool blocks of the image network accept
  if (image_size < 22) throw Error(ErrorCode::InvalidArgument, "image size must be at least 22");
  if (capture_stride < 1) throw Error(ErrorCode::InvalidArgument, "capture stride must be positive");
  for (const auto& c : taxonomy.classes) {
    signature(c);
    look(c);
  }
}

geo::BoundingBox WorldConfig::extent() const {
  const double d = cellsize_deg();
  return {origin.lat_deg, origin.lon_deg, origin.lat_deg + nrows * d, origin.lon_deg + ncols * d};
}

std::vector<double> WorldConfig::effective_proportions() const {
  if (!proportions.empty()) return proportions;
  return std::vector<double>(taxonomy.classes.size(), 1.0 / static_cast<double>(taxonomy.classes.size()));
}

World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  World world{cfg, empty_grid(cfg, 0.0), empty_grid(cfg, 1.0), {}};
  const int others = cfg.taxonomy.others_index();
  std::fill(world.truth.values.begin(), world.truth.values.end(), static_cast<double>(others));

  const auto row_runs = parcel_runs(cfg.nrows, cfg.parcel_cells, cfg.road_cells);
  const auto col_runs = parcel_runs(cfg.ncols, cfg.parcel_cells, cfg.road_cells);
  for (const auto& [r0, nr] : row_runs)
    for (const auto& [c0, nc] : col_runs) world.parcels.push_back({r0, c0, nr, nc, others});
  if (world.parcels.empty()) throw Error(ErrorCode::InvalidArgument, "world too small for a single parcel");

  // Largest-remainder quotas, then a seeded shuffle of the label sequence.
  const auto props = cfg.effective_proportions();
  const std::size_t n = world.parcels.size();
  std::vector<std::size_t> quota(props.size());
  std::vector<std::pair<double, std::size_t>> remainder;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < props.size(); ++c) {
    const double exact = props[c] * static_cast<double>(n);
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainder.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++quota[remainder[i % remainder.size()].second];

  std::vector<int> labels;
  for (std::size_t c = 0; c < quota.size(); ++c) labels.insert(labels.end(), quota[c], static_cast<int>(c));
  std::mt19937_64 rng(mix(cfg.seed, 0x9a8ce1));
  std::shuffle(labels.begin(), labels.end(), rng);

  for (std::size_t i = 0; i < n; ++i) {
    Parcel& p = world.parcels[i];
    p.label = labels[i];
    for (int r = p.row0; r < p.row0 + p.rows; ++r) {
      for (int c = p.col0; c < p.col0 + p.cols; ++c) {
        world.truth.at(r, c) = p.label;
        world.road_mask.at(r, c) = 0.0;
      }
    }
  }
  return world;
}

double PhenologyCurve::value(Band band, double doy) const {
  const auto& v = bands[static_cast<std::size_t>(band)];
  if (doy <= knots.front()) return v.front();
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (doy <= knots[i]) {
      const double t = (doy - knots[i - 1]) / static_cast<double>(knots[i] - knots[i - 1]);
      return v[i - 1] + t * (v[i] - v[i - 1]);
    }
  }
  return v.back();
}

PhenologyCurve phenology_for(std::string_view class_name) {
  const ClassSignature& s = signature(class_name);
  PhenologyCurve curve;
  curve.knots.assign(kKnots.begin(), kKnots.end());
  for (std::size_t b = 0; b < 6; ++b) {
    for (std::size_t k = 0; k < kKnots.size(); ++k) {
      const double g = s.greenness[k];
      curve.bands[b].push_back(clamp01(kSoil[b] + g * (kVegetation[b] - kSoil[b]) + s.offset[b]));
    }
  }
  return curve;
}

SceneData render_scene(const World& world, std::size_t date_index) {
  const WorldConfig& cfg = world.config;
  const int doy = cfg.scene_doys.at(date_index);
  SceneData scene;
  scene.date = raster::Date::from_day_of_year(cfg.year, doy);
  for (auto& g : scene.bands) g = empty_grid(cfg, 0.0);
  scene.qa = empty_grid(cfg, 0.0);

  std::vector<std::array<double, 6>> clean;
  for (const auto& name : cfg.taxonomy.classes) {
    const auto curve = phenology_for(name);
    std::array<double, 6> v{};
    for (std::size_t b = 0; b < 6; ++b) v[b] = curve.value(static_cast<Band>(b), doy);
    clean.push_back(v);
  }

  std::mt19937_64 rng(mix(cfg.seed, 0x5ce7e000ULL + date_index));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::bernoulli_distribution cloud(cfg.cloud_fraction);
  for (std::size_t i = 0; i < world.truth.values.size(); ++i) {
    const auto& v = clean[static_cast<std::size_t>(world.truth.values[i])];
    for (std::size_t b = 0; b < 6; ++b) {
      const double e = noise(rng);
      scene.bands[b].values[i] = quantize(clamp01(v[b] + cfg.sigma * e), cfg.quantum);
    }
    scene.qa.values[i] = cloud(rng) ? 1.0 : 0.0;
  }
  return scene;
}

std::vector<raster::SceneManifest> synthesize_scenes(const World& world,
                                                     const std::filesystem::path& dir) {
  std::vector<raster::SceneManifest> manifests;
  for (std::size_t d = 0; d < world.config.scene_doys.size(); ++d) {
    const SceneData scene = render_scene(world, d);
    const std::string stem = scene.date.compact();
    raster::SceneManifest m;
    m.scene_date = scene.date;
    for (auto b : raster::kAllBands) {
      const std::string file = stem + "_" + std::string(raster::to_string(b)) + ".asc";
      raster::write_grid(scene.bands[static_cast<std::size_t>(b)], dir / file);
      m.band_paths[b] = file;
    }
    m.qa_path = stem + "_QA.asc";
    raster::write_grid(scene.qa, dir / m.qa_path);
    raster::write_manifest(m, dir / (stem + ".manifest"));
    for (auto& [band, path] : m.band_paths) path = dir / path;
    m.qa_path = dir / m.qa_path;
    manifests.push_back(std::move(m));
  }
  return manifests;
}

int visible_class(const World& world, int row, int col, geo::Heading h) {
  const auto [dr, dc] = step_of(h);
  for (int k = 1; k <= 4; ++k) {
    const int r = row + dr * k;
    const int c = col + dc * k;
    if (r < 0 || r >= world.truth.nrows || c < 0 || c >= world.truth.ncols) break;
    if (!world.is_road(r, c)) return static_cast<int>(world.truth.at(r, c));
  }
  return world.config.taxonomy.others_index();
}

imagery::ImageTensor render_class_image(std::string_view class_name, int size, std::uint64_t seed) {
  if (size < 8) throw Error(ErrorCode::InvalidArgument, "image size must be at least 8");
  const ClassLook& l = look(class_name);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double brightness = 0.88 + 0.24 * unit(rng);
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  const double sky_tint = 0.06 * (unit(rng) - 0.5);
  const int horizon = size / 3;

  imagery::ImageTensor img;
  img.height = size;
  img.width = size;
  img.values.assign(static_cast<std::size_t>(size) * size * 3, 0.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      std::array<double, 3> px{};
      if (y < horizon) {
        const double t = static_cast<double>(y) / horizon;
        px = {0.52 + sky_tint + 0.10 * t, 0.68 + sky_tint + 0.08 * t, 0.92 - 0.05 * t};
        for (auto& v : px) v += 0.01 * gauss(rng);
      } else {
        const double stripe =
            l.amplitude * std::sin(2.0 * std::numbers::pi * l.stripes * x / size + phase);
        for (int ch = 0; ch < 3; ++ch)
          px[static_cast<std::size_t>(ch)] =
              l.color[static_cast<std::size_t>(ch)] * brightness + stripe + l.speckle * gauss(rng);
      }
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = clamp01(px[static_cast<std::size_t>(ch)]);
    }
  }
  return img;
}

imagery::ImageTensor render_street_image(const World& world, const geo::GeoPoint& p,
                                         geo::Heading h, int size, std::uint64_t seed) {
  const auto cell = world.truth.cell_of(p);
  if (!cell || !world.is_road(cell->first, cell->second))
    throw Error(ErrorCode::InvalidArgument, "street images can only be taken from road cells");
  const int cls = visible_class(world, cell->first, cell->second, h);
  const std::uint64_t s = mix(seed, textio::fnv1a64(imagery::fixture_stem(p, h)));
  return render_class_image(world.config.taxonomy.classes[static_cast<std::size_t>(cls)], size, s);
}

std::vector<Capture> capture_points(const World& world) {
  const WorldConfig& cfg = world.config;
  const int period = cfg.parcel_cells + cfg.road_cells;
  const int stride = cfg.capture_stride;
  std::vector<Capture> out;
  auto add = [&](int r, int c) {
    if (r < 0 || r >= cfg.nrows || c < 0 || c >= cfg.ncols || !world.is_road(r, c)) return;
    const bool row_road = r % period < cfg.road_cells;
    const bool col_road = c % period < cfg.road_cells;
    if (row_road && col_road) return;  // intersection
    out.push_back({world.truth.cell_center(r, c), r, c});
  };
  for (int r = 0; r < cfg.nrows; r += period)
    for (int c = stride / 2; c < cfg.ncols; c += stride) add(r, c);
  for (int c = 0; c < cfg.ncols; c += period)
    for (int r = stride / 2; r < cfg.nrows; r += stride)
      if (r % period >= cfg.road_cells) add(r, c);
  std::sort(out.begin(), out.end(), [](const Capture& a, const Capture& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Capture& a, const Capture& b) { return a.row == b.row && a.col == b.col; }),
            out.end());
  return out;
}

std::vector<images::CatalogEntry> write_fixtures(const World& world, const std::filesystem::path& dir) {
  std::vector<images::CatalogEntry> entries;
  for (const auto& cap : capture_points(world)) {
    for (auto h : geo::kAllHeadings) {
      const auto img = render_street_image(world, cap.point, h, world.config.image_size, world.config.seed);
      images::CatalogEntry e;
      e.id = imagery::fixture_stem(cap.point, h);
      e.path = imagery::write_fixture(dir, cap.point, h, img, kFixtureDate);
      e.point = cap.point;
      e.heading = h;
      e.date = kFixtureDate;
      entries.push_back(std::move(e));
    }
  }
  return entries;
}

std::vector<images::LabeledImage> render_training_set(const World& world, int per_class,
                                                      std::uint64_t seed) {
  if (per_class < 1) throw Error(ErrorCode::InvalidArgument, "per_class must be positive");
  const auto& tax = world.config.taxonomy;
  const auto captures = capture_points(world);
  std::vector<int> counts(tax.classes.size(), 0);
  std::vector<images::LabeledImage> out;
  auto full = [&] {
    return std::all_of(counts.begin(), counts.end(), [&](int c) { return c >= per_class; });
  };
  for (int pass = 0; !full(); ++pass) {
    bool added = false;
    for (const auto& cap : captures) {
      for (auto h : geo::kAllHeadings) {
        const int cls = visible_class(world, cap.row, cap.col, h);
        if (counts[static_cast<std::size_t>(cls)] >= per_class) continue;
        const std::string stem = imagery::fixture_stem(cap.point, h);
        images::LabeledImage item;
        item.record.id = "train-" + std::to_string(pass) + "-" + stem;
        item.record.capture_point = cap.point;
        item.record.heading = h;
        item.record.capture_date = kFixtureDate;
        item.record.image = render_class_image(tax.classes[static_cast<std::size_t>(cls)],
                                               world.config.image_size,
                                               mix(mix(seed, static_cast<std::uint64_t>(pass)),
                                                   textio::fnv1a64(stem)));
        item.label = cls;
        out.push_back(std::move(item));
        ++counts[static_cast<std::size_t>(cls)];
        added = true;
      }
    }
    if (!added) break;
    if (pass > 1000) break;
  }
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] < per_class)
      throw Error(ErrorCode::MissingClass, "world has no views of class '" + tax.classes[c] + "'");
  return out;
}

std::vector<refgen::ReferencePoint> sample_others_points(const World& world, int count,
                                                         std::uint64_t seed) {
  const int others = world.config.taxonomy.others_index();
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < world.truth.values.size(); ++i)
    if (static_cast<int>(world.truth.values[i]) == others) cells.push_back(i);
  std::mt19937_64 rng(mix(seed, 0x07e5));
  std::shuffle(cells.begin(), cells.end(), rng);
  cells.resize(std::min(cells.size(), static_cast<std::size_t>(std::max(count, 0))));
  std::sort(cells.begin(), cells.end());
  std::vector<refgen::ReferencePoint> out;
  for (auto i : cells) {
    const int r = static_cast<int>(i / static_cast<std::size_t>(world.truth.ncols));
    const int c = static_cast<int>(i % static_cast<std::size_t>(world.truth.ncols));
    refgen::ReferencePoint p;
    p.location = world.truth.cell_center(r, c);
    p.label = others;
    p.source_image_id = "others-cell-" + std::to_string(r) + "-" + std::to_string(c);
    out.push_back(std::move(p));
  }
  return out;
}

std::string format_points_csv(std::span<const geo::GeoPoint> points) {
  std::string out = "lat,lon\n";
  for (const auto& p : points)
    out += textio::format_fixed(p.lat_deg, 7) + "," + textio::format_fixed(p.lon_deg, 7) + "\n";
  return out;
}

std::vector<geo::GeoPoint> parse_points_csv(std::string_view text, std::string_view source) {
  std::vector<geo::GeoPoint> out;
  bool header = false;
  std::size_t line_no = 0;
  for (auto line : textio::split(text, '\n')) {
    ++line_no;
    line = textio::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "lat,lon") throw Error(ErrorCode::Parse, std::string(source) + ": expected header 'lat,lon'");
      header = true;
      continue;
    }
    const auto f = textio::split_csv_line(line);
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (f.size() != 2) throw Error(ErrorCode::Parse, where + ": expected 2 fields");
    out.push_back({textio::parse_double(f[0], where + " lat"), textio::parse_double(f[1], where + " lon")});
  }
  if (!header) throw Error(ErrorCode::Parse, std::string(source) + ": empty point file");
  return out;
}

}  // namespace cropref::synth
