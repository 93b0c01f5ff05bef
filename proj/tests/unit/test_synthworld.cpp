#include <doctest.h>

#include <cmath>
#include <map>

#include "cropref/error.hpp"
#include "cropref/synthworld.hpp"
#include "test_util.hpp"

using namespace cropref;
using namespace cropref::synth;

namespace {

WorldConfig small_config() {
  WorldConfig wc;
  wc.nrows = 80;
  wc.ncols = 80;
  wc.seed = 3;
  return wc;
}

}  // namespace

TEST_CASE("config validation") {
  WorldConfig wc;
  CHECK_NOTHROW(wc.validate());
  wc.proportions = {1, 1};
  CHECK_THROWS_AS(wc.validate(), Error);
  wc = {};
  wc.sigma = -0.1;
  CHECK_THROWS_AS(wc.validate(), Error);
  wc = {};
  wc.cloud_fraction = 1.0;
  CHECK_THROWS_AS(wc.validate(), Error);
  CHECK(WorldConfig{}.cellsize_deg() == doctest::Approx(30.0 / 111320.0));
}

TEST_CASE("parcel labels follow the requested proportions") {
  auto wc = small_config();
  wc.taxonomy = images::illinois_taxonomy();
  wc.proportions = {0.5, 0.3, 0.2};
  const auto w = generate_world(wc);
  std::map<int, int> per;
  for (const auto& p : w.parcels) ++per[p.label];
  const double n = static_cast<double>(w.parcels.size());
  for (int c = 0; c < 3; ++c) CHECK(std::fabs(per[c] - wc.proportions[c] * n) < 1.0);
}

TEST_CASE("world layout") {
  const auto w = generate_world(small_config());
  CHECK(w.truth.nrows == 80);
  CHECK(w.truth.cellsize == doctest::Approx(30.0 / 111320.0));
  const int others = w.config.taxonomy.others_index();
  int road_cells = 0;
  for (int r = 0; r < 80; ++r)
    for (int c = 0; c < 80; ++c)
      if (w.is_road(r, c)) {
        ++road_cells;
        CHECK(w.truth.at(r, c) == others);
      }
  CHECK(road_cells > 0);
  for (const auto& p : w.parcels) {
    CHECK(p.rows >= 2);
    CHECK(p.cols >= 2);
    for (int r = p.row0; r < p.row0 + p.rows; ++r)
      for (int c = p.col0; c < p.col0 + p.cols; ++c) {
        CHECK_FALSE(w.is_road(r, c));
        CHECK(w.truth.at(r, c) == p.label);
      }
  }
  const auto again = generate_world(small_config());
  CHECK(again.truth.values == w.truth.values);
}

TEST_CASE("phenology curves are separable by five noise sigmas") {
  const WorldConfig wc;
  const auto& classes = wc.taxonomy.classes;
  for (std::size_t a = 0; a < classes.size(); ++a)
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      const auto pa = phenology_for(classes[a]);
      const auto pb = phenology_for(classes[b]);
      double best = 0;
      for (int doy : wc.scene_doys)
        for (raster::Band band : raster::kAllBands)
          best = std::max(best, std::fabs(pa.value(band, doy) - pb.value(band, doy)));
      CAPTURE(classes[a]);
      CAPTURE(classes[b]);
      CHECK(best >= 5 * wc.sigma);
    }
  CHECK_THROWS_AS(phenology_for("wheat"), Error);
}

TEST_CASE("noise-free scenes reproduce the curves exactly") {
  auto wc = small_config();
  wc.sigma = 0.0;
  wc.quantum = 0.0;
  wc.cloud_fraction = 0.0;
  const auto w = generate_world(wc);
  const auto s = render_scene(w, 2);
  CHECK(s.date == raster::Date::from_day_of_year(2012, wc.scene_doys[2]));
  for (int r = 0; r < 80; r += 7)
    for (int c = 0; c < 80; c += 5) {
      const auto curve = phenology_for(wc.taxonomy.classes[static_cast<std::size_t>(w.truth.at(r, c))]);
      for (std::size_t b = 0; b < 6; ++b)
        CHECK(s.bands[b].at(r, c) == curve.value(raster::kAllBands[b], wc.scene_doys[2]));
      CHECK(s.qa.at(r, c) == 0.0);
    }
}

TEST_CASE("cloud fraction is honoured on average") {
  auto wc = small_config();
  wc.cloud_fraction = 0.3;
  const auto w = generate_world(wc);
  double cloudy = 0, total = 0;
  for (std::size_t t = 0; t < wc.scene_doys.size(); ++t) {
    const auto s = render_scene(w, t);
    for (double v : s.qa.values) {
      cloudy += v != 0.0;
      ++total;
    }
  }
  CHECK(cloudy / total == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("scene files load back into a stack") {
  TempDir dir("synth_scenes");
  auto wc = small_config();
  wc.nrows = 30;
  wc.ncols = 30;
  wc.scene_doys = {100, 150, 200};
  const auto w = generate_world(wc);
  const auto manifests = synthesize_scenes(w, dir.path);
  REQUIRE(manifests.size() == 3);
  const auto loaded = raster::load_scene_directory(dir.path);
  CHECK(loaded.size() == 3);
  const raster::SceneStack stack(loaded);
  CHECK(stack.reference().same_georeference(w.truth));
}

TEST_CASE("captures, views and street images") {
  const auto w = generate_world(small_config());
  const auto caps = capture_points(w);
  REQUIRE_FALSE(caps.empty());
  bool saw_crop = false;
  for (const auto& c : caps) {
    CHECK(w.is_road(c.row, c.col));
    CHECK(w.truth.cell_of(c.point) == std::pair{c.row, c.col});
    for (geo::Heading h : geo::kAllHeadings) saw_crop |= visible_class(w, c.row, c.col, h) != w.config.taxonomy.others_index();
  }
  CHECK(saw_crop);
  const auto img = render_street_image(w, caps[0].point, geo::Heading::North, 16, 1);
  CHECK(img.width == 16);
  CHECK(img.values.size() == 16u * 16u * 3u);
  CHECK(render_class_image("corn", 16, 9) == render_class_image("corn", 16, 9));
  CHECK(render_class_image("corn", 16, 9) != render_class_image("corn", 16, 10));

  const auto parcel = w.parcels.front();
  const auto inside = w.truth.cell_center(parcel.row0 + 1, parcel.col0 + 1);
  CHECK_THROWS_AS(render_street_image(w, inside, geo::Heading::North, 16, 1), Error);
}

TEST_CASE("training set and others points") {
  auto wc = small_config();
  const auto w = generate_world(wc);
  const auto items = render_training_set(w, 5, 2);
  std::map<int, int> per;
  for (const auto& it : items) ++per[it.label];
  CHECK(per.size() == wc.taxonomy.classes.size());
  for (const auto& [label, n] : per) CHECK(n == 5);

  const auto others = sample_others_points(w, 25, 4);
  CHECK(others.size() == 25);
  for (const auto& p : others) {
    CHECK(p.label == wc.taxonomy.others_index());
    CHECK(raster::sample_pixel(w.truth, p.location) == p.label);
  }
}

TEST_CASE("fixtures cover every capture and heading") {
  TempDir dir("synth_fixtures");
  auto wc = small_config();
  wc.nrows = 40;
  wc.ncols = 40;
  const auto w = generate_world(wc);
  const auto entries = write_fixtures(w, dir.path);
  CHECK(entries.size() == capture_points(w).size() * 4);
  const imagery::FixtureSource src(dir.path);
  CHECK(src.entries().size() == entries.size());
  CHECK(entries[0].date == kFixtureDate);
}

TEST_CASE("points csv") {
  const std::vector<geo::GeoPoint> pts{{35.1234567, -119.7654321}, {35.0, -119.0}};
  const auto text = format_points_csv(pts);
  CHECK(text == "lat,lon\n35.1234567,-119.7654321\n35.0000000,-119.0000000\n");
  CHECK(parse_points_csv(text) == pts);
  CHECK_THROWS_AS(parse_points_csv("lat,lon\n1\n"), Error);
}
