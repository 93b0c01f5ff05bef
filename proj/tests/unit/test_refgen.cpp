#include <doctest.h>

#include <cmath>

#include "cropref/error.hpp"
#include "cropref/refgen.hpp"

using namespace cropref;
using namespace cropref::refgen;

namespace {

images::LabeledImage shot(std::string id, int label, geo::GeoPoint p, geo::Heading h) {
  images::LabeledImage it;
  it.record.id = std::move(id);
  it.record.capture_point = p;
  it.record.heading = h;
  it.label = label;
  it.confidence = 0.9;
  return it;
}

}  // namespace

TEST_CASE("one shifted point per image") {
  const geo::GeoPoint cam{41.0, -88.0};
  const std::vector<images::LabeledImage> kept = {shot("a", 0, cam, geo::Heading::North),
                                                  shot("b", 1, cam, geo::Heading::West)};
  const auto r = generate_reference_points(kept, {}, 0);
  REQUIRE(r.points.size() == 2);
  CHECK(r.points[0].source_image_id == "a");
  CHECK(r.points[0].shift_m == doctest::Approx(36.0));
  CHECK(geo::geo_distance(cam, r.points[0].location) == doctest::Approx(36.0).epsilon(1e-6));
  CHECK(r.points[0].location.lat_deg > cam.lat_deg);
  CHECK(r.points[1].location.lon_deg < cam.lon_deg);
  CHECK(r.points[1].confidence == 0.9);
  CHECK(r.short_classes.empty());
}

TEST_CASE("short classes are augmented one pixel further out") {
  const geo::GeoPoint cam{41.0, -88.0};
  std::vector<images::LabeledImage> kept;
  for (int i = 0; i < 6; ++i) kept.push_back(shot("c" + std::to_string(i), 0, cam, geo::Heading::East));
  kept.push_back(shot("s0", 1, cam, geo::Heading::North));
  kept.push_back(shot("s1", 1, cam, geo::Heading::South));
  const auto r = generate_reference_points(kept, {}, 5);
  std::vector<ReferencePoint> soy;
  for (const auto& p : r.points)
    if (p.label == 1) soy.push_back(p);
  REQUIRE(soy.size() == 5);
  CHECK(soy[0].extra_steps == 0);
  CHECK(soy[2].source_image_id == "s0");
  CHECK(soy[2].extra_steps == 1);
  CHECK(soy[2].shift_m == doctest::Approx(66.0));
  CHECK(soy[3].source_image_id == "s1");
  CHECK(soy[4].extra_steps == 2);
  CHECK(r.short_classes.empty());
  CHECK(r.points.size() == 11);  // the large class is untouched
}

TEST_CASE("classes that cannot reach the minimum are reported") {
  const std::vector<images::LabeledImage> kept = {shot("x", 2, {41.0, -88.0}, geo::Heading::North)};
  const auto r = generate_reference_points(kept, {}, 10);
  CHECK(r.points.size() == 1 + kMaxExtraSteps);
  REQUIRE(r.short_classes.size() == 1);
  CHECK(r.short_classes[0].label == 2);
  CHECK(r.short_classes[0].points == 4);
}

TEST_CASE("refpoint csv round trip") {
  const auto tax = images::illinois_taxonomy();
  std::vector<ReferencePoint> pts(2);
  pts[0] = {{41.1234567, -88.1}, 1, "img1", 0.75, 36.0, 0};
  pts[1] = {{41.2, -88.2}, 2, "", std::nullopt, 0.0, 0};
  const auto text = format_refpoints(pts, tax);
  CHECK(text.rfind(std::string(kRefpointHeader) + "\n", 0) == 0);
  CHECK(text.find("soybean") != std::string::npos);
  const auto back = parse_refpoints(text, tax);
  REQUIRE(back.size() == 2);
  CHECK(back[0].location.lat_deg == doctest::Approx(41.1234567).epsilon(1e-12));
  CHECK(back[0].label == 1);
  CHECK(back[0].confidence == 0.75);
  CHECK_FALSE(back[1].confidence.has_value());
  CHECK_THROWS_AS(parse_refpoints(std::string(kRefpointHeader) + "\n1,2,wheat,,,0,0\n", tax), Error);
}

TEST_CASE("validation lists disagreeing points") {
  raster::RasterGrid truth;
  truth.nrows = 1;
  truth.ncols = 2;
  truth.xll = -88.0;
  truth.yll = 41.0;
  truth.cellsize = 0.001;
  truth.values = {0, 1};
  const auto tax = images::illinois_taxonomy();
  const std::vector<ReferencePoint> pts = {{truth.cell_center(0, 0), 0, "a", {}, 0, 0},
                                           {truth.cell_center(0, 1), 0, "b", {}, 0, 0}};
  const auto v = validate_reference_points(pts, truth, tax);
  CHECK(v.report.classes.size() == 1);
  CHECK(v.report.classes[0].matching == 1);
  REQUIRE(v.disagreeing.size() == 1);
  CHECK(v.disagreeing[0].source_image_id == "b");
}
