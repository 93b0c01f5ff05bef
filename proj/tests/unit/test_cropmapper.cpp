#include <doctest.h>

#include "constructed_scenes.hpp"
#include "cropref/cropmapper.hpp"
#include "cropref/error.hpp"
#include "test_util.hpp"

using namespace cropref;
using namespace cropref::mapper;
using raster::FeatureName;

namespace {

MapperConfig quick_config() {
  MapperConfig mc;
  mc.widths = {4, 4, 16};
  mc.train.epochs = 12;
  mc.train.batch_size = 16;
  mc.train.dropout_rate = 0.0;
  mc.train.seed = 5;
  return mc;
}

}  // namespace

TEST_CASE("pixel dataset drops duplicates and unusable cells") {
  TempDir dir("mapper_ds");
  auto cs = write_constructed_scenes(dir.path, 30, 30, 20, 1);
  const raster::SceneStack stack(cs.manifests);
  auto pts = cs.points;
  pts.push_back(pts[0]);
  pts.back().source_image_id = "dup";
  const std::vector<FeatureName> f{FeatureName::NIR};
  const auto ds = build_pixel_dataset(pts, stack, f);
  CHECK(ds.scenes == 4);
  CHECK(ds.dropped_duplicate >= 1);
  CHECK(ds.labels.size() + ds.dropped_duplicate == pts.size());
  CHECK(ds.stacks[0].size() == 4);

  auto outside = cs.points;
  outside[0].location.lat_deg += 1.0;
  CHECK_THROWS_AS(build_pixel_dataset(outside, stack, f), Error);
}

TEST_CASE("forward selection picks the planted feature first") {
  TempDir dir("mapper_sel");
  auto cs = write_constructed_scenes(dir.path, 30, 30, 40, 2);
  const raster::SceneStack stack(cs.manifests);
  const std::vector<FeatureName> cands{FeatureName::Red, FeatureName::Blue, FeatureName::Green,
                                       FeatureName::NIR, FeatureName::SWIR1};
  const auto tax = images::illinois_taxonomy();
  const auto r = forward_select(cands, cs.points, stack, tax, quick_config());
  REQUIRE_FALSE(r.selected.empty());
  CHECK(r.selected.front() == FeatureName::NIR);
  CHECK(r.history.size() == r.selected.size());
  CHECK(r.history.front() > r.baseline_accuracy);
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] > r.history[i - 1]);
  const int k = static_cast<int>(cands.size());
  CHECK(r.models_trained <= k * (k + 1) / 2);
  CHECK(!r.stop_reason.empty());
  CHECK(format_selection_report(r).find("NIR") != std::string::npos);

  // Same inputs, same outcome.
  const auto again = forward_select(cands, cs.points, stack, tax, quick_config());
  CHECK(again.selected == r.selected);
  CHECK(again.history == r.history);
}

TEST_CASE("pixel classifier maps the constructed scene") {
  TempDir dir("mapper_map");
  auto cs = write_constructed_scenes(dir.path, 30, 30, 40, 3);
  const raster::SceneStack stack(cs.manifests);
  const auto tax = images::illinois_taxonomy();
  const std::vector<FeatureName> f{FeatureName::NIR, FeatureName::NDVI};
  const auto r = train_pixel_classifier(f, cs.points, stack, tax, quick_config());
  CHECK(metrics::overall_accuracy(r.heldout) >= 0.9);
  CHECK(model_features(r.network) == f);

  const auto map = predict_crop_map(r.network, stack, f, stack.reference().extent());
  CHECK(map.grid.same_georeference(cs.truth));
  for (std::size_t i = 0; i < r.heldout_cells.size(); ++i) {
    const auto [row, col] = r.heldout_cells[i];
    CHECK(map.grid.at(row, col) == r.heldout_predictions[i]);
  }
  const auto eval = evaluate_crop_map(map, cs.truth);
  CHECK(metrics::overall_accuracy(eval.confusion) >= 0.9);
  CHECK(eval.truth_area.at(0) == 300);
  CHECK(format_area_report(eval, tax).rfind("class,map_pixels,truth_pixels,relative_difference\n", 0) == 0);

  // Restricting the extent leaves the rest as nodata.
  auto half = stack.reference().extent();
  half.max_lon_deg = (half.min_lon_deg + half.max_lon_deg) / 2;
  const auto part = predict_crop_map(r.network, stack, f, half);
  CHECK(part.grid.is_nodata(part.grid.at(0, 29)));
  CHECK_FALSE(part.grid.is_nodata(part.grid.at(0, 0)));

  const std::vector<FeatureName> other{FeatureName::NIR};
  CHECK_THROWS_AS(predict_crop_map(r.network, stack, other, stack.reference().extent()), Error);
}

TEST_CASE("training requires enough points per present class") {
  TempDir dir("mapper_min");
  auto cs = write_constructed_scenes(dir.path, 30, 30, 3, 4);
  const raster::SceneStack stack(cs.manifests);
  const std::vector<FeatureName> f{FeatureName::NIR};
  CHECK_THROWS_AS(train_pixel_classifier(f, cs.points, stack, images::illinois_taxonomy(), quick_config()),
                  Error);
}

TEST_CASE("legend round trip") {
  const auto tax = images::california_taxonomy();
  const auto text = format_legend(tax);
  CHECK(text.rfind("0=alfalfa\n1=almond\n", 0) == 0);
  CHECK(parse_legend(text, "california") == tax);
  CHECK_THROWS_AS(parse_legend("0=corn\n2=others\n", "x"), Error);
}
