#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cropref/imageclassifier.hpp"
#include "cropref/metrics.hpp"
#include "cropref/neuralnet.hpp"
#include "cropref/raster.hpp"
#include "cropref/refgen.hpp"

namespace cropref::mapper {

struct MapperConfig {
  nn::PixelNetWidths widths;
  nn::TrainConfig train;  // 20 epochs by default
  double train_fraction = 0.8;
  std::size_t min_points_per_class = 5;
};

// Per-feature standardization fitted on training stacks.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> scale;
};

// Usable, de-duplicated pixels under the reference points. Several points of
// the same label in one raster cell collapse to the first of them.
struct PixelDataset {
  int scenes = 0;
  std::vector<raster::FeatureName> features;
  std::vector<std::size_t> point_index;  // into the reference point list
  std::vector<int> labels;
  std::vector<int> rows;
  std::vector<int> cols;
  std::vector<std::vector<double>> stacks;  // T x F, row-major
  std::size_t dropped_unusable = 0;
  std::size_t dropped_duplicate = 0;
};

PixelDataset build_pixel_dataset(std::span<const refgen::ReferencePoint> points,
                                 const raster::SceneStack& scenes,
                                 std::span<const raster::FeatureName> features);

struct CandidateScore {
  raster::FeatureName feature;
  double accuracy = 0.0;
};

struct SelectionStep {
  std::vector<raster::FeatureName> base;
  std::vector<CandidateScore> candidates;
  std::optional<raster::FeatureName> accepted;
  double incumbent = 0.0;  // after this step
};

struct FeatureSelectionResult {
  std::vector<raster::FeatureName> selected;
  double baseline_accuracy = 0.0;  // majority class on the validation split
  std::vector<SelectionStep> steps;
  std::vector<double> history;  // incumbent after each accepted feature
  int models_trained = 0;
  std::string stop_reason;
  std::size_t dropped_unusable = 0;
};

// Greedy forward selection on an 80/20 stratified split. Each step trains
// one model per remaining candidate (same seed within a step) and keeps the
// best only if it strictly beats the incumbent; ties go to enum order.
FeatureSelectionResult forward_select(std::span<const raster::FeatureName> candidates,
                                      std::span<const refgen::ReferencePoint> points,
                                      const raster::SceneStack& scenes,
                                      const images::LabelTaxonomy& taxonomy,
                                      const MapperConfig& cfg);

struct PixelTrainingResult {
  nn::Network network;
  nn::TrainResult history;
  metrics::ConfusionMatrix heldout;
  std::size_t dropped_unusable = 0;
  std::size_t dropped_duplicate = 0;
  // Held-out pixels and their predictions, for cross-checking the map.
  std::vector<std::pair<int, int>> heldout_cells;
  std::vector<int> heldout_predictions;
};

PixelTrainingResult train_pixel_classifier(std::span<const raster::FeatureName> features,
                                           std::span<const refgen::ReferencePoint> points,
                                           const raster::SceneStack& scenes,
                                           const images::LabelTaxonomy& taxonomy,
                                           const MapperConfig& cfg);

struct CropMap {
  raster::RasterGrid grid;
  images::LabelTaxonomy taxonomy;
};

// Features and normalization recorded in a pixel model.
std::vector<raster::FeatureName> model_features(const nn::Network& net);

// Grid matches the scenes' georeferencing; cells outside `extent` or
// without any clear observation are nodata.
CropMap predict_crop_map(const nn::Network& net, const raster::SceneStack& scenes,
                         std::span<const raster::FeatureName> features,
                         const geo::BoundingBox& extent);

struct MapEvaluation {
  metrics::ConfusionMatrix confusion;
  metrics::AgreementReport agreement;  // per mapped class
  std::map<int, std::int64_t> map_area;
  std::map<int, std::int64_t> truth_area;
};

MapEvaluation evaluate_crop_map(const CropMap& map, const raster::RasterGrid& truth);

// MODEL INPUT / ACCURACY table.
std::string format_selection_report(const FeatureSelectionResult& result);
std::string format_area_report(const MapEvaluation& eval, const images::LabelTaxonomy& taxonomy);

// `index=name` lines.
std::string format_legend(const images::LabelTaxonomy& taxonomy);
images::LabelTaxonomy parse_legend(std::string_view text, std::string region);

}  // namespace cropref::mapper
