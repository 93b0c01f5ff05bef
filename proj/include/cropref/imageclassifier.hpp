#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cropref/imagery.hpp"
#include "cropref/metrics.hpp"
#include "cropref/neuralnet.hpp"

namespace cropref::images {

struct LabelTaxonomy {
  std::string region;
  std::vector<std::string> classes;

  int index_of(std::string_view name) const;  // throws UnknownLabel
  int others_index() const;
  void validate() const;  // unique names, "others" present
  friend bool operator==(const LabelTaxonomy&, const LabelTaxonomy&) = default;
};

inline constexpr const char* kOthers = "others";

LabelTaxonomy california_taxonomy();
LabelTaxonomy illinois_taxonomy();
// "california"/"ca" or "illinois"/"il".
LabelTaxonomy taxonomy_for_region(std::string_view region);

// Catalog row: id,path,label,confidence,lat,lon,heading,date. Empty label or
// confidence cells mean absent.
struct CatalogEntry {
  std::string id;
  std::filesystem::path path;
  std::string label;
  std::optional<double> confidence;
  geo::GeoPoint point;
  geo::Heading heading = geo::Heading::North;
  std::optional<imagery::CaptureDate> date;
};

inline constexpr const char* kCatalogHeader = "id,path,label,confidence,lat,lon,heading,date";

std::vector<CatalogEntry> parse_catalog(std::string_view text, std::string_view source = "catalog");
// Relative image paths are resolved against the catalog's directory.
std::vector<CatalogEntry> read_catalog(const std::filesystem::path& path);
std::string format_catalog(std::span<const CatalogEntry> entries);
void write_catalog(std::span<const CatalogEntry> entries, const std::filesystem::path& path);

struct LabeledImage {
  imagery::StreetImageRecord record;
  int label = 0;
  std::optional<double> confidence;  // absent for hand labels
};

std::vector<imagery::StreetImageRecord> load_images(std::span<const CatalogEntry> entries);
// Every entry must carry a label from the taxonomy.
std::vector<LabeledImage> load_labeled_images(std::span<const CatalogEntry> entries,
                                              const LabelTaxonomy& taxonomy);
CatalogEntry to_catalog_entry(const LabeledImage& item, const LabelTaxonomy& taxonomy,
                              const std::filesystem::path& path);

// Stratified by label; (train, val, test).
std::array<std::vector<LabeledImage>, 3> split_dataset(std::span<const LabeledImage> items,
                                                       std::array<double, 3> ratios,
                                                       std::uint64_t seed);

// Channels-first tensor, values shifted to [-0.5, 0.5].
nn::Tensor to_tensor(const imagery::ImageTensor& image);

struct ImageNetConfig {
  nn::ImageNetWidths widths;
};

struct ImageTrainingResult {
  nn::Network network;
  nn::TrainResult history;
};

ImageTrainingResult train_image_classifier(std::span<const LabeledImage> train,
                                           std::span<const LabeledImage> val,
                                           const LabelTaxonomy& taxonomy,
                                           const ImageNetConfig& net_cfg,
                                           const nn::TrainConfig& train_cfg);

// One result per input, in input order. Taxonomy must match the network.
std::vector<LabeledImage> classify_images(const nn::Network& net,
                                          std::span<const imagery::StreetImageRecord> images,
                                          const LabelTaxonomy& taxonomy);

metrics::ConfusionMatrix evaluate_images(const nn::Network& net,
                                         std::span<const LabeledImage> items,
                                         const LabelTaxonomy& taxonomy);

// Taxonomy recorded in a trained network's metadata.
LabelTaxonomy taxonomy_of(const nn::Network& net);

std::vector<std::string> parse_rejection_list(std::string_view text);
std::vector<std::string> read_rejection_list(const std::filesystem::path& path);

struct QcResult {
  std::vector<LabeledImage> kept;
  std::vector<LabeledImage> dropped;
  std::vector<std::string> reasons;   // parallel to dropped
  std::vector<std::string> warnings;  // rejection ids never seen
};

inline constexpr double kDefaultMinConfidence = 0.5;

// Drops "others", confidences below the threshold and rejected ids. Hand
// labels (no confidence) pass the threshold.
QcResult qc_filter(std::span<const LabeledImage> labeled, double min_confidence,
                   std::span<const std::string> rejection_ids, const LabelTaxonomy& taxonomy);

}  // namespace cropref::images
