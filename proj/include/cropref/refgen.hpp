#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cropref/geo.hpp"
#include "cropref/imageclassifier.hpp"
#include "cropref/metrics.hpp"
#include "cropref/raster.hpp"

namespace cropref::refgen {

struct ReferencePoint {
  geo::GeoPoint location;
  int label = 0;
  std::string source_image_id;
  std::optional<double> confidence;
  double shift_m = 0.0;
  int extra_steps = 0;
};

inline constexpr int kMaxExtraSteps = 3;

struct ShortClass {
  int label = 0;
  std::size_t points = 0;
};

struct RefGenResult {
  std::vector<ReferencePoint> points;
  std::vector<ShortClass> short_classes;  // still below min_per_class after augmentation
};

// One point per image at shift_to_parcel(capture, heading, sp). Classes below
// min_per_class get extra points from the same images one pixel further out
// (extra_steps 1, 2, 3), image by image in input order.
RefGenResult generate_reference_points(std::span<const images::LabeledImage> kept,
                                       const geo::ShiftParams& sp, std::size_t min_per_class);

inline constexpr const char* kRefpointHeader =
    "lat,lon,label,source_image,confidence,shift_m,extra_steps";

std::string format_refpoints(std::span<const ReferencePoint> points,
                             const images::LabelTaxonomy& taxonomy);
std::vector<ReferencePoint> parse_refpoints(std::string_view text,
                                            const images::LabelTaxonomy& taxonomy,
                                            std::string_view source = "refpoints");
void write_refpoints(std::span<const ReferencePoint> points, const images::LabelTaxonomy& taxonomy,
                     const std::filesystem::path& path);
std::vector<ReferencePoint> read_refpoints(const std::filesystem::path& path,
                                           const images::LabelTaxonomy& taxonomy);

struct ValidationResult {
  metrics::AgreementReport report;
  std::vector<ReferencePoint> disagreeing;
};

ValidationResult validate_reference_points(std::span<const ReferencePoint> points,
                                           const raster::RasterGrid& truth,
                                           const images::LabelTaxonomy& taxonomy);

}  // namespace cropref::refgen
