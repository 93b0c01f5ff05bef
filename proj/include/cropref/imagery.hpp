#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cropref/geo.hpp"

namespace cropref::imagery {

// RGB image, row-major, channels interleaved, values in [0, 1].
struct ImageTensor {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // height * width * 3

  static constexpr int kChannels = 3;

  double at(int row, int col, int channel) const {
    return values[(static_cast<std::size_t>(row) * width + col) * kChannels + channel];
  }
  double& at(int row, int col, int channel) {
    return values[(static_cast<std::size_t>(row) * width + col) * kChannels + channel];
  }
  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

// Calendar month of capture ("YYYY-MM").
struct CaptureDate {
  int year = 0;
  int month = 0;

  std::string to_string() const;
  static std::optional<CaptureDate> parse(std::string_view text);
  friend bool operator==(const CaptureDate&, const CaptureDate&) = default;
};

struct StreetImageRecord {
  std::string id;
  geo::GeoPoint capture_point;
  geo::Heading heading = geo::Heading::North;
  std::optional<CaptureDate> capture_date;
  ImageTensor image;
};

struct StreetRequest {
  geo::GeoPoint point;
  geo::Heading heading = geo::Heading::North;
  int width = 640;
  int height = 640;
  std::string api_key;
  // Left to the API default when unset.
  std::optional<double> fov_deg;
  std::optional<double> pitch_deg;

  void validate() const;
};

inline constexpr double kFixtureToleranceM = 5.0;
inline constexpr const char* kApiKeyEnv = "GSV_API_KEY";
inline constexpr const char* kDefaultApiBase = "https://maps.googleapis.com";

// Full request URL against `base` (scheme + host).
std::string build_street_request(const StreetRequest& req,
                                 const std::string& base = kDefaultApiBase);
// Convenience form used by the grid tooling.
std::string build_street_request(const geo::GeoPoint& p, geo::Heading h, int width,
                                 int height);

// Decodes P6 PPM (maxval 255). JPEG is accepted too when built with libjpeg,
// which is what the live API returns.
ImageTensor decode_image(std::span<const std::uint8_t> bytes);
ImageTensor decode_image(const std::string& bytes);
// P6 encoding; values are quantized with round(v * 255).
std::string encode_ppm(const ImageTensor& image);

// `<lat>_<lon>_<headingDeg>` with six decimals.
std::string fixture_stem(const geo::GeoPoint& p, geo::Heading h);

// Writes `<stem>.ppm` (and `<stem>.meta` when a date is given) under `dir`.
std::filesystem::path write_fixture(const std::filesystem::path& dir,
                                    const geo::GeoPoint& p, geo::Heading h,
                                    const ImageTensor& image,
                                    const std::optional<CaptureDate>& date);

struct FixtureEntry {
  std::string stem;
  geo::GeoPoint point;
  geo::Heading heading = geo::Heading::North;
  std::filesystem::path path;
};

// Index over a fixture directory, built once and queried per request.
class FixtureSource {
 public:
  explicit FixtureSource(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<FixtureEntry>& entries() const { return entries_; }

  // Nearest entry with the same heading within kFixtureToleranceM, ties
  // broken by stem order.
  const FixtureEntry* nearest(const geo::GeoPoint& p, geo::Heading h) const;

 private:
  std::filesystem::path dir_;
  std::vector<FixtureEntry> entries_;  // sorted by stem
};

struct LiveSource {
  std::string api_base = kDefaultApiBase;
  std::string api_key;  // empty -> read from kApiKeyEnv
  int timeout_s = 20;
};

using ImageSource = std::variant<const FixtureSource*, LiveSource>;

StreetImageRecord fetch_street_image(const StreetRequest& req, const ImageSource& source);

// Loads a PPM (and optional sidecar) from an explicit path.
StreetImageRecord load_image_file(const std::filesystem::path& path, std::string id,
                                  const geo::GeoPoint& point, geo::Heading heading);

}  // namespace cropref::imagery
