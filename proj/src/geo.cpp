#include "cropref/geo.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>

#include "cropref/error.hpp"
#include "cropref/textio.hpp"

namespace cropref::geo {
namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

bool GeoPoint::valid() const {
  return std::isfinite(lat_deg) && std::isfinite(lon_deg) && lat_deg >= -90.0 &&
         lat_deg <= 90.0 && lon_deg >= -180.0 && lon_deg <= 180.0;
}

int degrees(Heading h) { return static_cast<int>(h); }

Heading opposite(Heading h) {
  switch (h) {
    case Heading::North: return Heading::South;
    case Heading::East: return Heading::West;
    case Heading::South: return Heading::North;
    case Heading::West: return Heading::East;
  }
  return h;
}

std::string_view to_string(Heading h) {
  switch (h) {
    case Heading::North: return "north";
    case Heading::East: return "east";
    case Heading::South: return "south";
    case Heading::West: return "west";
  }
  return "?";
}

std::optional<Heading> heading_from_degrees(int deg) {
  switch (deg) {
    case 0: return Heading::North;
    case 90: return Heading::East;
    case 180: return Heading::South;
    case 270: return Heading::West;
    default: return std::nullopt;
  }
}

std::optional<Heading> parse_heading(std::string_view text) {
  const std::string s = lower(textio::trim(text));
  if (s == "n" || s == "north") return Heading::North;
  if (s == "e" || s == "east") return Heading::East;
  if (s == "s" || s == "south") return Heading::South;
  if (s == "w" || s == "west") return Heading::West;
  int deg = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, deg);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return heading_from_degrees(deg);
}

void ShiftParams::validate() const {
  if (!(road_width_y_m >= 0.0) || !std::isfinite(road_width_y_m))
    throw Error(ErrorCode::InvalidArgument, "road width must be >= 0");
  if (!(pixel_size_x_m > 0.0) || !std::isfinite(pixel_size_x_m))
    throw Error(ErrorCode::InvalidArgument, "pixel size must be > 0");
  if (extra_steps < 0)
    throw Error(ErrorCode::InvalidArgument, "extra_steps must be >= 0");
}

double ShiftParams::displacement_m() const {
  return 0.5 * road_width_y_m + pixel_size_x_m * (1.0 + extra_steps);
}

bool BoundingBox::valid() const {
  return GeoPoint{min_lat_deg, min_lon_deg}.valid() &&
         GeoPoint{max_lat_deg, max_lon_deg}.valid() && min_lat_deg < max_lat_deg &&
         min_lon_deg < max_lon_deg;
}

bool BoundingBox::contains(const GeoPoint& p) const {
  return p.lat_deg >= min_lat_deg && p.lat_deg <= max_lat_deg &&
         p.lon_deg >= min_lon_deg && p.lon_deg <= max_lon_deg;
}

GeoPoint BoundingBox::center() const {
  return {0.5 * (min_lat_deg + max_lat_deg), 0.5 * (min_lon_deg + max_lon_deg)};
}

std::vector<GeoPoint> make_sampling_grid(const BoundingBox& bbox, double spacing_m) {
  if (!(spacing_m >= 1.0 && spacing_m <= 10000.0))
    throw Error(ErrorCode::InvalidArgument, "spacing must lie in [1, 10000] m");
  if (!(bbox.min_lat_deg < bbox.max_lat_deg) || !(bbox.min_lon_deg < bbox.max_lon_deg))
    throw Error(ErrorCode::EmptyGrid, "bounding box has zero extent");
  if (!bbox.valid()) throw Error(ErrorCode::InvalidArgument, "invalid bounding box");

  const double cos_lat = std::cos(radians(bbox.center().lat_deg));
  const double height_m = (bbox.max_lat_deg - bbox.min_lat_deg) * kMetersPerDegree;
  const double width_m =
      (bbox.max_lon_deg - bbox.min_lon_deg) * kMetersPerDegree * cos_lat;
  // Relative slack so a box spanning an exact multiple of the spacing keeps
  // its far edge despite rounding in the degree conversion.
  constexpr double kSlack = 1e-9;
  const auto rows = static_cast<std::size_t>(std::floor(height_m / spacing_m + kSlack)) + 1;
  const auto cols = static_cast<std::size_t>(std::floor(width_m / spacing_m + kSlack)) + 1;
  const double dlat = spacing_m / kMetersPerDegree;
  const double dlon = spacing_m / (kMetersPerDegree * cos_lat);

  std::vector<GeoPoint> points;
  points.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double lat = std::max(bbox.max_lat_deg - static_cast<double>(r) * dlat,
                                bbox.min_lat_deg);
    for (std::size_t c = 0; c < cols; ++c) {
      const double lon = std::min(bbox.min_lon_deg + static_cast<double>(c) * dlon,
                                  bbox.max_lon_deg);
      points.push_back({lat, lon});
    }
  }
  return points;
}

GeoPoint offset_point(const GeoPoint& p, Heading h, double distance_m) {
  if (!p.valid()) throw Error(ErrorCode::InvalidArgument, "invalid point");
  if (std::fabs(p.lat_deg) > kMaxOffsetLatitude)
    throw Error(ErrorCode::UnsupportedLatitude,
                "latitude " + std::to_string(p.lat_deg) + " beyond +-85 degrees");
  if (!(distance_m >= 0.0 && distance_m <= 10000.0))
    throw Error(ErrorCode::InvalidArgument, "offset distance must lie in [0, 10000] m");

  GeoPoint out = p;
  switch (h) {
    case Heading::North: out.lat_deg += distance_m / kMetersPerDegree; break;
    case Heading::South: out.lat_deg -= distance_m / kMetersPerDegree; break;
    case Heading::East:
      out.lon_deg += distance_m / (kMetersPerDegree * std::cos(radians(p.lat_deg)));
      break;
    case Heading::West:
      out.lon_deg -= distance_m / (kMetersPerDegree * std::cos(radians(p.lat_deg)));
      break;
  }
  return out;
}

GeoPoint shift_to_parcel(const GeoPoint& camera, Heading h, const ShiftParams& sp) {
  sp.validate();
  return offset_point(camera, h, sp.displacement_m());
}

double geo_distance(const GeoPoint& a, const GeoPoint& b) {
  const double mean_lat = 0.5 * (a.lat_deg + b.lat_deg);
  const double dy = (b.lat_deg - a.lat_deg) * kMetersPerDegree;
  const double dx =
      (b.lon_deg - a.lon_deg) * kMetersPerDegree * std::cos(radians(mean_lat));
  return std::hypot(dx, dy);
}

}  // namespace cropref::geo
