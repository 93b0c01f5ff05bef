#pragma once

#include <optional>
#include <string_view>
#include <vector>

namespace cropref::geo {

// Meters per degree of latitude in the local equirectangular model.
inline constexpr double kMetersPerDegree = 111320.0;
inline constexpr double kMaxOffsetLatitude = 85.0;

struct GeoPoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;

  bool valid() const;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

// Camera facing direction; the enumerator value is the heading in degrees.
enum class Heading : int { North = 0, East = 90, South = 180, West = 270 };

inline constexpr Heading kAllHeadings[] = {Heading::North, Heading::East,
                                           Heading::South, Heading::West};

int degrees(Heading h);
Heading opposite(Heading h);
std::string_view to_string(Heading h);
// Accepts 0/90/180/270 only.
std::optional<Heading> heading_from_degrees(int deg);
// Accepts names (case-insensitive, "N"/"north") or degree strings.
std::optional<Heading> parse_heading(std::string_view text);

struct ShiftParams {
  double road_width_y_m = 12.0;
  double pixel_size_x_m = 30.0;
  int extra_steps = 0;

  // Throws InvalidArgument when y < 0, x <= 0 or extra_steps < 0.
  void validate() const;
  // 0.5 y + x (1 + extra_steps)
  double displacement_m() const;
};

struct BoundingBox {
  double min_lat_deg = 0.0;
  double min_lon_deg = 0.0;
  double max_lat_deg = 0.0;
  double max_lon_deg = 0.0;

  bool valid() const;
  bool contains(const GeoPoint& p) const;
  GeoPoint center() const;
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Regular grid over `bbox`, origin at the north-west corner, row-major
// (north to south, west to east). Longitude spacing uses cos(center latitude).
std::vector<GeoPoint> make_sampling_grid(const BoundingBox& bbox, double spacing_m);

// Moves `p` by `distance_m` along `h`; only the matching axis changes.
GeoPoint offset_point(const GeoPoint& p, Heading h, double distance_m);

// Camera coordinate pushed across half the road and into the parcel.
GeoPoint shift_to_parcel(const GeoPoint& camera, Heading h, const ShiftParams& sp);

// Equirectangular distance using cos of the mean latitude.
double geo_distance(const GeoPoint& a, const GeoPoint& b);

}  // namespace cropref::geo
