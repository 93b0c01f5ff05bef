#include "cropref/refgen.hpp"

#include <cmath>
#include <map>

#include "cropref/error.hpp"
#include "cropref/textio.hpp"

namespace cropref::refgen {
namespace {

ReferencePoint make_point(const images::LabeledImage& item, geo::ShiftParams sp) {
  ReferencePoint p;
  p.location = geo::shift_to_parcel(item.record.capture_point, item.record.heading, sp);
  p.label = item.label;
  p.source_image_id = item.record.id;
  p.confidence = item.confidence;
  p.shift_m = sp.displacement_m();
  p.extra_steps = sp.extra_steps;
  return p;
}

}  // namespace

RefGenResult generate_reference_points(std::span<const images::LabeledImage> kept,
                                       const geo::ShiftParams& sp, std::size_t min_per_class) {
  sp.validate();
  RefGenResult out;
  std::map<int, std::vector<const images::LabeledImage*>> by_class;
  for (const auto& item : kept) {
    if (!item.record.capture_point.valid())
      throw Error(ErrorCode::InvalidArgument, "image '" + item.record.id + "' has no valid capture point");
    out.points.push_back(make_point(item, sp));
    by_class[item.label].push_back(&item);
  }

  for (const auto& [label, members] : by_class) {
    std::size_t count = members.size();
    for (int extra = 1; count < min_per_class && sp.extra_steps + extra <= kMaxExtraSteps; ++extra) {
      geo::ShiftParams further = sp;
      further.extra_steps = sp.extra_steps + extra;
      for (const auto* item : members) {
        if (count >= min_per_class) break;
        out.points.push_back(make_point(*item, further));
        ++count;
      }
    }
    if (count < min_per_class) out.short_classes.push_back({label, count});
  }
  return out;
}

std::string format_refpoints(std::span<const ReferencePoint> points,
                             const images::LabelTaxonomy& taxonomy) {
  std::string out = std::string(kRefpointHeader) + "\n";
  for (const auto& p : points) {
    out += textio::format_fixed(p.location.lat_deg, 7) + "," +
           textio::format_fixed(p.location.lon_deg, 7) + "," +
           taxonomy.classes.at(static_cast<std::size_t>(p.label)) + "," + p.source_image_id + ",";
    if (p.confidence) out += textio::format_fixed(*p.confidence, 6);
    out += "," + textio::format_fixed(p.shift_m, 3) + "," + std::to_string(p.extra_steps) + "\n";
  }
  return out;
}

std::vector<ReferencePoint> parse_refpoints(std::string_view text,
                                            const images::LabelTaxonomy& taxonomy,
                                            std::string_view source) {
  std::vector<ReferencePoint> out;
  bool header_seen = false;
  std::size_t line_no = 0;
  for (auto line : textio::split(text, '\n')) {
    ++line_no;
    line = textio::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kRefpointHeader)
        throw Error(ErrorCode::Parse, std::string(source) + ": expected header '" + kRefpointHeader + "'");
      header_seen = true;
      continue;
    }
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    const auto f = textio::split_csv_line(line);
    if (f.size() != 7) throw Error(ErrorCode::Parse, where + ": expected 7 fields");
    ReferencePoint p;
    p.location = {textio::parse_double(f[0], where + " lat"), textio::parse_double(f[1], where + " lon")};
    p.label = taxonomy.index_of(f[2]);
    p.source_image_id = f[3];
    if (!f[4].empty()) p.confidence = textio::parse_double(f[4], where + " confidence");
    p.shift_m = textio::parse_double(f[5], where + " shift_m");
    p.extra_steps = static_cast<int>(textio::parse_int(f[6], where + " extra_steps"));
    out.push_back(std::move(p));
  }
  if (!header_seen) throw Error(ErrorCode::Parse, std::string(source) + ": empty reference point file");
  return out;
}

void write_refpoints(std::span<const ReferencePoint> points, const images::LabelTaxonomy& taxonomy,
                     const std::filesystem::path& path) {
  textio::write_file(path, format_refpoints(points, taxonomy));
}

std::vector<ReferencePoint> read_refpoints(const std::filesystem::path& path,
                                           const images::LabelTaxonomy& taxonomy) {
  return parse_refpoints(textio::read_file(path), taxonomy, path.string());
}

ValidationResult validate_reference_points(std::span<const ReferencePoint> points,
                                           const raster::RasterGrid& truth,
                                           const images::LabelTaxonomy& taxonomy) {
  std::vector<metrics::LabeledLocation> locs;
  locs.reserve(points.size());
  for (const auto& p : points) locs.push_back({p.location, p.label});
  ValidationResult out;
  out.report = metrics::agreement_report(locs, truth, taxonomy.classes);
  for (const auto& p : points) {
    const double v = raster::sample_pixel(truth, p.location);
    if (truth.is_nodata(v) || std::lround(v) != p.label) out.disagreeing.push_back(p);
  }
  return out;
}

}  // namespace cropref::refgen
