#include "cropref/imagery.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "cropref/error.hpp"
#include "cropref/textio.hpp"

#if defined(CROPREF_HAVE_HTTPLIB)
#include <httplib.h>
#include <json.hpp>
#endif

#if defined(CROPREF_HAVE_JPEG)
#include <csetjmp>
#include <cstdio>
#include <jpeglib.h>
#endif

namespace cropref::imagery {
namespace {

using textio::format_fixed;

class PpmReader {
 public:
  explicit PpmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  ImageTensor read() {
    if (bytes_.size() < 2 || bytes_[0] != 'P' || bytes_[1] != '6')
      throw Error(ErrorCode::Decode, "not a P6 PPM stream (bad magic)");
    pos_ = 2;
    const long long width = header_int("width");
    const long long height = header_int("height");
    const long long maxval = header_int("maxval");
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw Error(ErrorCode::Decode, "PPM header not terminated by whitespace");
    ++pos_;
    if (width <= 0 || height <= 0 || width > 1 << 16 || height > 1 << 16)
      throw Error(ErrorCode::Decode, "inconsistent PPM dimensions");
    if (maxval != 255) throw Error(ErrorCode::Decode, "PPM maxval must be 255");

    const auto expected = static_cast<std::size_t>(width * height * 3);
    const std::size_t available = bytes_.size() - pos_;
    if (available < expected)
      throw Error(ErrorCode::Decode, "short PPM payload: expected " +
                                         std::to_string(expected) + " bytes, got " +
                                         std::to_string(available));
    if (available > expected)
      throw Error(ErrorCode::Decode, "PPM payload longer than header dimensions");

    ImageTensor image;
    image.width = static_cast<int>(width);
    image.height = static_cast<int>(height);
    image.values.resize(expected);
    for (std::size_t i = 0; i < expected; ++i)
      image.values[i] = static_cast<double>(bytes_[pos_ + i]) / 255.0;
    return image;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  long long header_int(const char* what) {
    skip_space_and_comments();
    long long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > std::numeric_limits<int>::max())
        throw Error(ErrorCode::Decode, std::string("PPM ") + what + " too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw Error(ErrorCode::Decode, std::string("missing PPM ") + what);
    return value;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

#if defined(CROPREF_HAVE_JPEG)
struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

ImageTensor decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> pixels;
  int width = 0;
  int height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::Decode, "corrupt JPEG stream");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);

  ImageTensor image;
  image.width = width;
  image.height = height;
  image.values.resize(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) image.values[i] = pixels[i] / 255.0;
  return image;
}
#endif

std::optional<CaptureDate> read_meta(const std::filesystem::path& meta) {
  std::error_code ec;
  if (!std::filesystem::exists(meta, ec)) return std::nullopt;
  for (const auto& line : textio::read_lines(meta)) {
    const auto t = textio::trim(line);
    if (t.starts_with("date=")) {
      auto date = CaptureDate::parse(t.substr(5));
      if (!date) throw Error(ErrorCode::Parse, "bad date in " + meta.string());
      return date;
    }
  }
  return std::nullopt;
}

std::optional<FixtureEntry> parse_fixture_name(const std::filesystem::path& path) {
  if (path.extension() != ".ppm") return std::nullopt;
  const std::string stem = path.stem().string();
  const auto last = stem.rfind('_');
  if (last == std::string::npos || last == 0) return std::nullopt;
  const auto mid = stem.rfind('_', last - 1);
  if (mid == std::string::npos) return std::nullopt;
  try {
    FixtureEntry e;
    e.stem = stem;
    e.point.lat_deg = textio::parse_double(std::string_view(stem).substr(0, mid), "lat");
    e.point.lon_deg =
        textio::parse_double(std::string_view(stem).substr(mid + 1, last - mid - 1), "lon");
    auto h = geo::heading_from_degrees(static_cast<int>(
        textio::parse_int(std::string_view(stem).substr(last + 1), "heading")));
    if (!h || !e.point.valid()) return std::nullopt;
    e.heading = *h;
    e.path = path;
    return e;
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::string query_string(const StreetRequest& req) {
  std::string q = "size=" + std::to_string(req.width) + "x" + std::to_string(req.height) +
                  "&location=" + format_fixed(req.point.lat_deg, 6) + "," +
                  format_fixed(req.point.lon_deg, 6) +
                  "&heading=" + std::to_string(geo::degrees(req.heading));
  if (req.fov_deg) q += "&fov=" + textio::format_double(*req.fov_deg);
  if (req.pitch_deg) q += "&pitch=" + textio::format_double(*req.pitch_deg);
  if (!req.api_key.empty()) q += "&key=" + req.api_key;
  return q;
}

StreetImageRecord fetch_fixture(const StreetRequest& req, const FixtureSource& source) {
  const FixtureEntry* entry = source.nearest(req.point, req.heading);
  if (entry == nullptr)
    throw Error(ErrorCode::NotFound,
                "no fixture within 5 m of " + format_fixed(req.point.lat_deg, 6) + "," +
                    format_fixed(req.point.lon_deg, 6) + " heading " +
                    std::to_string(geo::degrees(req.heading)));
  return load_image_file(entry->path, entry->stem, entry->point, entry->heading);
}

#if defined(CROPREF_HAVE_HTTPLIB)
StreetImageRecord fetch_live(StreetRequest req, const LiveSource& live) {
  if (req.api_key.empty()) req.api_key = live.api_key;
  if (req.api_key.empty()) {
    if (const char* env = std::getenv(kApiKeyEnv)) req.api_key = env;
  }
  if (req.api_key.empty())
    throw Error(ErrorCode::InvalidArgument,
                std::string("live mode needs an API key (set ") + kApiKeyEnv + ")");

  httplib::Client client(live.api_base);
  client.set_connection_timeout(live.timeout_s, 0);
  client.set_read_timeout(live.timeout_s, 0);
  const std::string query = query_string(req);

  auto res = client.Get("/maps/api/streetview?" + query);
  if (!res)
    throw TransportError(0, "request to " + live.api_base + " failed: " +
                                httplib::to_string(res.error()));
  if (res->status != 200)
    throw TransportError(res->status,
                         "street view request failed with HTTP " + std::to_string(res->status));

  StreetImageRecord record;
  record.id = fixture_stem(req.point, req.heading);
  record.capture_point = req.point;
  record.heading = req.heading;
  record.image = decode_image(res->body);

  // Capture date comes from the metadata endpoint; absence is not an error.
  if (auto meta = client.Get("/maps/api/streetview/metadata?" + query);
      meta && meta->status == 200) {
    const auto json = nlohmann::json::parse(meta->body, nullptr, false);
    if (!json.is_discarded() && json.contains("date") && json["date"].is_string())
      record.capture_date = CaptureDate::parse(json["date"].get<std::string>());
  }
  return record;
}
#endif

}  // namespace

std::string CaptureDate::to_string() const {
  std::string m = std::to_string(month);
  if (m.size() < 2) m.insert(0, "0");
  return std::to_string(year) + "-" + m;
}

std::optional<CaptureDate> CaptureDate::parse(std::string_view text) {
  text = textio::trim(text);
  const auto parts = textio::split(text, '-');
  if (parts.size() < 2) return std::nullopt;
  try {
    CaptureDate d{static_cast<int>(textio::parse_int(parts[0], "year")),
                  static_cast<int>(textio::parse_int(parts[1], "month"))};
    if (d.month < 1 || d.month > 12 || d.year < 1900 || d.year > 9999) return std::nullopt;
    return d;
  } catch (const Error&) {
    return std::nullopt;
  }
}

void StreetRequest::validate() const {
  if (!point.valid()) throw Error(ErrorCode::InvalidArgument, "invalid request point");
  if (width < 1 || width > 640 || height < 1 || height > 640)
    throw Error(ErrorCode::InvalidArgument, "image size must lie in [1, 640] pixels");
}

std::string build_street_request(const StreetRequest& req, const std::string& base) {
  req.validate();
  return base + "/maps/api/streetview?" + query_string(req);
}

std::string build_street_request(const geo::GeoPoint& p, geo::Heading h, int width,
                                 int height) {
  StreetRequest req;
  req.point = p;
  req.heading = h;
  req.width = width;
  req.height = height;
  return build_street_request(req);
}

ImageTensor decode_image(std::span<const std::uint8_t> bytes) {
#if defined(CROPREF_HAVE_JPEG)
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
    return decode_jpeg(bytes);
#endif
  return PpmReader(bytes).read();
}

ImageTensor decode_image(const std::string& bytes) {
  return decode_image(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::string encode_ppm(const ImageTensor& image) {
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height * 3;
  if (image.width <= 0 || image.height <= 0 || image.values.size() != n)
    throw Error(ErrorCode::Shape, "image tensor size does not match its dimensions");
  std::string out = "P6\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + n);
  for (double v : image.values) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(clamped * 255.0))));
  }
  return out;
}

std::string fixture_stem(const geo::GeoPoint& p, geo::Heading h) {
  return format_fixed(p.lat_deg, 6) + "_" + format_fixed(p.lon_deg, 6) + "_" +
         std::to_string(geo::degrees(h));
}

std::filesystem::path write_fixture(const std::filesystem::path& dir,
                                    const geo::GeoPoint& p, geo::Heading h,
                                    const ImageTensor& image,
                                    const std::optional<CaptureDate>& date) {
  const std::string stem = fixture_stem(p, h);
  const auto path = dir / (stem + ".ppm");
  textio::write_file(path, encode_ppm(image));
  if (date) textio::write_file(dir / (stem + ".meta"), "date=" + date->to_string() + "\n");
  return path;
}

FixtureSource::FixtureSource(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir_, ec))
    throw Error(ErrorCode::NotFound, "fixture directory " + dir_.string() + " does not exist");
  for (const auto& item : std::filesystem::directory_iterator(dir_)) {
    if (!item.is_regular_file()) continue;
    if (auto e = parse_fixture_name(item.path())) entries_.push_back(std::move(*e));
  }
  std::sort(entries_.begin(), entries_.end(),
            [](const FixtureEntry& a, const FixtureEntry& b) { return a.stem < b.stem; });
}

const FixtureEntry* FixtureSource::nearest(const geo::GeoPoint& p, geo::Heading h) const {
  const FixtureEntry* best = nullptr;
  double best_d = kFixtureToleranceM;
  for (const auto& e : entries_) {
    if (e.heading != h) continue;
    // Cheap reject before the trig-based distance.
    if (std::fabs(e.point.lat_deg - p.lat_deg) * geo::kMetersPerDegree > kFixtureToleranceM)
      continue;
    const double d = geo::geo_distance(p, e.point);
    if (d <= best_d && (best == nullptr || d < best_d)) {
      best = &e;
      best_d = d;
    }
  }
  return best;
}

StreetImageRecord fetch_street_image(const StreetRequest& req, const ImageSource& source) {
  req.validate();
  if (const auto* fixtures = std::get_if<const FixtureSource*>(&source)) {
    if (*fixtures == nullptr) throw Error(ErrorCode::InvalidArgument, "null fixture source");
    return fetch_fixture(req, **fixtures);
  }
#if defined(CROPREF_HAVE_HTTPLIB)
  return fetch_live(req, std::get<LiveSource>(source));
#else
  throw Error(ErrorCode::Transport, "live mode not compiled in");
#endif
}

StreetImageRecord load_image_file(const std::filesystem::path& path, std::string id,
                                  const geo::GeoPoint& point, geo::Heading heading) {
  StreetImageRecord record;
  record.id = std::move(id);
  record.capture_point = point;
  record.heading = heading;
  record.image = decode_image(textio::read_file(path));
  auto meta = path;
  meta.replace_extension(".meta");
  record.capture_date = read_meta(meta);
  return record;
}

}  // namespace cropref::imagery
