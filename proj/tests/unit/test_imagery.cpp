#include <doctest.h>

#include <cstdlib>
#include <thread>

#include "cropref/error.hpp"
#include "cropref/imagery.hpp"
#include "cropref/textio.hpp"
#include "test_util.hpp"

#if defined(CROPREF_HAVE_HTTPLIB)
#include <httplib.h>
#endif

using namespace cropref;
using namespace cropref::imagery;

namespace {

ImageTensor gradient_image(int h, int w) {
  ImageTensor img{h, w, std::vector<double>(static_cast<std::size_t>(h) * w * 3)};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int k = 0; k < 3; ++k) img.at(r, c, k) = static_cast<double>((r * 7 + c * 3 + k * 50) % 256) / 255.0;
  return img;
}

}  // namespace

TEST_CASE("ppm round trip is exact on 8-bit values") {
  const auto img = gradient_image(5, 9);
  const auto bytes = encode_ppm(img);
  CHECK(bytes.rfind("P6\n9 5\n255\n", 0) == 0);
  CHECK(decode_image(bytes) == img);
}

TEST_CASE("ppm decoder accepts comments and rejects truncation") {
  std::string ppm = "P6\n# a comment\n2 1\n255\n";
  ppm += std::string("\xff\x00\x00\x00\xff\x00", 6);
  const auto img = decode_image(ppm);
  CHECK(img.width == 2);
  CHECK(img.at(0, 0, 0) == 1.0);
  CHECK(img.at(0, 1, 1) == 1.0);
  CHECK_THROWS_AS(decode_image(ppm.substr(0, ppm.size() - 1)), Error);
  CHECK_THROWS_AS(decode_image(std::string("P3\n1 1\n255\n0 0 0\n")), Error);
}

TEST_CASE("request url carries size, location and heading") {
  StreetRequest req;
  req.point = {36.123456789, -119.5};
  req.heading = geo::Heading::East;
  req.api_key = "K";
  const auto url = build_street_request(req, "http://host");
  CHECK(url == "http://host/maps/api/streetview?size=640x640&location=36.123457,-119.500000&heading=90&key=K");
  req.fov_deg = 90;
  CHECK(build_street_request(req, "http://host").find("&fov=90") != std::string::npos);
  req.width = 641;
  CHECK_THROWS_AS(build_street_request(req, "http://host"), Error);
}

TEST_CASE("capture dates parse as year-month") {
  CHECK(CaptureDate::parse("2012-07") == CaptureDate{2012, 7});
  CHECK(CaptureDate::parse("2013-08-15") == CaptureDate{2013, 8});
  CHECK_FALSE(CaptureDate::parse("2012-13").has_value());
  CHECK_FALSE(CaptureDate::parse("july").has_value());
  CHECK(CaptureDate{2012, 7}.to_string() == "2012-07");
}

TEST_CASE("fixture lookup honours the 5 m tolerance and heading") {
  TempDir dir("fixtures");
  const geo::GeoPoint p{36.0, -120.0};
  write_fixture(dir.path, p, geo::Heading::North, gradient_image(4, 4), CaptureDate{2012, 7});
  write_fixture(dir.path, p, geo::Heading::South, gradient_image(4, 4), std::nullopt);
  const FixtureSource src(dir.path);
  CHECK(src.entries().size() == 2);

  StreetRequest req;
  req.point = geo::offset_point(p, geo::Heading::East, 4.9);
  req.heading = geo::Heading::North;
  const auto rec = fetch_street_image(req, &src);
  CHECK(rec.id == fixture_stem(p, geo::Heading::North));
  CHECK(rec.capture_date == CaptureDate{2012, 7});
  CHECK(rec.image.width == 4);

  req.point = geo::offset_point(p, geo::Heading::East, 6.0);
  CHECK(src.nearest(req.point, geo::Heading::North) == nullptr);
  try {
    fetch_street_image(req, &src);
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
  }

  req.point = p;
  req.heading = geo::Heading::East;
  CHECK_THROWS_AS(fetch_street_image(req, &src), Error);
  req.heading = geo::Heading::South;
  CHECK_FALSE(fetch_street_image(req, &src).capture_date.has_value());
}

TEST_CASE("missing fixture directory is reported") {
  CHECK_THROWS_AS(FixtureSource("/nonexistent/cropref/fixtures"), Error);
}

#if defined(CROPREF_HAVE_HTTPLIB)
TEST_CASE("live fetch against a local server") {
  httplib::Server server;
  const std::string body = encode_ppm(gradient_image(3, 3));
  std::string seen_query;
  server.Get("/maps/api/streetview", [&](const httplib::Request& req, httplib::Response& res) {
    seen_query = req.get_param_value("location");
    if (req.get_param_value("key") != "secret") {
      res.status = 403;
      return;
    }
    if (req.get_param_value("heading") == "180") {
      res.status = 404;
      return;
    }
    res.set_content(body, "image/x-portable-pixmap");
  });
  server.Get("/maps/api/streetview/metadata", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"OK","date":"2013-08"})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  LiveSource live;
  live.api_base = "http://127.0.0.1:" + std::to_string(port);
  live.api_key = "secret";
  live.timeout_s = 5;
  StreetRequest req;
  req.point = {41.5, -88.25};
  req.heading = geo::Heading::North;

  const auto rec = fetch_street_image(req, live);
  CHECK(seen_query == "41.500000,-88.250000");
  CHECK(rec.image == gradient_image(3, 3));
  CHECK(rec.capture_date == CaptureDate{2013, 8});

  req.heading = geo::Heading::South;
  try {
    fetch_street_image(req, live);
    FAIL("expected HTTP 404");
  } catch (const TransportError& e) {
    CHECK(e.status() == 404);
  }

  live.api_key = "wrong";
  req.heading = geo::Heading::North;
  try {
    fetch_street_image(req, live);
    FAIL("expected HTTP 403");
  } catch (const TransportError& e) {
    CHECK(e.status() == 403);
  }

  server.stop();
  worker.join();
}

TEST_CASE("live fetch without a key is refused before any request") {
  ::unsetenv(kApiKeyEnv);
  LiveSource live;
  live.api_base = "http://127.0.0.1:9";
  StreetRequest req;
  req.point = {41.5, -88.25};
  try {
    fetch_street_image(req, live);
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}
#endif
