// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance            all criteria
//   acceptance 3 5        selected criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/constructed_scenes.hpp"
#include "cropref/cli.hpp"
#include "cropref/cropmapper.hpp"
#include "cropref/error.hpp"
#include "cropref/geo.hpp"
#include "cropref/imageclassifier.hpp"
#include "cropref/metrics.hpp"
#include "cropref/neuralnet.hpp"
#include "cropref/raster.hpp"
#include "cropref/refgen.hpp"
#include "cropref/simd.hpp"
#include "cropref/synthworld.hpp"
#include "cropref/textio.hpp"

namespace fs = std::filesystem;
using namespace cropref;
using textio::format_fixed;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double limit_s;
  std::function<Outcome()> run;
};

fs::path workdir() { return fs::path(CROPREF_ACCEPTANCE_WORKDIR); }

std::string two(double v) { return format_fixed(v, 2); }

// ---------------------------------------------------------------------------

struct PrintedMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::int64_t>> counts;  // predicted rows
  std::vector<std::string> ua, pa;
  std::string oa;
};

// As printed in the published figure, class order as in the figure.
PrintedMatrix california_printed() {
  return {{"alfalfa", "almond", "corn", "cotton", "grape", "others", "pistachio"},
          {{174, 0, 3, 11, 0, 0, 0},
           {0, 129, 0, 1, 2, 0, 2},
           {1, 1, 101, 16, 0, 0, 1},
           {0, 0, 0, 116, 0, 0, 0},
           {0, 1, 1, 1, 118, 0, 1},
           {1, 1, 0, 0, 0, 142, 0},
           {0, 10, 3, 0, 4, 1, 109}},
          {"0.94", "0.96", "0.84", "1.00", "0.97", "0.99", "0.86"},
          {"0.99", "0.91", "0.94", "0.80", "0.94", "0.99", "0.96"},
          "0.93"};
}

PrintedMatrix illinois_printed() {
  return {{"corn", "others", "soybean"},
          {{118, 3, 5}, {0, 139, 0}, {1, 4, 119}},
          {"0.94", "1.00", "0.96"},
          {"0.99", "0.95", "0.96"},
          "0.97"};
}

void compare_printed(const std::string& region, const PrintedMatrix& p, std::vector<std::string>& bad) {
  std::vector<int> pred, truth;
  for (std::size_t i = 0; i < p.classes.size(); ++i)
    for (std::size_t j = 0; j < p.classes.size(); ++j)
      for (std::int64_t n = 0; n < p.counts[i][j]; ++n) {
        pred.push_back(static_cast<int>(i));
        truth.push_back(static_cast<int>(j));
      }
  const auto cm = metrics::confusion_matrix(pred, truth, p.classes);
  for (std::size_t k = 0; k < p.classes.size(); ++k) {
    const auto ua = two(metrics::user_accuracy(cm, k));
    const auto pa = two(metrics::producer_accuracy(cm, k));
    if (ua != p.ua[k])
      bad.push_back(region + " " + p.classes[k] + " UA " + ua + " (" + std::to_string(cm.counts[k][k]) + "/" +
                    std::to_string(cm.row_sum(k)) + ") vs printed " + p.ua[k]);
    if (pa != p.pa[k])
      bad.push_back(region + " " + p.classes[k] + " PA " + pa + " (" + std::to_string(cm.counts[k][k]) + "/" +
                    std::to_string(cm.column_sum(k)) + ") vs printed " + p.pa[k]);
  }
  const auto oa = two(metrics::overall_accuracy(cm));
  if (oa != p.oa) bad.push_back(region + " OA " + oa + " vs printed " + p.oa);
}

Outcome metric_reproduction() {
  std::vector<std::string> bad;
  compare_printed("CA", california_printed(), bad);
  compare_printed("IL", illinois_printed(), bad);

  const auto il = illinois_printed();
  auto cm = metrics::empty_matrix(il.classes);
  cm.counts = il.counts;
  if (metrics::producer_accuracy(cm, "corn") != 118.0 / 119.0) bad.push_back("IL corn PA != 118/119");
  if (metrics::user_accuracy(cm, "corn") != 118.0 / 126.0) bad.push_back("IL corn UA != 118/126");

  auto ca = metrics::empty_matrix(california_printed().classes);
  ca.counts = california_printed().counts;
  std::string detail = "CA OA " + std::to_string(ca.trace()) + "/" + std::to_string(ca.total()) + ", IL OA " +
                       std::to_string(cm.trace()) + "/" + std::to_string(cm.total());
  if (bad.empty()) return {true, detail};
  detail += "; mismatches: ";
  for (std::size_t i = 0; i < bad.size(); ++i) detail += (i ? "; " : "") + bad[i];
  return {false, detail};
}

Outcome agreement_reproduction() {
  const std::vector<metrics::ClassAgreement> counts = {{"alfalfa", 1077, 1120}, {"almond", 1943, 1984},
                                                       {"corn", 1002, 1115},    {"cotton", 980, 1001},
                                                       {"grape", 173, 195},     {"pistachio", 955, 994}};
  const std::map<std::string, int> table = {{"alfalfa", 96}, {"almond", 98}, {"corn", 90},
                                            {"cotton", 98},  {"grape", 89},  {"pistachio", 96}};
  const auto report = metrics::agreement_from_counts(counts);
  bool ok = report.classes.size() == table.size();
  std::string detail;
  for (const auto& c : report.classes) {
    const int pct = metrics::percent_half_up(c.fraction());
    ok = ok && pct == table.at(c.class_name);
    detail += c.class_name + " " + std::to_string(pct) + "% ";
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------

double oracle(raster::FeatureName f, double blue, double green, double red, double nir, double swir1) {
  const double nd = raster::kDefaultNodata;
  double num = 0, den = 1;
  switch (f) {
    case raster::FeatureName::NDVI: num = nir - red; den = nir + red; break;
    case raster::FeatureName::EVI: num = 2.5 * (nir - red); den = nir + 6.0 * red - 7.0 * blue + 1.0; break;
    case raster::FeatureName::ENDVI: num = (nir + green) - 2.0 * blue; den = (nir + green) + 2.0 * blue; break;
    case raster::FeatureName::LSWI: num = nir - swir1; den = nir + swir1; break;
    default: return nd;
  }
  return std::fabs(den) < 1e-12 ? nd : num / den;
}

Outcome vi_oracle() {
  constexpr int n = 1000;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::map<raster::Band, raster::RasterGrid> grids;
  for (auto b : raster::kAllBands) {
    raster::RasterGrid g;
    g.nrows = 1;
    g.ncols = n;
    g.cellsize = 1.0;
    g.values.resize(n);
    grids[b] = g;
  }
  for (int i = 0; i < n; ++i)
    for (auto b : raster::kAllBands) grids[b].values[i] = u(rng);
  raster::BandGrids view;
  for (auto& [b, g] : grids) view[b] = &g;

  const std::vector<raster::FeatureName> kinds = {raster::FeatureName::NDVI, raster::FeatureName::EVI,
                                                  raster::FeatureName::ENDVI, raster::FeatureName::LSWI};
  std::vector<simd::Level> levels{simd::Level::Scalar};
  if (simd::detected_level() == simd::Level::Avx2) levels.push_back(simd::Level::Avx2);
  const auto restore = simd::active_level();
  double worst = 0;
  bool in_range = true;
  for (auto level : levels) {
    simd::set_active_level(level);
    for (auto k : kinds) {
      const auto out = raster::compute_index(k, view);
      for (int i = 0; i < n; ++i) {
        const double want = oracle(k, grids[raster::Band::Blue].values[i], grids[raster::Band::Green].values[i],
                                   grids[raster::Band::Red].values[i], grids[raster::Band::NIR].values[i],
                                   grids[raster::Band::SWIR1].values[i]);
        worst = std::max(worst, std::fabs(out.values[i] - want));
        if (k != raster::FeatureName::EVI && (out.values[i] < -1.0 || out.values[i] > 1.0)) in_range = false;
      }
    }
  }
  simd::set_active_level(restore);
  std::string lv;
  for (auto l : levels) lv += std::string(simd::to_string(l)) + " ";
  return {worst <= 1e-12 && in_range,
          "max abs error " + textio::format_double(worst) + " over levels " + lv +
              (in_range ? "; ratio indices within [-1,1]" : "; ratio index out of range")};
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  // Default layer compositions; widths and input sizes are reduced so the
  // per-parameter central differences stay affordable.
  const std::vector<std::pair<std::string, nn::NetworkSpec>> nets = {
      {"image", nn::default_image_network({3, 24, 24}, 7, 0.2, {4, 6, 8, 10})},
      {"pixel", nn::default_pixel_network(10, 4, 7, 0.2, {4, 4, 16})},
  };
  double worst = 0;
  std::string detail;
  for (const auto& [name, spec] : nets) {
    double net_worst = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto net = nn::build_network(spec, seed);
      std::mt19937_64 rng(seed * 7919);
      std::normal_distribution<double> d(0.0, 1.0);
      nn::Sample s{nn::Tensor(spec.input), static_cast<int>(seed % 7)};
      for (auto& v : s.input.values) v = d(rng);
      net_worst = std::max(net_worst, nn::gradient_check(net, s, 1e-5));
    }
    worst = std::max(worst, net_worst);
    std::string layers;
    for (const auto& l : spec.layers) layers += (layers.empty() ? "" : "|") + nn::describe(l);
    detail += name + " [" + layers + "] max rel err " + textio::format_double(net_worst) + "; ";
  }
  return {worst < 1e-4, detail + "10 seeds each"};
}

// ---------------------------------------------------------------------------

Outcome geometry() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lat(-70.0, 70.0), lon(-179.0, 179.0), dist(1e-3, 1000.0);
  double worst_rt = 0;
  for (int i = 0; i < 100000; ++i) {
    const geo::GeoPoint p{lat(rng), lon(rng)};
    const double d = dist(rng);
    const auto q = geo::offset_point(p, geo::kAllHeadings[i % 4], d);
    worst_rt = std::max(worst_rt, std::fabs(geo::geo_distance(p, q) - d) / d);
  }
  std::uniform_real_distribution<double> y(0.0, 40.0), x(1.0, 60.0);
  std::uniform_int_distribution<int> k(0, 5);
  double worst_shift = 0;
  for (int i = 0; i < 10000; ++i) {
    geo::ShiftParams sp;
    sp.road_width_y_m = y(rng);
    sp.pixel_size_x_m = x(rng);
    sp.extra_steps = k(rng);
    const geo::GeoPoint cam{lat(rng), lon(rng)};
    const auto moved = geo::shift_to_parcel(cam, geo::kAllHeadings[i % 4], sp);
    const double expect = 0.5 * sp.road_width_y_m + sp.pixel_size_x_m * (1 + sp.extra_steps);
    worst_shift = std::max(worst_shift, std::fabs(geo::geo_distance(cam, moved) - expect));
  }
  return {worst_rt <= 1e-6 && worst_shift <= 1e-2,
          "round trip max rel err " + textio::format_double(worst_rt) + ", shift max abs err " +
              textio::format_double(worst_shift) + " m"};
}

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::vector<const char*> argv{"cropref"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  if (code != 0) std::cerr << "  cropref " << args.front() << " exited " << code << ": " << err.str();
  return code;
}

std::map<std::string, std::uint64_t> snapshot(const fs::path& dir) {
  std::map<std::string, std::uint64_t> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file())
      files[e.path().lexically_relative(dir).generic_string()] = textio::fnv1a64(textio::read_file(e.path()));
  return files;
}

const char* kDeterminismConfig = R"(# small world, short training
seed = 11
region = california
synth.rows = 100
synth.cols = 100
synth.scene_doys = 60, 120, 180, 240, 300
synth.image_size = 24
synth.train_per_class = 40
synth.others_points = 40
grid.bbox = 35.40, -119.40, 35.42, -119.38
grid.spacing_m = 500
images.epochs = 20
images.conv1 = 8
images.conv2 = 8
images.conv3 = 16
images.hidden = 32
refs.min_per_class = 8
mapper.extra_refpoints = ${out}/synth/others_refs.csv
mapper.candidates = EVI, SWIR1, NIR
mapper.features = selected
mapper.epochs = 3
mapper.conv1 = 4
mapper.conv2 = 4
mapper.hidden = 16
mapper.min_points_per_class = 2
mapper.dropout_sweep = 0.1, 0.3
)";

Outcome determinism() {
  const fs::path dir = workdir() / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto conf = dir / "pipeline.conf";
  textio::write_file(conf, kDeterminismConfig);
  const auto out = (dir / "out").string();

  std::vector<std::map<std::string, std::uint64_t>> snaps;
  for (int pass = 0; pass < 2; ++pass) {
    for (const char* cmd : cli::kCommands)
      if (run({cmd, "--config", conf.string(), "--out", out}) != 0)
        return {false, std::string("command ") + cmd + " failed on pass " + std::to_string(pass + 1)};
    snaps.push_back(snapshot(out));
  }
  std::vector<std::string> diff;
  for (const auto& [path, hash] : snaps[0]) {
    const auto it = snaps[1].find(path);
    if (it == snaps[1].end() || it->second != hash) diff.push_back(path);
  }
  if (snaps[1].size() != snaps[0].size()) diff.push_back("file set changed");
  std::string detail = std::to_string(snaps[0].size()) + " artifact files over " +
                       std::to_string(std::size(cli::kCommands)) + " commands, run twice";
  if (diff.empty()) return {true, detail};
  detail += "; differing: ";
  for (const auto& d : diff) detail += d + " ";
  return {false, detail};
}

// ---------------------------------------------------------------------------

Outcome image_classification() {
  synth::WorldConfig wc;
  wc.seed = 2;
  const auto world = synth::generate_world(wc);
  const auto items = synth::render_training_set(world, 200, 3);
  const auto tax = wc.taxonomy;
  const auto parts = images::split_dataset(items, {0.6, 0.2, 0.2}, 4);
  nn::TrainConfig tc;
  tc.epochs = 30;
  tc.seed = 4;
  const auto r = images::train_image_classifier(parts[0], parts[1], tax, {}, tc);
  const auto cm = images::evaluate_images(r.network, parts[2], tax);
  const double oa = metrics::overall_accuracy(cm);
  return {oa >= 0.90, std::to_string(items.size()) + " images (" + std::to_string(parts[0].size()) + "/" +
                          std::to_string(parts[1].size()) + "/" + std::to_string(parts[2].size()) +
                          "), held-out OA " + format_fixed(oa, 4)};
}

// ---------------------------------------------------------------------------

Outcome synthetic_referencing() {
  // 196 = 15 parcels of 12 cells plus 16 roads, so no parcel is clipped at the edge.
  synth::WorldConfig wc;
  wc.nrows = 196;
  wc.ncols = 196;
  const auto world = synth::generate_world(wc);
  const auto tax = wc.taxonomy;
  const int others = tax.others_index();
  std::vector<images::LabeledImage> kept;
  for (const auto& c : synth::capture_points(world))
    for (auto h : geo::kAllHeadings) {
      const int label = synth::visible_class(world, c.row, c.col, h);
      if (label == others) continue;
      images::LabeledImage it;
      it.record.id = imagery::fixture_stem(c.point, h);
      it.record.capture_point = c.point;
      it.record.heading = h;
      it.label = label;
      kept.push_back(std::move(it));
    }
  geo::ShiftParams sp;
  sp.road_width_y_m = wc.road_width_y_m;
  sp.pixel_size_x_m = wc.cell_m;
  // Ground size of the smallest parcel side; east-west cells shrink with cos(lat).
  const double ew_m = wc.cell_m * std::cos(wc.origin.lat_deg * M_PI / 180.0);
  double parcel_m = 1e300;
  for (const auto& p : world.parcels) parcel_m = std::min({parcel_m, p.rows * wc.cell_m, p.cols * ew_m});
  const double shift = sp.displacement_m();
  bool ok = parcel_m >= 3 * shift;
  std::string detail = "smallest parcel side " + format_fixed(parcel_m, 0) + " m vs shift " + format_fixed(shift, 0) + " m;";

  // Plain shift, then every image pushed through all extra steps.
  for (std::size_t min_per_class : {std::size_t{0}, kept.size() * 4}) {
    const auto gen = refgen::generate_reference_points(kept, sp, min_per_class);
    const auto v = refgen::validate_reference_points(gen.points, world.truth, tax);
    double lowest = 1.0;
    for (const auto& c : v.report.classes) lowest = std::min(lowest, c.fraction());
    ok = ok && lowest >= 0.94 && v.report.classes.size() == tax.classes.size() - 1;
    detail += (min_per_class == 0 ? " base " : " augmented ") + std::to_string(gen.points.size()) +
              " points, lowest class agreement " + format_fixed(lowest, 4) + ";";
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------

const char* kEndToEndConfig = R"(seed = 7
region = california
mapper.extra_refpoints = ${out}/synth/others_refs.csv
mapper.features = EVI, ENDVI, SWIR1, SWIR2
mapper.candidates = EVI, ENDVI, SWIR1, SWIR2
)";

Outcome mapping_and_selection() {
  std::string detail;
  bool ok = true;

  // Planted signal: only NIR separates the classes.
  {
    const fs::path dir = workdir() / "planted";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cs = write_constructed_scenes(dir, 36, 36, 60, 17);
    const raster::SceneStack stack(cs.manifests);
    const std::vector<raster::FeatureName> cands = {raster::FeatureName::Red,  raster::FeatureName::Blue,
                                                    raster::FeatureName::Green, raster::FeatureName::NIR,
                                                    raster::FeatureName::SWIR1, raster::FeatureName::SWIR2};
    mapper::MapperConfig mc;
    const auto r = mapper::forward_select(cands, cs.points, stack, images::illinois_taxonomy(), mc);
    const int k = static_cast<int>(cands.size());
    bool increasing = !r.history.empty() && r.history.front() > r.baseline_accuracy;
    for (std::size_t i = 1; i < r.history.size(); ++i) increasing = increasing && r.history[i] > r.history[i - 1];
    const bool first = !r.selected.empty() && r.selected.front() == raster::FeatureName::NIR;
    ok = ok && increasing && first && r.models_trained <= k * (k + 1) / 2;
    detail += "planted: selected " + raster::join_features(r.selected, "+") + ", " +
              std::to_string(r.models_trained) + " models (bound " + std::to_string(k * (k + 1) / 2) + "), " +
              (increasing ? "strictly increasing" : "NOT increasing") + "; ";
  }

  // Full synthetic pipeline through the CLI.
  const fs::path dir = workdir() / "end_to_end";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto conf = (dir / "pipeline.conf").string();
  textio::write_file(conf, kEndToEndConfig);
  const auto out = (dir / "out").string();
  for (const char* cmd : {"synth", "fetch", "train-images", "classify-images", "qc", "make-refs",
                          "validate-refs", "select-features", "train-mapper", "map", "evaluate"})
    if (run({cmd, "--config", conf, "--out", out}) != 0) return {false, detail + std::string(cmd) + " failed"};

  const auto lines = textio::read_lines(fs::path(out) / "select" / "selection.csv");
  const auto selected = textio::read_file(fs::path(out) / "select" / "selected.txt");
  detail += "pipeline selection " + std::string(textio::trim(selected)) + "; ";

  const auto truth = raster::read_grid(fs::path(out) / "synth" / "truth.asc");
  const auto map = raster::read_grid(fs::path(out) / "map" / "cropmap.asc");
  const auto tax = images::california_taxonomy();
  const auto eval = mapper::evaluate_crop_map({map, tax}, truth);
  const double oa = metrics::overall_accuracy(eval.confusion);
  ok = ok && oa >= 0.90;
  detail += "map OA " + format_fixed(oa, 4) + ", area diff:";
  for (std::size_t c = 0; c < tax.classes.size(); ++c) {
    const auto t = eval.truth_area.count(static_cast<int>(c)) ? eval.truth_area.at(static_cast<int>(c)) : 0;
    const auto m = eval.map_area.count(static_cast<int>(c)) ? eval.map_area.at(static_cast<int>(c)) : 0;
    const double rel = t == 0 ? (m == 0 ? 0.0 : 1.0) : std::fabs(static_cast<double>(m - t)) / t;
    ok = ok && rel <= 0.10;
    detail += " " + tax.classes[c] + " " + format_fixed(100 * rel, 1) + "%";
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "metric reproduction from the published confusion matrices", 1, metric_reproduction},
      {2, "agreement percentages from published counts", 1, agreement_reproduction},
      {3, "vegetation indices match an independent oracle", 1, vi_oracle},
      {4, "backprop matches central differences", 120, gradient_correctness},
      {5, "offset, distance and parcel shift geometry", 1, geometry},
      {6, "CLI reruns produce byte-identical artifacts", 600, determinism},
      {7, "synthetic image classification held-out OA >= 0.90", 600, image_classification},
      {8, "synthetic reference points agree with truth >= 0.94", 60, synthetic_referencing},
      {9, "forward selection and synthetic mapping", 1200, mapping_and_selection},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::stoi(argv[i]));

  bool all_pass = true;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_s) {
      o.pass = false;
      o.detail += "; runtime over the " + format_fixed(c.limit_s, 0) + " s budget";
    }
    all_pass = all_pass && o.pass;
    std::cout << "criterion " << c.id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.title << " ["
              << format_fixed(secs, 2) << " s] " << o.detail << std::endl;
  }
  return all_pass ? 0 : 1;
}
