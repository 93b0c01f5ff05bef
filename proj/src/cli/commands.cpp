#include <CLI11.hpp>

#include <algorithm>
#include <functional>
#include <map>
#include <ostream>
#include <set>

#include "cropref/cli.hpp"
#include "cropref/cropmapper.hpp"
#include "cropref/error.hpp"
#include "cropref/geo.hpp"
#include "cropref/imageclassifier.hpp"
#include "cropref/imagery.hpp"
#include "cropref/metrics.hpp"
#include "cropref/neuralnet.hpp"
#include "cropref/raster.hpp"
#include "cropref/refgen.hpp"
#include "cropref/synthworld.hpp"
#include "cropref/textio.hpp"

namespace cropref::cli {
namespace {

namespace fs = std::filesystem;
using textio::format_double;
using textio::format_fixed;

struct Ctx {
  std::string command;
  const Config& cfg;
  fs::path out;
  std::uint64_t seed = 0;
  std::ostream& log;
  std::ostream& err;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;

  std::string expand(std::string value) const {
    const std::string token = "${out}";
    for (auto pos = value.find(token); pos != std::string::npos; pos = value.find(token))
      value.replace(pos, token.size(), out.generic_string());
    return value;
  }

  fs::path path(const std::string& key, const std::string& fallback) const {
    return fs::path(expand(cfg.get_or(key, fallback)));
  }

  // Existing input file or directory; missing ones are reported by path.
  fs::path input(const std::string& key, const std::string& fallback) {
    fs::path p = path(key, fallback);
    std::error_code ec;
    if (!fs::exists(p, ec))
      throw Error(ErrorCode::NotFound, key + ": " + p.string() + " does not exist");
    inputs.push_back(p);
    return p;
  }

  fs::path output(const fs::path& rel) {
    fs::path p = out / rel;
    outputs.push_back(p);
    return p;
  }

  images::LabelTaxonomy taxonomy() const {
    return images::taxonomy_for_region(cfg.get_or("region", "california"));
  }
};

fs::path relative_to(const fs::path& file, const fs::path& dir) {
  const auto a = fs::absolute(file).lexically_normal();
  const auto b = fs::absolute(dir).lexically_normal();
  auto r = a.lexically_relative(b);
  return r.empty() ? a : r;
}

void write_catalog_at(std::vector<images::CatalogEntry> entries, const fs::path& path) {
  for (auto& e : entries) e.path = relative_to(e.path, path.parent_path());
  images::write_catalog(entries, path);
}

std::vector<double> parse_double_list(const std::vector<std::string>& items, const std::string& what) {
  std::vector<double> out;
  for (const auto& s : items) out.push_back(textio::parse_double(s, what));
  return out;
}

geo::BoundingBox parse_bbox(const Config& cfg, const std::string& key) {
  const auto v = parse_double_list(cfg.get_list(key), key);
  if (v.size() != 4)
    throw Error(ErrorCode::InvalidArgument, key + " must be min_lat,min_lon,max_lat,max_lon");
  geo::BoundingBox b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) throw Error(ErrorCode::InvalidArgument, key + " is not a valid bounding box");
  return b;
}

// Catalog rows as labelled items without decoding pixels.
std::vector<images::LabeledImage> catalog_items(const std::vector<images::CatalogEntry>& entries,
                                                const images::LabelTaxonomy& taxonomy) {
  std::vector<images::LabeledImage> out;
  for (const auto& e : entries) {
    if (e.label.empty())
      throw Error(ErrorCode::UnknownLabel, "catalog entry '" + e.id + "' has no label");
    images::LabeledImage item;
    item.record.id = e.id;
    item.record.capture_point = e.point;
    item.record.heading = e.heading;
    item.record.capture_date = e.date;
    item.label = taxonomy.index_of(e.label);
    item.confidence = e.confidence;
    out.push_back(std::move(item));
  }
  return out;
}

std::string history_csv(const nn::TrainResult& history) {
  std::string out = "epoch,loss,train_accuracy,val_accuracy\n";
  for (std::size_t i = 0; i < history.history.size(); ++i) {
    const auto& h = history.history[i];
    out += std::to_string(i + 1) + "," + format_double(h.loss) + "," + format_double(h.train_accuracy) +
           "," + format_double(h.val_accuracy) + "\n";
  }
  return out;
}

nn::TrainConfig train_config(const Config& cfg, const std::string& prefix, int epochs, std::uint64_t seed) {
  nn::TrainConfig tc;
  tc.epochs = static_cast<int>(cfg.get_int(prefix + ".epochs", epochs));
  tc.learning_rate = cfg.get_double(prefix + ".learning_rate", tc.learning_rate);
  tc.momentum = cfg.get_double(prefix + ".momentum", tc.momentum);
  tc.batch_size = static_cast<int>(cfg.get_int(prefix + ".batch_size", tc.batch_size));
  tc.dropout_rate = cfg.get_double(prefix + ".dropout", tc.dropout_rate);
  tc.seed = seed;
  tc.validate();
  return tc;
}

mapper::MapperConfig mapper_config(const Ctx& ctx) {
  mapper::MapperConfig mc;
  mc.train = train_config(ctx.cfg, "mapper", 20, ctx.seed);
  mc.train_fraction = ctx.cfg.get_double("mapper.train_fraction", mc.train_fraction);
  mc.min_points_per_class =
      static_cast<std::size_t>(ctx.cfg.get_int("mapper.min_points_per_class", 5));
  mc.widths.conv1 = static_cast<int>(ctx.cfg.get_int("mapper.conv1", mc.widths.conv1));
  mc.widths.conv2 = static_cast<int>(ctx.cfg.get_int("mapper.conv2", mc.widths.conv2));
  mc.widths.hidden = static_cast<int>(ctx.cfg.get_int("mapper.hidden", mc.widths.hidden));
  if (!(mc.train_fraction > 0.0 && mc.train_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "mapper.train_fraction must lie in (0, 1)");
  return mc;
}

std::vector<refgen::ReferencePoint> mapper_points(Ctx& ctx, const images::LabelTaxonomy& taxonomy) {
  auto points = refgen::read_refpoints(ctx.input("mapper.refpoints", "${out}/refs/refpoints.csv"), taxonomy);
  for (const auto& extra : ctx.cfg.get_list("mapper.extra_refpoints")) {
    const fs::path p(ctx.expand(extra));
    if (!fs::exists(p))
      throw Error(ErrorCode::NotFound, "mapper.extra_refpoints: " + p.string() + " does not exist");
    ctx.inputs.push_back(p);
    auto more = refgen::read_refpoints(p, taxonomy);
    points.insert(points.end(), more.begin(), more.end());
  }
  return points;
}

raster::SceneStack load_scenes(Ctx& ctx) {
  const auto dir = ctx.input("scenes.dir", "${out}/synth/scenes");
  const auto manifests = raster::load_scene_directory(dir);
  if (manifests.empty()) throw Error(ErrorCode::NotFound, "no scene manifests in " + dir.string());
  raster::IngestOptions opts;
  opts.reflectance_scale = ctx.cfg.get_double("scenes.reflectance_scale", 1.0);
  return raster::SceneStack(manifests, opts);
}

void cmd_synth(Ctx& ctx) {
  const Config& cfg = ctx.cfg;
  synth::WorldConfig wc;
  wc.taxonomy = ctx.taxonomy();
  wc.nrows = static_cast<int>(cfg.get_int("synth.rows", wc.nrows));
  wc.ncols = static_cast<int>(cfg.get_int("synth.cols", wc.ncols));
  wc.cell_m = cfg.get_double("synth.cell_m", wc.cell_m);
  wc.parcel_cells = static_cast<int>(cfg.get_int("synth.parcel_cells", wc.parcel_cells));
  wc.origin = {cfg.get_double("synth.origin_lat", wc.origin.lat_deg),
               cfg.get_double("synth.origin_lon", wc.origin.lon_deg)};
  wc.proportions = parse_double_list(cfg.get_list("synth.proportions"), "synth.proportions");
  wc.year = static_cast<int>(cfg.get_int("synth.year", wc.year));
  if (cfg.has("synth.scene_doys")) {
    wc.scene_doys.clear();
    for (const auto& d : cfg.get_list("synth.scene_doys"))
      wc.scene_doys.push_back(static_cast<int>(textio::parse_int(d, "synth.scene_doys")));
  }
  wc.sigma = cfg.get_double("synth.sigma", wc.sigma);
  wc.cloud_fraction = cfg.get_double("synth.cloud_fraction", wc.cloud_fraction);
  wc.image_size = static_cast<int>(cfg.get_int("synth.image_size", wc.image_size));
  wc.capture_stride = static_cast<int>(cfg.get_int("synth.capture_stride", wc.capture_stride));
  wc.road_width_y_m = cfg.get_double("shift.road_width_y_m", wc.road_width_y_m);
  wc.seed = ctx.seed;
  const int per_class = static_cast<int>(cfg.get_int("synth.train_per_class", 220));
  const int others_points = static_cast<int>(cfg.get_int("synth.others_points", 200));

  const synth::World world = synth::generate_world(wc);
  const fs::path dir = ctx.out / "synth";
  for (const char* sub : {"scenes", "fixtures", "training"}) fs::remove_all(dir / sub);

  raster::write_grid(world.truth, ctx.output("synth/truth.asc"));
  raster::write_grid(world.road_mask, ctx.output("synth/roads.asc"));
  textio::write_file(ctx.output("synth/legend.txt"), mapper::format_legend(wc.taxonomy));
  std::string parcels = "row0,col0,rows,cols,label\n";
  for (const auto& p : world.parcels)
    parcels += std::to_string(p.row0) + "," + std::to_string(p.col0) + "," + std::to_string(p.rows) + "," +
               std::to_string(p.cols) + "," + wc.taxonomy.classes[static_cast<std::size_t>(p.label)] + "\n";
  textio::write_file(ctx.output("synth/parcels.csv"), parcels);

  const auto manifests = synth::synthesize_scenes(world, ctx.output("synth/scenes"));
  const auto fixtures = synth::write_fixtures(world, ctx.output("synth/fixtures"));

  std::vector<geo::GeoPoint> captures;
  for (const auto& c : synth::capture_points(world)) captures.push_back(c.point);
  textio::write_file(ctx.output("synth/captures.csv"), synth::format_points_csv(captures));

  synth::WorldConfig train_wc = wc;
  train_wc.seed = ctx.seed + 1;
  const synth::World train_world = synth::generate_world(train_wc);
  const auto training = synth::render_training_set(train_world, per_class, ctx.seed + 2);
  const fs::path train_dir = ctx.output("synth/training");
  std::vector<images::CatalogEntry> train_entries;
  for (const auto& item : training) {
    const fs::path img = train_dir / "images" / (item.record.id + ".ppm");
    textio::write_file(img, imagery::encode_ppm(item.record.image));
    train_entries.push_back(images::to_catalog_entry(item, wc.taxonomy, img));
  }
  write_catalog_at(train_entries, train_dir / "catalog.csv");

  const auto others = synth::sample_others_points(world, others_points, ctx.seed);
  refgen::write_refpoints(others, wc.taxonomy, ctx.output("synth/others_refs.csv"));

  std::vector<std::size_t> per_parcel(wc.taxonomy.classes.size(), 0);
  for (const auto& p : world.parcels) ++per_parcel[static_cast<std::size_t>(p.label)];
  ctx.log << "world " << wc.nrows << "x" << wc.ncols << " cells, " << world.parcels.size() << " parcels\n";
  for (std::size_t c = 0; c < per_parcel.size(); ++c)
    ctx.log << "  " << wc.taxonomy.classes[c] << ": " << per_parcel[c] << " parcels\n";
  ctx.log << manifests.size() << " scenes, " << captures.size() << " capture points, " << fixtures.size()
          << " fixture images, " << training.size() << " training images, " << others.size()
          << " others reference points\n";
}

void cmd_grid(Ctx& ctx) {
  if (!ctx.cfg.has("grid.bbox")) throw Error(ErrorCode::InvalidArgument, "grid.bbox is required");
  const auto bbox = parse_bbox(ctx.cfg, "grid.bbox");
  const double spacing = ctx.cfg.get_double("grid.spacing_m", 100.0);
  const auto points = geo::make_sampling_grid(bbox, spacing);
  textio::write_file(ctx.output("grid/points.csv"), synth::format_points_csv(points));
  ctx.log << points.size() << " sampling points at " << format_double(spacing) << " m spacing\n";
}

void cmd_fetch(Ctx& ctx) {
  const auto points_path = ctx.input("fetch.points", "${out}/synth/captures.csv");
  const auto points = synth::parse_points_csv(textio::read_file(points_path), points_path.string());
  std::vector<geo::Heading> headings;
  if (ctx.cfg.has("fetch.headings")) {
    for (const auto& h : ctx.cfg.get_list("fetch.headings")) {
      const auto parsed = geo::parse_heading(h);
      if (!parsed) throw Error(ErrorCode::InvalidArgument, "fetch.headings: bad heading '" + h + "'");
      headings.push_back(*parsed);
    }
  } else {
    headings.assign(std::begin(geo::kAllHeadings), std::end(geo::kAllHeadings));
  }
  const std::string mode = ctx.cfg.get_or("fetch.mode", "fixtures");
  const int width = static_cast<int>(ctx.cfg.get_int("fetch.width", 640));
  const int height = static_cast<int>(ctx.cfg.get_int("fetch.height", 640));

  std::vector<images::CatalogEntry> entries;
  std::set<std::string> seen;
  std::string missing = "lat,lon,heading,reason\n";
  std::size_t missing_count = 0;
  auto note_missing = [&](const geo::GeoPoint& p, geo::Heading h, const std::string& reason) {
    missing += format_fixed(p.lat_deg, 7) + "," + format_fixed(p.lon_deg, 7) + "," +
               std::to_string(geo::degrees(h)) + "," + reason + "\n";
    ++missing_count;
  };

  if (mode == "fixtures") {
    const imagery::FixtureSource source(ctx.input("fetch.fixtures", "${out}/synth/fixtures"));
    for (const auto& p : points) {
      for (auto h : headings) {
        const auto* hit = source.nearest(p, h);
        if (!hit) {
          note_missing(p, h, "no fixture within 5 m");
          continue;
        }
        if (!seen.insert(hit->stem).second) continue;
        const auto rec = imagery::load_image_file(hit->path, hit->stem, hit->point, hit->heading);
        entries.push_back({hit->stem, hit->path, "", std::nullopt, hit->point, hit->heading, rec.capture_date});
      }
    }
  } else if (mode == "live") {
    imagery::LiveSource live;
    live.api_base = ctx.cfg.get_or("fetch.api_base", imagery::kDefaultApiBase);
    live.timeout_s = static_cast<int>(ctx.cfg.get_int("fetch.timeout_s", live.timeout_s));
    const fs::path dir = ctx.output("fetch/images");
    for (const auto& p : points) {
      for (auto h : headings) {
        imagery::StreetRequest req;
        req.point = p;
        req.heading = h;
        req.width = width;
        req.height = height;
        try {
          const auto rec = imagery::fetch_street_image(req, live);
          if (!seen.insert(rec.id).second) continue;
          const auto path = imagery::write_fixture(dir, p, h, rec.image, rec.capture_date);
          entries.push_back({rec.id, path, "", std::nullopt, p, h, rec.capture_date});
        } catch (const TransportError& e) {
          if (e.status() != 404) throw;
          note_missing(p, h, "HTTP 404");
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NotFound) throw;
          note_missing(p, h, "no imagery");
        }
      }
    }
  } else {
    throw Error(ErrorCode::InvalidArgument, "fetch.mode must be 'fixtures' or 'live'");
  }
  write_catalog_at(entries, ctx.output("fetch/catalog.csv"));
  textio::write_file(ctx.output("fetch/missing.csv"), missing);
  ctx.log << entries.size() << " images fetched, " << missing_count << " requests without imagery\n";
}

void cmd_train_images(Ctx& ctx) {
  const auto taxonomy = ctx.taxonomy();
  const auto entries = images::read_catalog(ctx.input("images.catalog", "${out}/synth/training/catalog.csv"));
  const auto items = images::load_labeled_images(entries, taxonomy);
  auto ratios_v = parse_double_list(ctx.cfg.get_list("images.split"), "images.split");
  if (ratios_v.empty()) ratios_v = {0.6, 0.2, 0.2};
  if (ratios_v.size() != 3) throw Error(ErrorCode::InvalidArgument, "images.split needs three ratios");
  const auto parts = images::split_dataset(items, {ratios_v[0], ratios_v[1], ratios_v[2]}, ctx.seed);

  images::ImageNetConfig nc;
  nc.widths.conv1 = static_cast<int>(ctx.cfg.get_int("images.conv1", nc.widths.conv1));
  nc.widths.conv2 = static_cast<int>(ctx.cfg.get_int("images.conv2", nc.widths.conv2));
  nc.widths.conv3 = static_cast<int>(ctx.cfg.get_int("images.conv3", nc.widths.conv3));
  nc.widths.hidden = static_cast<int>(ctx.cfg.get_int("images.hidden", nc.widths.hidden));
  const auto tc = train_config(ctx.cfg, "images", 30, ctx.seed);

  const auto result = images::train_image_classifier(parts[0], parts[1], taxonomy, nc, tc);
  const auto cm = images::evaluate_images(result.network, parts[2], taxonomy);

  nn::save_model(result.network, ctx.output("images/model.rtnn"));
  textio::write_file(ctx.output("images/history.csv"), history_csv(result.history));
  textio::write_file(ctx.output("images/test_confusion.txt"), metrics::format_confusion_table(cm));
  textio::write_file(ctx.output("images/test_accuracy.csv"), metrics::format_accuracy_csv(cm));
  std::string split = "id,split\n";
  const char* names[] = {"train", "val", "test"};
  for (std::size_t s = 0; s < 3; ++s)
    for (const auto& it : parts[s]) split += it.record.id + "," + names[s] + "\n";
  textio::write_file(ctx.output("images/split.csv"), split);
  ctx.log << "train/val/test: " << parts[0].size() << "/" << parts[1].size() << "/" << parts[2].size() << "\n";
  ctx.log << "held-out OA " << format_fixed(metrics::overall_accuracy(cm), 4) << "\n";
}

void cmd_classify_images(Ctx& ctx) {
  const nn::Network net = nn::load_model(ctx.input("classify.model", "${out}/images/model.rtnn"));
  const auto taxonomy = images::taxonomy_of(net);
  auto entries = images::read_catalog(ctx.input("classify.catalog", "${out}/fetch/catalog.csv"));
  const auto records = images::load_images(entries);
  const auto labeled = images::classify_images(net, records, taxonomy);
  std::vector<std::size_t> counts(taxonomy.classes.size(), 0);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].label = taxonomy.classes[static_cast<std::size_t>(labeled[i].label)];
    entries[i].confidence = labeled[i].confidence;
    ++counts[static_cast<std::size_t>(labeled[i].label)];
  }
  write_catalog_at(entries, ctx.output("classify/catalog.csv"));
  ctx.log << entries.size() << " images classified\n";
  for (std::size_t c = 0; c < counts.size(); ++c) ctx.log << "  " << taxonomy.classes[c] << ": " << counts[c] << "\n";
}

void cmd_qc(Ctx& ctx) {
  const auto taxonomy = ctx.taxonomy();
  const auto entries = images::read_catalog(ctx.input("qc.catalog", "${out}/classify/catalog.csv"));
  std::vector<std::string> rejections;
  if (ctx.cfg.has("qc.rejections")) rejections = images::read_rejection_list(ctx.input("qc.rejections", ""));
  const double min_conf = ctx.cfg.get_double("qc.min_confidence", images::kDefaultMinConfidence);
  const auto items = catalog_items(entries, taxonomy);
  const auto result = images::qc_filter(items, min_conf, rejections, taxonomy);
  for (const auto& w : result.warnings) ctx.err << "warning: " << w << "\n";

  std::map<std::string, const images::CatalogEntry*> by_id;
  for (const auto& e : entries) by_id[e.id] = &e;
  auto to_entries = [&](const std::vector<images::LabeledImage>& list) {
    std::vector<images::CatalogEntry> out;
    for (const auto& it : list) out.push_back(*by_id.at(it.record.id));
    return out;
  };
  write_catalog_at(to_entries(result.kept), ctx.output("qc/kept.csv"));
  write_catalog_at(to_entries(result.dropped), ctx.output("qc/dropped.csv"));
  std::string reasons = "id,reason\n";
  for (std::size_t i = 0; i < result.dropped.size(); ++i)
    reasons += result.dropped[i].record.id + "," + result.reasons[i] + "\n";
  textio::write_file(ctx.output("qc/drop_reasons.csv"), reasons);
  ctx.log << result.kept.size() << " kept, " << result.dropped.size() << " dropped\n";
}

void cmd_make_refs(Ctx& ctx) {
  const auto taxonomy = ctx.taxonomy();
  const auto entries = images::read_catalog(ctx.input("refs.catalog", "${out}/qc/kept.csv"));
  const auto items = catalog_items(entries, taxonomy);
  geo::ShiftParams sp;
  sp.road_width_y_m = ctx.cfg.get_double("shift.road_width_y_m", sp.road_width_y_m);
  sp.pixel_size_x_m = ctx.cfg.get_double("shift.pixel_size_x_m", sp.pixel_size_x_m);
  const auto min_per_class = static_cast<std::size_t>(ctx.cfg.get_int("refs.min_per_class", 0));
  const auto result = refgen::generate_reference_points(items, sp, min_per_class);
  refgen::write_refpoints(result.points, taxonomy, ctx.output("refs/refpoints.csv"));

  std::vector<std::size_t> counts(taxonomy.classes.size(), 0);
  for (const auto& p : result.points) ++counts[static_cast<std::size_t>(p.label)];
  std::string summary = "class,points\n";
  for (std::size_t c = 0; c < counts.size(); ++c) summary += taxonomy.classes[c] + "," + std::to_string(counts[c]) + "\n";
  for (const auto& s : result.short_classes) {
    summary += "# short: " + taxonomy.classes[static_cast<std::size_t>(s.label)] + " has " +
               std::to_string(s.points) + " points\n";
    ctx.err << "warning: class " << taxonomy.classes[static_cast<std::size_t>(s.label)] << " has only "
            << s.points << " reference points\n";
  }
  textio::write_file(ctx.output("refs/summary.csv"), summary);
  ctx.log << result.points.size() << " reference points from " << items.size() << " images\n";
}

void cmd_validate_refs(Ctx& ctx) {
  const auto taxonomy = ctx.taxonomy();
  const auto points = refgen::read_refpoints(ctx.input("validate.refpoints", "${out}/refs/refpoints.csv"), taxonomy);
  const auto truth = raster::read_grid(ctx.input("truth.path", "${out}/synth/truth.asc"));
  const auto result = refgen::validate_reference_points(points, truth, taxonomy);
  textio::write_file(ctx.output("validate/agreement.csv"), metrics::format_agreement_csv(result.report));
  textio::write_file(ctx.output("validate/agreement.txt"), metrics::format_agreement_table(result.report));
  refgen::write_refpoints(result.disagreeing, taxonomy, ctx.output("validate/disagreeing.csv"));
  ctx.log << metrics::format_agreement_table(result.report);
}

void cmd_select_features(Ctx& ctx) {
  const auto taxonomy = ctx.taxonomy();
  const auto points = mapper_points(ctx, taxonomy);
  const auto scenes = load_scenes(ctx);
  std::vector<raster::FeatureName> candidates(raster::kAllFeatures.begin(), raster::kAllFeatures.end());
  if (ctx.cfg.has("mapper.candidates")) candidates = raster::parse_feature_list(*ctx.cfg.get("mapper.candidates"));
  const auto result = mapper::forward_select(candidates, points, scenes, taxonomy, mapper_config(ctx));

  std::string csv = "step,features,accuracy,accepted\n";
  for (std::size_t s = 0; s < result.steps.size(); ++s) {
    const auto& step = result.steps[s];
    for (const auto& c : step.candidates) {
      auto set = step.base;
      set.push_back(c.feature);
      csv += std::to_string(s + 1) + "," + raster::join_features(set, "+") + "," + format_double(c.accuracy) +
             "," + (step.accepted && *step.accepted == c.feature ? "1" : "0") + "\n";
    }
  }
  textio::write_file(ctx.output("select/selection.csv"), csv);
  textio::write_file(ctx.output("select/selection.txt"), mapper::format_selection_report(result));
  textio::write_file(ctx.output("select/selected.txt"), raster::join_features(result.selected) + "\n");
  ctx.log << mapper::format_selection_report(result);
}

void cmd_train_mapper(Ctx& ctx) {
  const auto taxonomy = ctx.taxonomy();
  std::string feature_text = ctx.cfg.get_or("mapper.features", "EVI,ENDVI,SWIR1,SWIR2");
  if (textio::trim(feature_text) == "selected")
    feature_text = textio::read_file(ctx.input("mapper.selection", "${out}/select/selected.txt"));
  const auto features = raster::parse_feature_list(textio::trim(feature_text));
  const auto points = mapper_points(ctx, taxonomy);
  const auto scenes = load_scenes(ctx);
  mapper::MapperConfig mc = mapper_config(ctx);

  std::vector<double> sweep = parse_double_list(ctx.cfg.get_list("mapper.dropout_sweep"), "mapper.dropout_sweep");
  std::optional<mapper::PixelTrainingResult> best;
  double best_rate = mc.train.dropout_rate;
  if (sweep.empty()) {
    best = mapper::train_pixel_classifier(features, points, scenes, taxonomy, mc);
  } else {
    std::string csv = "dropout,heldout_accuracy\n";
    for (double rate : sweep) {
      mc.train.dropout_rate = rate;
      auto r = mapper::train_pixel_classifier(features, points, scenes, taxonomy, mc);
      const double acc = metrics::overall_accuracy(r.heldout);
      csv += format_double(rate) + "," + format_double(acc) + "\n";
      if (!best || acc > metrics::overall_accuracy(best->heldout)) {
        best = std::move(r);
        best_rate = rate;
      }
    }
    textio::write_file(ctx.output("mapper/sweep.csv"), csv);
  }

  nn::save_model(best->network, ctx.output("mapper/model.rtnn"));
  textio::write_file(ctx.output("mapper/history.csv"), history_csv(best->history));
  textio::write_file(ctx.output("mapper/heldout_confusion.txt"), metrics::format_confusion_table(best->heldout));
  textio::write_file(ctx.output("mapper/heldout_accuracy.csv"), metrics::format_accuracy_csv(best->heldout));
  ctx.log << "features " << raster::join_features(features) << ", dropout " << format_double(best_rate) << "\n";
  ctx.log << "dropped " << best->dropped_unusable << " unusable and " << best->dropped_duplicate
          << " duplicate reference pixels\n";
  ctx.log << "held-out OA " << format_fixed(metrics::overall_accuracy(best->heldout), 4) << "\n";
}

void cmd_map(Ctx& ctx) {
  const nn::Network net = nn::load_model(ctx.input("map.model", "${out}/mapper/model.rtnn"));
  const auto features = mapper::model_features(net);
  const auto scenes = load_scenes(ctx);
  const auto bbox = ctx.cfg.has("map.bbox") ? parse_bbox(ctx.cfg, "map.bbox") : scenes.reference().extent();
  const auto map = mapper::predict_crop_map(net, scenes, features, bbox);
  raster::write_grid(map.grid, ctx.output("map/cropmap.asc"));
  textio::write_file(ctx.output("map/cropmap_legend.txt"), mapper::format_legend(map.taxonomy));
  const auto counts = metrics::area_counts(map.grid);
  for (const auto& [cls, n] : counts)
    ctx.log << "  " << map.taxonomy.classes.at(static_cast<std::size_t>(cls)) << ": " << n << " pixels\n";
}

void cmd_evaluate(Ctx& ctx) {
  const fs::path map_path = ctx.input("evaluate.map", "${out}/map/cropmap.asc");
  fs::path default_legend = map_path;
  default_legend.replace_filename(map_path.stem().string() + "_legend.txt");
  const fs::path legend_path = ctx.input("evaluate.legend", default_legend.string());
  const auto taxonomy =
      mapper::parse_legend(textio::read_file(legend_path), ctx.cfg.get_or("region", "california"));
  const mapper::CropMap map{raster::read_grid(map_path), taxonomy};
  const auto truth = raster::read_grid(ctx.input("truth.path", "${out}/synth/truth.asc"));
  const auto eval = mapper::evaluate_crop_map(map, truth);
  textio::write_file(ctx.output("evaluate/confusion.txt"), metrics::format_confusion_table(eval.confusion));
  textio::write_file(ctx.output("evaluate/confusion.csv"), metrics::format_confusion_csv(eval.confusion));
  textio::write_file(ctx.output("evaluate/accuracy.csv"), metrics::format_accuracy_csv(eval.confusion));
  textio::write_file(ctx.output("evaluate/agreement.csv"), metrics::format_agreement_csv(eval.agreement));
  textio::write_file(ctx.output("evaluate/areas.csv"), mapper::format_area_report(eval, taxonomy));
  ctx.log << metrics::format_confusion_table(eval.confusion);
  ctx.log << mapper::format_area_report(eval, taxonomy);
}

// Files under `p` (or `p` itself), hashed in sorted path order.
std::uint64_t content_hash(const fs::path& p) {
  if (fs::is_regular_file(p)) return textio::fnv1a64(textio::read_file(p));
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string digest;
  for (const auto& f : files)
    digest += f.lexically_relative(p).generic_string() + " " + textio::hex64(textio::fnv1a64(textio::read_file(f))) + "\n";
  return textio::fnv1a64(digest);
}

void write_run_manifest(const Ctx& ctx) {
  std::string m = "command = " + ctx.command + "\n";
  m += "seed = " + std::to_string(ctx.seed) + "\n";
  m += "config_hash = " + textio::hex64(ctx.cfg.hash()) + "\n";
  for (const auto& [k, v] : ctx.cfg.values()) m += "config." + k + " = " + v + "\n";
  for (const auto& p : ctx.inputs) m += "input = " + p.generic_string() + "\n";
  for (const auto& p : ctx.outputs)
    if (fs::exists(p)) m += "output = " + p.generic_string() + " fnv1a64=" + textio::hex64(content_hash(p)) + "\n";
  textio::write_file(ctx.out / "manifests" / (ctx.command + ".manifest"), m);
}

const std::map<std::string, std::function<void(Ctx&)>, std::less<>>& command_table() {
  static const std::map<std::string, std::function<void(Ctx&)>, std::less<>> table = {
      {"synth", cmd_synth},
      {"grid", cmd_grid},
      {"fetch", cmd_fetch},
      {"train-images", cmd_train_images},
      {"classify-images", cmd_classify_images},
      {"qc", cmd_qc},
      {"make-refs", cmd_make_refs},
      {"validate-refs", cmd_validate_refs},
      {"select-features", cmd_select_features},
      {"train-mapper", cmd_train_mapper},
      {"map", cmd_map},
      {"evaluate", cmd_evaluate},
  };
  return table;
}

std::string usage_text() {
  std::string s = "usage: cropref <command> [--config PATH] [--seed N] [--out DIR]\ncommands:";
  for (const char* c : kCommands) s += std::string(" ") + c;
  return s + "\n";
}

}  // namespace

int run_command(std::string_view name, const Config& config, const std::filesystem::path& out_dir,
                std::ostream& out, std::ostream& err) {
  const auto& table = command_table();
  const auto it = table.find(name);
  if (it == table.end()) {
    err << "error: unknown command '" << name << "'\n" << usage_text();
    return kUsage;
  }
  try {
    const auto seed = config.get("seed");
    if (!seed) throw Error(ErrorCode::InvalidArgument, "a seed is required (config key 'seed' or --seed)");
    const long long s = textio::parse_int(*seed, "seed");
    if (s < 0) throw Error(ErrorCode::InvalidArgument, "seed must be non-negative");
    Ctx ctx{std::string(name), config, out_dir, static_cast<std::uint64_t>(s), out, err, {}, {}};
    it->second(ctx);
    write_run_manifest(ctx);
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Street-view ground referencing and crop-type mapping pipeline", "cropref"};
  std::string config_path;
  long long seed = -1;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "Configuration file (key = value lines)");
  app.add_option("--seed", seed, "Random seed, overrides the config");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.fallthrough();
  app.require_subcommand(1, 1);
  for (const char* c : kCommands) app.add_subcommand(c)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help() << usage_text();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << usage_text();
    return kUsage;
  }

  Config config;
  try {
    if (!config_path.empty()) config = Config::load(config_path);
    if (seed >= 0) config.set("seed", std::to_string(seed));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return run_command(app.get_subcommands().front()->get_name(), config, out_dir, out, err);
}

}  // namespace cropref::cli
