#include "cropref/cropmapper.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cropref/error.hpp"
#include "cropref/split.hpp"
#include "cropref/textio.hpp"

namespace cropref::mapper {
namespace {

using raster::FeatureName;

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += textio::format_double(v[i]);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (auto t : textio::split(text, ',')) out.push_back(textio::parse_double(t, "model metadata"));
  return out;
}

// Column positions of `subset` inside the dataset's feature list.
std::vector<int> columns_of(const PixelDataset& data, std::span<const FeatureName> subset) {
  std::vector<int> cols;
  for (FeatureName f : subset) {
    const auto it = std::find(data.features.begin(), data.features.end(), f);
    if (it == data.features.end()) throw Error(ErrorCode::InvalidArgument, "feature not in dataset");
    cols.push_back(static_cast<int>(it - data.features.begin()));
  }
  return cols;
}

Normalization fit_normalization(const PixelDataset& data, std::span<const std::size_t> rows,
                                std::span<const int> cols) {
  const int nf = static_cast<int>(data.features.size());
  Normalization norm;
  for (int c : cols) {
    double sum = 0.0;
    double sq = 0.0;
    std::size_t n = 0;
    for (auto r : rows) {
      const auto& m = data.stacks[r];
      for (int t = 0; t < data.scenes; ++t) {
        const double v = m[static_cast<std::size_t>(t * nf + c)];
        sum += v;
        sq += v * v;
        ++n;
      }
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
    const double sd = std::sqrt(var);
    norm.mean.push_back(mean);
    norm.scale.push_back(sd > 1e-12 ? sd : 1.0);
  }
  return norm;
}

nn::Tensor to_tensor(std::span<const double> stack, int scenes, int stack_features,
                     std::span<const int> cols, const Normalization& norm) {
  const int nf = static_cast<int>(cols.size());
  nn::Tensor x(nn::Shape{1, scenes, nf});
  for (int t = 0; t < scenes; ++t)
    for (int f = 0; f < nf; ++f)
      x.at(0, t, f) = (stack[static_cast<std::size_t>(t * stack_features + cols[static_cast<std::size_t>(f)])] -
                       norm.mean[static_cast<std::size_t>(f)]) /
                      norm.scale[static_cast<std::size_t>(f)];
  return x;
}

std::vector<nn::Sample> make_samples(const PixelDataset& data, std::span<const std::size_t> rows,
                                     std::span<const int> cols, const Normalization& norm) {
  std::vector<nn::Sample> out;
  out.reserve(rows.size());
  const int nf = static_cast<int>(data.features.size());
  for (auto r : rows)
    out.push_back({to_tensor(data.stacks[r], data.scenes, nf, cols, norm), data.labels[r]});
  return out;
}

void check_classes(const PixelDataset& data, const images::LabelTaxonomy& taxonomy,
                   std::size_t min_per_class) {
  std::map<int, std::size_t> counts;
  for (int l : data.labels) {
    if (l < 0 || l >= static_cast<int>(taxonomy.classes.size()))
      throw Error(ErrorCode::UnknownLabel, "reference label outside the taxonomy");
    ++counts[l];
  }
  if (counts.size() < 2)
    throw Error(ErrorCode::MissingClass, "reference points cover fewer than two classes");
  for (const auto& [label, n] : counts)
    if (n < min_per_class)
      throw Error(ErrorCode::Stratification,
                  "class '" + taxonomy.classes[static_cast<std::size_t>(label)] + "' has only " +
                      std::to_string(n) + " usable reference pixels (need " +
                      std::to_string(min_per_class) + ")");
}

std::array<std::vector<std::size_t>, 2> split_rows(const PixelDataset& data, double train_fraction,
                                                   std::uint64_t seed) {
  const std::array<double, 2> ratios{train_fraction, 1.0 - train_fraction};
  auto parts = split::stratified_split(data.labels, ratios, seed);
  return {std::move(parts[0]), std::move(parts[1])};
}

nn::Network build_pixel_net(int scenes, int features, int classes, const MapperConfig& cfg,
                            std::uint64_t seed) {
  return nn::build_network(
      nn::default_pixel_network(scenes, features, classes, cfg.train.dropout_rate, cfg.widths), seed);
}

std::vector<FeatureName> sorted_unique(std::span<const FeatureName> features) {
  std::vector<FeatureName> out(features.begin(), features.end());
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end())
    throw Error(ErrorCode::InvalidArgument, "duplicate feature in candidate list");
  return out;
}

}  // namespace

PixelDataset build_pixel_dataset(std::span<const refgen::ReferencePoint> points,
                                 const raster::SceneStack& scenes,
                                 std::span<const FeatureName> features) {
  if (features.empty()) throw Error(ErrorCode::InvalidArgument, "feature list is empty");
  PixelDataset data;
  data.scenes = scenes.scene_count();
  data.features.assign(features.begin(), features.end());
  const raster::RasterGrid& ref = scenes.reference();
  std::set<std::tuple<int, int, int>> seen;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto cell = ref.cell_of(points[i].location);
    if (!cell)
      throw Error(ErrorCode::OutOfExtent, "reference point from '" + points[i].source_image_id +
                                              "' lies outside the scene extent");
    if (!seen.insert({cell->first, cell->second, points[i].label}).second) {
      ++data.dropped_duplicate;
      continue;
    }
    try {
      auto stack = scenes.extract_cell(features, cell->first, cell->second);
      data.stacks.push_back(std::move(stack.matrix));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnusablePixel) throw;
      ++data.dropped_unusable;
      continue;
    }
    data.point_index.push_back(i);
    data.labels.push_back(points[i].label);
    data.rows.push_back(cell->first);
    data.cols.push_back(cell->second);
  }
  return data;
}

FeatureSelectionResult forward_select(std::span<const FeatureName> candidates,
                                      std::span<const refgen::ReferencePoint> points,
                                      const raster::SceneStack& scenes,
                                      const images::LabelTaxonomy& taxonomy,
                                      const MapperConfig& cfg) {
  cfg.train.validate();
  const auto pool = sorted_unique(candidates);
  if (pool.size() < 2) throw Error(ErrorCode::InvalidArgument, "forward selection needs at least two candidates");

  const PixelDataset data = build_pixel_dataset(points, scenes, pool);
  check_classes(data, taxonomy, 2);
  const auto [train_rows, val_rows] = split_rows(data, cfg.train_fraction, cfg.train.seed);

  FeatureSelectionResult result;
  result.dropped_unusable = data.dropped_unusable;
  const int k = static_cast<int>(taxonomy.classes.size());
  {
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (auto r : train_rows) ++counts[static_cast<std::size_t>(data.labels[r])];
    const int majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    std::size_t hits = 0;
    for (auto r : val_rows) hits += data.labels[r] == majority ? 1 : 0;
    result.baseline_accuracy = static_cast<double>(hits) / static_cast<double>(val_rows.size());
  }

  double incumbent = result.baseline_accuracy;
  std::vector<FeatureName> remaining = pool;
  for (int step = 0;; ++step) {
    if (remaining.empty()) {
      result.stop_reason = "candidates exhausted";
      break;
    }
    SelectionStep s;
    s.base = result.selected;
    std::optional<CandidateScore> best;
    for (FeatureName cand : remaining) {
      std::vector<FeatureName> subset = result.selected;
      subset.push_back(cand);
      const auto cols = columns_of(data, subset);
      const Normalization norm = fit_normalization(data, train_rows, cols);
      const auto train_samples = make_samples(data, train_rows, cols, norm);
      const auto val_samples = make_samples(data, val_rows, cols, norm);
      nn::TrainConfig tc = cfg.train;
      tc.seed = cfg.train.seed + static_cast<std::uint64_t>(step);
      nn::Network net = build_pixel_net(data.scenes, static_cast<int>(subset.size()), k, cfg, tc.seed);
      nn::train(net, train_samples, val_samples, tc);
      ++result.models_trained;
      const CandidateScore score{cand, nn::accuracy(net, val_samples)};
      s.candidates.push_back(score);
      if (!best || score.accuracy > best->accuracy) best = score;
    }
    if (best->accuracy > incumbent) {
      incumbent = best->accuracy;
      s.accepted = best->feature;
      result.selected.push_back(best->feature);
      result.history.push_back(incumbent);
      remaining.erase(std::find(remaining.begin(), remaining.end(), best->feature));
      s.incumbent = incumbent;
      result.steps.push_back(std::move(s));
    } else {
      s.incumbent = incumbent;
      result.steps.push_back(std::move(s));
      result.stop_reason = "no candidate improved validation accuracy";
      break;
    }
  }
  return result;
}

PixelTrainingResult train_pixel_classifier(std::span<const FeatureName> features,
                                           std::span<const refgen::ReferencePoint> points,
                                           const raster::SceneStack& scenes,
                                           const images::LabelTaxonomy& taxonomy,
                                           const MapperConfig& cfg) {
  cfg.train.validate();
  taxonomy.validate();
  std::vector<FeatureName> feats(features.begin(), features.end());
  sorted_unique(feats);
  const PixelDataset data = build_pixel_dataset(points, scenes, feats);
  check_classes(data, taxonomy, cfg.min_points_per_class);
  const auto [train_rows, val_rows] = split_rows(data, cfg.train_fraction, cfg.train.seed);

  std::vector<int> cols(feats.size());
  for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = static_cast<int>(i);
  const Normalization norm = fit_normalization(data, train_rows, cols);
  const auto train_samples = make_samples(data, train_rows, cols, norm);
  const auto val_samples = make_samples(data, val_rows, cols, norm);

  const int k = static_cast<int>(taxonomy.classes.size());
  PixelTrainingResult result{build_pixel_net(data.scenes, static_cast<int>(feats.size()), k, cfg, cfg.train.seed),
                             {}, metrics::empty_matrix(taxonomy.classes), data.dropped_unusable,
                             data.dropped_duplicate, {}, {}};
  auto& meta = result.network.metadata;
  meta["kind"] = "pixel";
  meta["region"] = taxonomy.region;
  std::string classes;
  for (std::size_t i = 0; i < taxonomy.classes.size(); ++i) classes += (i ? "," : "") + taxonomy.classes[i];
  meta["classes"] = classes;
  meta["features"] = raster::join_features(feats);
  meta["scenes"] = std::to_string(data.scenes);
  meta["norm_mean"] = join_doubles(norm.mean);
  meta["norm_scale"] = join_doubles(norm.scale);

  result.history = nn::train(result.network, train_samples, val_samples, cfg.train);

  std::vector<int> truth;
  nn::Workspace ws;
  for (std::size_t i = 0; i < val_rows.size(); ++i) {
    const auto pred = nn::argmax(result.network.forward(val_samples[i].input, nn::Mode::Infer, ws));
    result.heldout_predictions.push_back(pred.label);
    result.heldout_cells.emplace_back(data.rows[val_rows[i]], data.cols[val_rows[i]]);
    truth.push_back(val_samples[i].label);
  }
  result.heldout = metrics::confusion_matrix(result.heldout_predictions, truth, taxonomy.classes);
  return result;
}

std::vector<FeatureName> model_features(const nn::Network& net) {
  const auto it = net.metadata.find("features");
  if (it == net.metadata.end()) throw Error(ErrorCode::Structure, "model carries no feature list");
  return raster::parse_feature_list(it->second);
}

CropMap predict_crop_map(const nn::Network& net, const raster::SceneStack& scenes,
                         std::span<const FeatureName> features, const geo::BoundingBox& extent) {
  const auto trained = model_features(net);
  if (!std::equal(trained.begin(), trained.end(), features.begin(), features.end()))
    throw Error(ErrorCode::InvalidArgument, "feature list " + raster::join_features(features) +
                                                " differs from the model's " +
                                                raster::join_features(trained));
  const auto scenes_meta = net.metadata.find("scenes");
  if (scenes_meta == net.metadata.end() ||
      textio::parse_int(scenes_meta->second, "model scenes") != scenes.scene_count())
    throw Error(ErrorCode::InvalidArgument, "model was trained on a different number of scenes");
  Normalization norm{parse_doubles(net.metadata.at("norm_mean")),
                     parse_doubles(net.metadata.at("norm_scale"))};
  if (norm.mean.size() != trained.size() || norm.scale.size() != trained.size())
    throw Error(ErrorCode::Structure, "model normalization does not match its features");

  const raster::RasterGrid& ref = scenes.reference();
  if (!extent.valid()) throw Error(ErrorCode::InvalidArgument, "invalid map extent");
  const geo::BoundingBox cover = ref.extent();
  const double tol = 1e-9;
  if (extent.min_lat_deg < cover.min_lat_deg - tol || extent.max_lat_deg > cover.max_lat_deg + tol ||
      extent.min_lon_deg < cover.min_lon_deg - tol || extent.max_lon_deg > cover.max_lon_deg + tol)
    throw Error(ErrorCode::OutOfExtent, "map extent exceeds the scene coverage");

  CropMap map{raster::RasterGrid::like(ref, ref.nodata), images::taxonomy_of(net)};
  std::vector<int> cols(trained.size());
  for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = static_cast<int>(i);
  nn::Workspace ws;
  const int nf = static_cast<int>(trained.size());
  for (int r = 0; r < ref.nrows; ++r) {
    for (int c = 0; c < ref.ncols; ++c) {
      if (!extent.contains(ref.cell_center(r, c))) continue;
      raster::FeatureStack stack;
      try {
        stack = scenes.extract_cell(trained, r, c);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnusablePixel) throw;
        continue;
      }
      const auto x = to_tensor(stack.matrix, stack.scenes, nf, cols, norm);
      map.grid.at(r, c) = nn::argmax(net.forward(x, nn::Mode::Infer, ws)).label;
    }
  }
  return map;
}

MapEvaluation evaluate_crop_map(const CropMap& map, const raster::RasterGrid& truth) {
  raster::require_same_georeference(map.grid, truth, "crop map and truth raster");
  const int k = static_cast<int>(map.taxonomy.classes.size());
  MapEvaluation eval{metrics::empty_matrix(map.taxonomy.classes), {}, metrics::area_counts(map.grid),
                     metrics::area_counts(truth)};
  for (std::size_t i = 0; i < truth.values.size(); ++i) {
    const double m = map.grid.values[i];
    const double t = truth.values[i];
    if (map.grid.is_nodata(m) || truth.is_nodata(t)) continue;
    const long pi = std::lround(m);
    const long ti = std::lround(t);
    if (pi < 0 || pi >= k || ti < 0 || ti >= k)
      throw Error(ErrorCode::UnknownLabel, "class value outside the taxonomy");
    ++eval.confusion.counts[static_cast<std::size_t>(pi)][static_cast<std::size_t>(ti)];
  }
  std::vector<metrics::ClassAgreement> per_class;
  for (int c = 0; c < k; ++c)
    per_class.push_back({map.taxonomy.classes[static_cast<std::size_t>(c)],
                         eval.confusion.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)],
                         eval.confusion.row_sum(static_cast<std::size_t>(c))});
  eval.agreement = metrics::agreement_from_counts(per_class);
  return eval;
}

std::string format_selection_report(const FeatureSelectionResult& result) {
  auto row = [](std::string input, double acc, bool accepted) {
    std::string line = input;
    if (line.size() < 40) line.append(40 - line.size(), ' ');
    return line + " " + textio::format_fixed(acc, 4) + (accepted ? "  *" : "") + "\n";
  };
  std::string out = "MODEL INPUT                              ACCURACY\n";
  out += row("(majority-class baseline)", result.baseline_accuracy, false);
  for (const auto& step : result.steps) {
    for (const auto& c : step.candidates) {
      std::vector<FeatureName> set = step.base;
      set.push_back(c.feature);
      out += row(raster::join_features(set, " + "), c.accuracy,
                 step.accepted && *step.accepted == c.feature);
    }
  }
  out += "selected: " + (result.selected.empty() ? std::string("(none)") : raster::join_features(result.selected)) + "\n";
  out += "models trained: " + std::to_string(result.models_trained) + "\n";
  out += "stop: " + result.stop_reason + "\n";
  return out;
}

std::string format_area_report(const MapEvaluation& eval, const images::LabelTaxonomy& taxonomy) {
  std::string out = "class,map_pixels,truth_pixels,relative_difference\n";
  for (std::size_t c = 0; c < taxonomy.classes.size(); ++c) {
    const auto m = eval.map_area.contains(static_cast<int>(c)) ? eval.map_area.at(static_cast<int>(c)) : 0;
    const auto t = eval.truth_area.contains(static_cast<int>(c)) ? eval.truth_area.at(static_cast<int>(c)) : 0;
    out += taxonomy.classes[c] + "," + std::to_string(m) + "," + std::to_string(t) + ",";
    out += t == 0 ? std::string("NA")
                  : textio::format_fixed(static_cast<double>(m - t) / static_cast<double>(t), 4);
    out += "\n";
  }
  return out;
}

std::string format_legend(const images::LabelTaxonomy& taxonomy) {
  std::string out;
  for (std::size_t i = 0; i < taxonomy.classes.size(); ++i)
    out += std::to_string(i) + "=" + taxonomy.classes[i] + "\n";
  return out;
}

images::LabelTaxonomy parse_legend(std::string_view text, std::string region) {
  images::LabelTaxonomy t;
  t.region = std::move(region);
  for (auto line : textio::split(text, '\n')) {
    line = textio::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::Parse, "legend line lacks '='");
    const auto idx = textio::parse_int(textio::trim(line.substr(0, eq)), "legend index");
    if (idx != static_cast<long long>(t.classes.size()))
      throw Error(ErrorCode::Parse, "legend indices must run 0, 1, 2, ...");
    t.classes.emplace_back(textio::trim(line.substr(eq + 1)));
  }
  t.validate();
  return t;
}

}  // namespace cropref::mapper
