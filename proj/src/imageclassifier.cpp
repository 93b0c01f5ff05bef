#include "cropref/imageclassifier.hpp"

#include <algorithm>
#include <set>

#include "cropref/error.hpp"
#include "cropref/split.hpp"
#include "cropref/textio.hpp"

namespace cropref::images {
namespace {

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

int LabelTaxonomy::index_of(std::string_view name) const {
  const auto it = std::find(classes.begin(), classes.end(), name);
  if (it == classes.end())
    throw Error(ErrorCode::UnknownLabel,
                "label '" + std::string(name) + "' is not in the " + region + " taxonomy");
  return static_cast<int>(it - classes.begin());
}

int LabelTaxonomy::others_index() const { return index_of(kOthers); }

void LabelTaxonomy::validate() const {
  if (classes.size() < 2) throw Error(ErrorCode::InvalidArgument, "taxonomy needs at least two classes");
  std::set<std::string> seen;
  for (const auto& c : classes) {
    if (c.empty() || c.find_first_of(", \t\n") != std::string::npos)
      throw Error(ErrorCode::InvalidArgument, "class names must be single tokens");
    if (!seen.insert(c).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate class name '" + c + "'");
  }
  if (!seen.contains(kOthers))
    throw Error(ErrorCode::InvalidArgument, "taxonomy lacks the 'others' class");
}

LabelTaxonomy california_taxonomy() {
  return {"california", {"alfalfa", "almond", "corn", "cotton", "grape", "pistachio", kOthers}};
}

LabelTaxonomy illinois_taxonomy() { return {"illinois", {"corn", "soybean", kOthers}}; }

LabelTaxonomy taxonomy_for_region(std::string_view region) {
  const std::string r = textio::lower(textio::trim(region));
  if (r == "california" || r == "ca") return california_taxonomy();
  if (r == "illinois" || r == "il") return illinois_taxonomy();
  throw Error(ErrorCode::InvalidArgument, "unknown region '" + std::string(region) + "'");
}

std::vector<CatalogEntry> parse_catalog(std::string_view text, std::string_view source) {
  std::vector<CatalogEntry> out;
  bool header_seen = false;
  std::size_t line_no = 0;
  for (auto line : textio::split(text, '\n')) {
    ++line_no;
    line = textio::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kCatalogHeader)
        throw Error(ErrorCode::Parse, std::string(source) + ": expected header '" + kCatalogHeader + "'");
      header_seen = true;
      continue;
    }
    const auto f = textio::split_csv_line(line);
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (f.size() != 8) throw Error(ErrorCode::Parse, where + ": expected 8 fields");
    CatalogEntry e;
    e.id = f[0];
    e.path = f[1];
    e.label = f[2];
    if (!f[3].empty()) e.confidence = textio::parse_double(f[3], where + " confidence");
    e.point = {textio::parse_double(f[4], where + " lat"), textio::parse_double(f[5], where + " lon")};
    const auto h = geo::parse_heading(f[6]);
    if (!h) throw Error(ErrorCode::Parse, where + ": bad heading '" + f[6] + "'");
    e.heading = *h;
    if (!f[7].empty()) {
      e.date = imagery::CaptureDate::parse(f[7]);
      if (!e.date) throw Error(ErrorCode::Parse, where + ": bad date '" + f[7] + "'");
    }
    if (e.id.empty()) throw Error(ErrorCode::Parse, where + ": empty id");
    out.push_back(std::move(e));
  }
  if (!header_seen) throw Error(ErrorCode::Parse, std::string(source) + ": empty catalog");
  return out;
}

std::vector<CatalogEntry> read_catalog(const std::filesystem::path& path) {
  auto entries = parse_catalog(textio::read_file(path), path.string());
  for (auto& e : entries)
    if (e.path.is_relative()) e.path = path.parent_path() / e.path;
  return entries;
}

std::string format_catalog(std::span<const CatalogEntry> entries) {
  std::string out = std::string(kCatalogHeader) + "\n";
  for (const auto& e : entries) {
    out += e.id + "," + e.path.generic_string() + "," + e.label + ",";
    if (e.confidence) out += textio::format_fixed(*e.confidence, 6);
    out += "," + textio::format_fixed(e.point.lat_deg, 7) + "," +
           textio::format_fixed(e.point.lon_deg, 7) + "," +
           std::to_string(geo::degrees(e.heading)) + ",";
    if (e.date) out += e.date->to_string();
    out += "\n";
  }
  return out;
}

void write_catalog(std::span<const CatalogEntry> entries, const std::filesystem::path& path) {
  textio::write_file(path, format_catalog(entries));
}

std::vector<imagery::StreetImageRecord> load_images(std::span<const CatalogEntry> entries) {
  std::vector<imagery::StreetImageRecord> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    auto rec = imagery::load_image_file(e.path, e.id, e.point, e.heading);
    if (e.date) rec.capture_date = e.date;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<LabeledImage> load_labeled_images(std::span<const CatalogEntry> entries,
                                              const LabelTaxonomy& taxonomy) {
  std::vector<LabeledImage> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.label.empty())
      throw Error(ErrorCode::UnknownLabel, "catalog entry '" + e.id + "' has no label");
    LabeledImage item;
    item.label = taxonomy.index_of(e.label);
    item.confidence = e.confidence;
    item.record = imagery::load_image_file(e.path, e.id, e.point, e.heading);
    if (e.date) item.record.capture_date = e.date;
    out.push_back(std::move(item));
  }
  return out;
}

CatalogEntry to_catalog_entry(const LabeledImage& item, const LabelTaxonomy& taxonomy,
                              const std::filesystem::path& path) {
  CatalogEntry e;
  e.id = item.record.id;
  e.path = path;
  e.label = taxonomy.classes.at(static_cast<std::size_t>(item.label));
  e.confidence = item.confidence;
  e.point = item.record.capture_point;
  e.heading = item.record.heading;
  e.date = item.record.capture_date;
  return e;
}

std::array<std::vector<LabeledImage>, 3> split_dataset(std::span<const LabeledImage> items,
                                                       std::array<double, 3> ratios,
                                                       std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(items.size());
  for (const auto& it : items) labels.push_back(it.label);
  const auto parts = split::stratified_split(labels, ratios, seed);
  std::array<std::vector<LabeledImage>, 3> out;
  for (std::size_t s = 0; s < 3; ++s)
    for (auto i : parts[s]) out[s].push_back(items[i]);
  return out;
}

nn::Tensor to_tensor(const imagery::ImageTensor& image) {
  nn::Tensor t(nn::Shape{imagery::ImageTensor::kChannels, image.height, image.width});
  for (int c = 0; c < imagery::ImageTensor::kChannels; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) t.at(c, y, x) = image.at(y, x, c) - 0.5;
  return t;
}

namespace {

std::vector<nn::Sample> to_samples(std::span<const LabeledImage> items) {
  std::vector<nn::Sample> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back({to_tensor(it.record.image), it.label});
  return out;
}

void require_shape(const nn::Network& net, const imagery::ImageTensor& image, const std::string& id) {
  const nn::Shape want = net.input_shape();
  if (want.channels != imagery::ImageTensor::kChannels || want.height != image.height ||
      want.width != image.width)
    throw Error(ErrorCode::Shape, "image '" + id + "' is " + std::to_string(image.width) + "x" +
                                      std::to_string(image.height) + " but the network expects " +
                                      want.to_string());
}

void require_taxonomy(const nn::Network& net, const LabelTaxonomy& taxonomy) {
  if (net.classes() != static_cast<int>(taxonomy.classes.size()))
    throw Error(ErrorCode::Shape, "network has " + std::to_string(net.classes()) +
                                      " classes, taxonomy has " +
                                      std::to_string(taxonomy.classes.size()));
}

}  // namespace

ImageTrainingResult train_image_classifier(std::span<const LabeledImage> train,
                                           std::span<const LabeledImage> val,
                                           const LabelTaxonomy& taxonomy,
                                           const ImageNetConfig& net_cfg,
                                           const nn::TrainConfig& train_cfg) {
  taxonomy.validate();
  train_cfg.validate();
  if (train.empty()) throw Error(ErrorCode::MissingClass, "empty training set");
  const int k = static_cast<int>(taxonomy.classes.size());
  std::vector<int> per_class(static_cast<std::size_t>(k), 0);
  for (const auto& it : train) {
    if (it.label < 0 || it.label >= k) throw Error(ErrorCode::UnknownLabel, "label outside taxonomy");
    ++per_class[static_cast<std::size_t>(it.label)];
  }
  for (int c = 0; c < k; ++c)
    if (per_class[static_cast<std::size_t>(c)] == 0)
      throw Error(ErrorCode::MissingClass,
                  "class '" + taxonomy.classes[static_cast<std::size_t>(c)] +
                      "' is absent from the training set");

  const auto& first = train.front().record.image;
  for (const auto& it : train)
    if (it.record.image.height != first.height || it.record.image.width != first.width)
      throw Error(ErrorCode::Shape, "training images differ in size");

  const nn::Shape input{imagery::ImageTensor::kChannels, first.height, first.width};
  ImageTrainingResult result{
      nn::build_network(nn::default_image_network(input, k, train_cfg.dropout_rate, net_cfg.widths),
                        train_cfg.seed),
      {}};
  result.network.metadata["kind"] = "image";
  result.network.metadata["region"] = taxonomy.region;
  result.network.metadata["classes"] = join(taxonomy.classes, ',');

  for (const auto& it : val) require_shape(result.network, it.record.image, it.record.id);
  const auto train_samples = to_samples(train);
  const auto val_samples = to_samples(val);
  result.history = nn::train(result.network, train_samples, val_samples, train_cfg);
  return result;
}

std::vector<LabeledImage> classify_images(const nn::Network& net,
                                          std::span<const imagery::StreetImageRecord> images,
                                          const LabelTaxonomy& taxonomy) {
  require_taxonomy(net, taxonomy);
  std::vector<LabeledImage> out;
  out.reserve(images.size());
  nn::Workspace ws;
  for (const auto& rec : images) {
    require_shape(net, rec.image, rec.id);
    const auto pred = nn::argmax(net.forward(to_tensor(rec.image), nn::Mode::Infer, ws));
    out.push_back({rec, pred.label, pred.confidence});
  }
  return out;
}

metrics::ConfusionMatrix evaluate_images(const nn::Network& net,
                                         std::span<const LabeledImage> items,
                                         const LabelTaxonomy& taxonomy) {
  require_taxonomy(net, taxonomy);
  std::vector<int> predicted;
  std::vector<int> truth;
  nn::Workspace ws;
  for (const auto& it : items) {
    require_shape(net, it.record.image, it.record.id);
    predicted.push_back(nn::argmax(net.forward(to_tensor(it.record.image), nn::Mode::Infer, ws)).label);
    truth.push_back(it.label);
  }
  return metrics::confusion_matrix(predicted, truth, taxonomy.classes);
}

LabelTaxonomy taxonomy_of(const nn::Network& net) {
  const auto region = net.metadata.find("region");
  const auto classes = net.metadata.find("classes");
  if (region == net.metadata.end() || classes == net.metadata.end())
    throw Error(ErrorCode::Structure, "model carries no taxonomy metadata");
  LabelTaxonomy t;
  t.region = region->second;
  for (auto c : textio::split(classes->second, ',')) t.classes.emplace_back(c);
  t.validate();
  if (static_cast<int>(t.classes.size()) != net.classes())
    throw Error(ErrorCode::Structure, "model taxonomy size disagrees with its output layer");
  return t;
}

std::vector<std::string> parse_rejection_list(std::string_view text) {
  std::vector<std::string> ids;
  for (auto line : textio::split(text, '\n')) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = textio::trim(line);
    if (!line.empty()) ids.emplace_back(line);
  }
  return ids;
}

std::vector<std::string> read_rejection_list(const std::filesystem::path& path) {
  return parse_rejection_list(textio::read_file(path));
}

QcResult qc_filter(std::span<const LabeledImage> labeled, double min_confidence,
                   std::span<const std::string> rejection_ids, const LabelTaxonomy& taxonomy) {
  if (!(min_confidence >= 0.0 && min_confidence <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "min_confidence must lie in [0, 1]");
  const int others = taxonomy.others_index();
  const std::set<std::string> rejected(rejection_ids.begin(), rejection_ids.end());
  std::set<std::string> seen;

  QcResult out;
  for (const auto& item : labeled) {
    seen.insert(item.record.id);
    std::string reason;
    if (rejected.contains(item.record.id))
      reason = "rejected";
    else if (item.label == others)
      reason = "others";
    else if (item.confidence && *item.confidence < min_confidence)
      reason = "low-confidence";
    if (reason.empty()) {
      out.kept.push_back(item);
    } else {
      out.dropped.push_back(item);
      out.reasons.push_back(std::move(reason));
    }
  }
  for (const auto& id : rejected)
    if (!seen.contains(id)) out.warnings.push_back("rejection list id '" + id + "' matches no image");
  return out;
}

}  // namespace cropref::images
