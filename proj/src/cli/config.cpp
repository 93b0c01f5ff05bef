#include <algorithm>

#include "cropref/cli.hpp"
#include "cropref/error.hpp"
#include "cropref/textio.hpp"

namespace cropref::cli {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "seed",
      "region",
      "synth.rows",
      "synth.cols",
      "synth.cell_m",
      "synth.parcel_cells",
      "synth.origin_lat",
      "synth.origin_lon",
      "synth.proportions",
      "synth.year",
      "synth.scene_doys",
      "synth.sigma",
      "synth.cloud_fraction",
      "synth.image_size",
      "synth.capture_stride",
      "synth.train_per_class",
      "synth.others_points",
      "grid.bbox",
      "grid.spacing_m",
      "fetch.points",
      "fetch.mode",
      "fetch.fixtures",
      "fetch.headings",
      "fetch.api_base",
      "fetch.timeout_s",
      "fetch.width",
      "fetch.height",
      "images.catalog",
      "images.split",
      "images.epochs",
      "images.learning_rate",
      "images.momentum",
      "images.batch_size",
      "images.dropout",
      "images.conv1",
      "images.conv2",
      "images.conv3",
      "images.hidden",
      "classify.model",
      "classify.catalog",
      "qc.catalog",
      "qc.min_confidence",
      "qc.rejections",
      "shift.road_width_y_m",
      "shift.pixel_size_x_m",
      "refs.catalog",
      "refs.min_per_class",
      "truth.path",
      "validate.refpoints",
      "scenes.dir",
      "scenes.reflectance_scale",
      "mapper.refpoints",
      "mapper.extra_refpoints",
      "mapper.candidates",
      "mapper.features",
      "mapper.selection",
      "mapper.epochs",
      "mapper.learning_rate",
      "mapper.momentum",
      "mapper.batch_size",
      "mapper.dropout",
      "mapper.dropout_sweep",
      "mapper.train_fraction",
      "mapper.min_points_per_class",
      "mapper.conv1",
      "mapper.conv2",
      "mapper.hidden",
      "map.model",
      "map.bbox",
      "evaluate.map",
      "evaluate.legend",
  };
  return keys;
}

Config Config::parse(std::string_view text, std::string_view source) {
  Config cfg;
  std::size_t line_no = 0;
  for (auto line : textio::split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = textio::trim(line);
    if (line.empty()) continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::Parse, where + ": expected 'key = value'");
    const std::string key(textio::trim(line.substr(0, eq)));
    const std::string value(textio::trim(line.substr(eq + 1)));
    if (key.empty()) throw Error(ErrorCode::Parse, where + ": empty key");
    if (cfg.has(key)) throw Error(ErrorCode::Parse, where + ": duplicate key '" + key + "'");
    cfg.set(key, value);
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  return parse(textio::read_file(path), path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end())
    throw Error(ErrorCode::Parse, "unknown config key '" + key + "'");
  values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.contains(key); }

std::optional<std::string> Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  return v ? textio::parse_double(*v, key) : fallback;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto v = get(key);
  return v ? textio::parse_int(*v, key) : fallback;
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  const auto v = get(key);
  if (!v) return out;
  for (auto item : textio::split(*v, ',')) {
    item = textio::trim(item);
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t Config::hash() const { return textio::fnv1a64(canonical()); }

}  // namespace cropref::cli
