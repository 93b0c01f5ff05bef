#include <bit>
#include <cstring>

#include "cropref/error.hpp"
#include "cropref/textio.hpp"
#include "layers.hpp"

namespace cropref::nn {
namespace {

// Text block: one directive per line, closed by "end".
//   RTNN1 / input C H W / classes K / layer <desc> ... / meta <key> <value>
//   weights <count> / end
// followed by <count> little-endian IEEE-754 doubles in layer order.

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  return std::bit_cast<double>(bits);
}

LayerSpec parse_layer(const std::vector<std::string_view>& t) {
  const auto arg = [&](std::size_t i) {
    if (t.size() <= i) throw Error(ErrorCode::Decode, "truncated layer line");
    return static_cast<int>(textio::parse_int(t[i], "layer argument"));
  };
  if (t[1] == "conv2d") {
    if (t.size() != 7) throw Error(ErrorCode::Decode, "conv2d needs 5 arguments");
    if (t[6] != "same" && t[6] != "valid") throw Error(ErrorCode::Decode, "bad conv2d padding");
    return Conv2D{arg(2), arg(3), arg(4), arg(5), t[6] == "same"};
  }
  if (t[1] == "relu") return ReLU{};
  if (t[1] == "maxpool") return MaxPool{arg(2)};
  if (t[1] == "dropout") {
    if (t.size() != 3) throw Error(ErrorCode::Decode, "dropout needs a rate");
    return Dropout{textio::parse_double(t[2], "dropout rate")};
  }
  if (t[1] == "dense") return Dense{arg(2)};
  if (t[1] == "softmax") return Softmax{};
  throw Error(ErrorCode::Decode, "unknown layer '" + std::string(t[1]) + "'");
}

}  // namespace

std::string serialize_model(const Network& net) {
  const NetworkSpec& spec = net.spec();
  std::string out = std::string(kModelMagic) + "\n";
  out += "input " + std::to_string(spec.input.channels) + " " + std::to_string(spec.input.height) +
         " " + std::to_string(spec.input.width) + "\n";
  out += "classes " + std::to_string(spec.classes) + "\n";
  for (const auto& l : spec.layers) out += "layer " + describe(l) + "\n";
  for (const auto& [key, value] : net.metadata) {
    if (key.empty() || key.find_first_of(" \t\n") != std::string::npos ||
        value.find('\n') != std::string::npos)
      throw Error(ErrorCode::InvalidArgument, "metadata keys must be single tokens without newlines");
    out += "meta " + key + " " + value + "\n";
  }
  const auto weights = net.flat_parameters();
  out += "weights " + std::to_string(weights.size()) + "\nend\n";
  for (double w : weights) put_le(out, w);
  return out;
}

Network deserialize_model(std::string_view bytes) {
  const std::string magic_line = std::string(kModelMagic) + "\n";
  if (!bytes.starts_with(magic_line)) throw Error(ErrorCode::Decode, "bad model magic");
  std::size_t pos = magic_line.size();

  NetworkSpec spec;
  std::map<std::string, std::string> metadata;
  bool have_input = false;
  bool have_classes = false;
  long long declared = -1;
  while (true) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw Error(ErrorCode::Decode, "truncated model header");
    const std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (line == "end") break;
    const auto t = textio::tokens(line);
    if (t.empty()) continue;
    if (t[0] == "input" && t.size() == 4) {
      spec.input = {static_cast<int>(textio::parse_int(t[1], "input")),
                    static_cast<int>(textio::parse_int(t[2], "input")),
                    static_cast<int>(textio::parse_int(t[3], "input"))};
      have_input = true;
    } else if (t[0] == "classes" && t.size() == 2) {
      spec.classes = static_cast<int>(textio::parse_int(t[1], "classes"));
      have_classes = true;
    } else if (t[0] == "layer" && t.size() >= 2) {
      spec.layers.push_back(parse_layer(t));
    } else if (t[0] == "meta" && t.size() >= 2) {
      const auto key_pos = line.find(t[1]);
      const auto rest = textio::trim(line.substr(key_pos + t[1].size()));
      metadata[std::string(t[1])] = std::string(rest);
    } else if (t[0] == "weights" && t.size() == 2) {
      declared = textio::parse_int(t[1], "weight count");
    } else {
      throw Error(ErrorCode::Decode, "unexpected model header line '" + std::string(line) + "'");
    }
  }
  if (!have_input || !have_classes || declared < 0)
    throw Error(ErrorCode::Decode, "model header lacks input, classes or weights");

  Network net = build_uninitialized(spec);
  net.metadata = std::move(metadata);
  if (static_cast<std::size_t>(declared) != net.parameter_count())
    throw Error(ErrorCode::Structure, "model declares " + std::to_string(declared) +
                                          " weights but its layers need " +
                                          std::to_string(net.parameter_count()));
  const std::size_t payload = bytes.size() - pos;
  if (payload != static_cast<std::size_t>(declared) * 8)
    throw Error(ErrorCode::Structure, "weight payload has " + std::to_string(payload) +
                                          " bytes, expected " + std::to_string(declared * 8));
  std::vector<double> weights(static_cast<std::size_t>(declared));
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = get_le(bytes.data() + pos + 8 * i);
  net.set_flat_parameters(weights);
  return net;
}

void save_model(const Network& net, const std::filesystem::path& path) {
  textio::write_file(path, serialize_model(net));
}

Network load_model(const std::filesystem::path& path) {
  return deserialize_model(textio::read_file(path));
}

}  // namespace cropref::nn
