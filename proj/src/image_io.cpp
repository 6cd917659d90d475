#include "darkflash/image_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "darkflash/error.hpp"

namespace darkflash {

namespace fs = std::filesystem;

namespace {

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw format_error("cannot open for writing: " + tmp.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw format_error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw format_error("cannot replace " + path.string() + ": " +
                       ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw format_error("cannot open: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Skips whitespace and '#' comment lines, then reads one token.
std::string next_token(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    ++pos;
  }
  if (start == pos) {
    throw format_error("truncated header");
  }
  return bytes.substr(start, pos - start);
}

int parse_int(const std::string& s) {
  try {
    return std::stoi(s);
  } catch (const std::exception&) {
    throw format_error("bad integer in header: " + s);
  }
}

fs::path sidecar_path(const fs::path& pgm_path) {
  fs::path p = pgm_path;
  p.replace_extension(".json");
  return p;
}

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms unsupported");

float swap_if_needed_le(float v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u = __builtin_bswap32(u);
    std::memcpy(&v, &u, 4);
    return v;
  }
}

}  // namespace

void write_raw_pgm(const fs::path& pgm_path, const RawFrame& raw) {
  raw.validate();
  std::string bytes;
  {
    std::ostringstream header;
    header << "P5\n" << raw.width << " " << raw.height << "\n65535\n";
    bytes = header.str();
  }
  bytes.reserve(bytes.size() + raw.data.size() * 2);
  for (std::uint16_t v : raw.data) {
    bytes.push_back(static_cast<char>(v >> 8));
    bytes.push_back(static_cast<char>(v & 0xFF));
  }
  write_file_atomic(pgm_path, bytes);

  Json j;
  j["cfa_pattern"] = to_string(raw.cfa);
  j["adc_bits"] = raw.adc_bits;
  j["black_level"] = raw.black_level;
  j["camera_id"] = to_string(raw.camera_id);
  j["settings"] = settings_to_json(raw.settings);
  write_json_file(sidecar_path(pgm_path), j);
}

RawFrame read_raw_pgm(const fs::path& pgm_path) {
  const std::string bytes = read_file(pgm_path);
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P5") {
    throw format_error("not a binary PGM: " + pgm_path.string());
  }
  RawFrame raw;
  raw.width = parse_int(next_token(bytes, pos));
  raw.height = parse_int(next_token(bytes, pos));
  const int maxval = parse_int(next_token(bytes, pos));
  if (maxval <= 255 || maxval > 65535) {
    throw format_error("expected 16-bit PGM (maxval in [256, 65535]): " +
                       pgm_path.string());
  }
  if (pos >= bytes.size()) {
    throw format_error("missing pixel data: " + pgm_path.string());
  }
  ++pos;  // single whitespace after maxval
  const std::size_t count = static_cast<std::size_t>(raw.width) * raw.height;
  if (bytes.size() - pos < count * 2) {
    throw format_error("truncated pixel data: " + pgm_path.string());
  }
  raw.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto hi = static_cast<std::uint8_t>(bytes[pos + 2 * i]);
    const auto lo = static_cast<std::uint8_t>(bytes[pos + 2 * i + 1]);
    raw.data[i] = static_cast<std::uint16_t>((hi << 8) | lo);
  }

  const Json j = read_json_file(sidecar_path(pgm_path));
  try {
    raw.cfa = cfa_pattern_from_string(j.at("cfa_pattern").get<std::string>());
    raw.adc_bits = j.at("adc_bits").get<int>();
    raw.black_level = j.at("black_level").get<std::uint16_t>();
    raw.camera_id = camera_id_from_string(j.at("camera_id").get<std::string>());
    raw.settings = settings_from_json(j.at("settings"));
  } catch (const Json::exception& e) {
    throw format_error("bad sidecar for " + pgm_path.string() + ": " +
                       e.what());
  }
  raw.validate();
  return raw;
}

void write_pfm(const fs::path& path, const LinearImage& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw dimension_error("write_pfm: only 1 or 3 channels supported");
  }
  if (img.empty()) {
    throw dimension_error("write_pfm: empty image");
  }
  std::ostringstream header;
  header << (img.channels() == 3 ? "PF" : "Pf") << "\n"
         << img.width() << " " << img.height() << "\n-1.0\n";
  std::string bytes = header.str();
  bytes.reserve(bytes.size() + img.size() * 4);
  const int row_floats = img.width() * img.channels();
  std::vector<float> row(row_floats);
  for (int y = img.height() - 1; y >= 0; --y) {
    const float* src = img.data().data() +
                       static_cast<std::size_t>(y) * row_floats;
    for (int i = 0; i < row_floats; ++i) row[i] = swap_if_needed_le(src[i]);
    bytes.append(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::size_t>(row_floats) * 4);
  }
  write_file_atomic(path, bytes);
}

LinearImage read_pfm(const fs::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  int channels = 0;
  if (magic == "PF") {
    channels = 3;
  } else if (magic == "Pf") {
    channels = 1;
  } else {
    throw format_error("not a PFM: " + path.string());
  }
  const int w = parse_int(next_token(bytes, pos));
  const int h = parse_int(next_token(bytes, pos));
  const std::string scale_str = next_token(bytes, pos);
  double scale = 0.0;
  try {
    scale = std::stod(scale_str);
  } catch (const std::exception&) {
    throw format_error("bad PFM scale: " + path.string());
  }
  if (scale >= 0.0) {
    throw format_error("big-endian PFM unsupported: " + path.string());
  }
  if (w <= 0 || h <= 0) {
    throw format_error("bad PFM dimensions: " + path.string());
  }
  ++pos;  // single whitespace after scale
  const std::size_t count = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() - pos < count * 4) {
    throw format_error("truncated PFM data: " + path.string());
  }
  LinearImage img(w, h, channels);
  const int row_floats = w * channels;
  for (int y = h - 1; y >= 0; --y) {
    float* dst = img.data().data() + static_cast<std::size_t>(y) * row_floats;
    std::memcpy(dst, bytes.data() + pos,
                static_cast<std::size_t>(row_floats) * 4);
    for (int i = 0; i < row_floats; ++i) dst[i] = swap_if_needed_le(dst[i]);
    pos += static_cast<std::size_t>(row_floats) * 4;
  }
  return img;
}

void write_json_file(const fs::path& path, const Json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

Json read_json_file(const fs::path& path) {
  const std::string bytes = read_file(path);
  try {
    return Json::parse(bytes);
  } catch (const Json::exception& e) {
    throw format_error("bad JSON in " + path.string() + ": " + e.what());
  }
}

Json settings_to_json(const ExposureSettings& s) {
  Json j;
  j["exposure_s"] = s.exposure_s;
  j["gain_db"] = s.gain_db;
  j["flash"] = to_string(s.flash);
  j["flash_fraction"] = s.flash_fraction;
  j["noise"] = Json{{"read_sigma", s.noise.read_sigma},
                    {"shot_scale", s.noise.shot_scale},
                    {"seed", s.noise.seed}};
  return j;
}

ExposureSettings settings_from_json(const Json& j) {
  ExposureSettings s;
  try {
    s.exposure_s = j.at("exposure_s").get<double>();
    s.gain_db = j.at("gain_db").get<double>();
    s.flash = flash_kind_from_string(j.at("flash").get<std::string>());
    s.flash_fraction = j.at("flash_fraction").get<double>();
    const Json& n = j.at("noise");
    s.noise.read_sigma = n.at("read_sigma").get<double>();
    s.noise.shot_scale = n.at("shot_scale").get<double>();
    s.noise.seed = n.at("seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw format_error(std::string("bad exposure settings: ") + e.what());
  }
  return s;
}

}  // namespace darkflash
